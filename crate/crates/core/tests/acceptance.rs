//! Acceptance suite: one test per criterion, each printing its report line.

use fk_eit::acceptance::{run_criterion, SuiteConfig};
use std::io::Write;

fn check(id: u32) {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get().min(8));
    let report = run_criterion(id, &SuiteConfig { workers, ..SuiteConfig::default() });
    // straight to the handle so the line shows without --nocapture
    let _ = writeln!(std::io::stderr(), "{}", report.line());
    assert!(report.passed, "{}", report.line());
}

#[test]
fn criterion_01_dirichlet_estimator() {
    check(1);
}

#[test]
fn criterion_02_continuum_estimator() {
    check(2);
}

#[test]
fn criterion_03_electrode_model_estimator() {
    check(3);
}

#[test]
fn criterion_04_occupation_identity() {
    check(4);
}

#[test]
fn criterion_05_local_time_scaling() {
    check(5);
}

#[test]
fn criterion_06_dtn_generator() {
    check(6);
}

#[test]
fn criterion_07_martingale_residual() {
    check(7);
}

#[test]
fn criterion_08_weak_order() {
    check(8);
}

#[test]
fn criterion_09_determinism() {
    check(9);
}

#[test]
fn criterion_10_oracle_self_checks() {
    check(10);
}
