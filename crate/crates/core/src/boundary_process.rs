//! The reflected path observed only through its boundary visits: inverse
//! local time, the time-changed trace, the Dirichlet-to-Neumann map as the
//! trace generator, and empirical jump-kernel statistics.

use serde::Serialize;
use std::fmt::Write as _;

use crate::conductivity::ConductivityField;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, DomainGeometry};
use crate::linalg::Vec2;
use crate::rng::PathRng;
use crate::sde::{first_exit, simulate_path, Flow, NoObserver, PathObserver, SimulationParams, StepEvent};
use crate::stats::{map_paths, RunningStats};

/// `(time, local time)` after every step of one path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalTimeLedger {
    times: Vec<f64>,
    local_times: Vec<f64>,
}

impl LocalTimeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, time: f64, local_time: f64) {
        self.times.push(time);
        self.local_times.push(local_time);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_local_time(&self) -> f64 {
        self.local_times.last().copied().unwrap_or(0.0)
    }
}

impl PathObserver for LocalTimeLedger {
    fn observe(&mut self, event: &StepEvent<'_>) -> Flow {
        self.record(event.state.time, event.state.local_time);
        Flow::Continue
    }
}

/// Discrete right-inverse `τ(s)`: the first step time at which the local time
/// exceeds `s`.
pub fn inverse_local_time(ledger: &LocalTimeLedger, s: f64) -> Result<f64> {
    // local times are nondecreasing, so the first index with L > s is a
    // partition point
    let k = ledger.local_times.partition_point(|&l| l <= s);
    ledger
        .times
        .get(k)
        .copied()
        .ok_or(Error::LocalTimeExhausted { requested: s, reached: ledger.final_local_time() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceSample {
    pub s: f64,
    pub point: BoundaryPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Jump {
    pub s: f64,
    pub from: BoundaryPoint,
    pub to: BoundaryPoint,
    pub gap: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundaryTrace {
    /// Trace values `X̂_s` on the grid `s = k Δs`.
    pub samples: Vec<TraceSample>,
    pub jumps: Vec<Jump>,
    pub spacing: f64,
    pub jump_threshold: f64,
}

/// Default jump threshold `10 √(Δs dt / ρ)`.
pub fn default_jump_threshold(spacing: f64, params: &SimulationParams) -> f64 {
    10.0 * (spacing * params.dt / params.local_time_constant).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSpec {
    /// Local-time horizon S.
    pub horizon: f64,
    /// Grid spacing Δs.
    pub spacing: f64,
    /// Gap above which consecutive samples count as a jump; defaults to
    /// [`default_jump_threshold`].
    pub jump_threshold: Option<f64>,
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.spacing > 0.0 && self.spacing <= self.horizon) {
            return Err(Error::InvalidParameter(format!("invalid trace grid {self:?}")));
        }
        if let Some(t) = self.jump_threshold {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!("jump threshold must be nonnegative, got {t}")));
            }
        }
        Ok(())
    }
}

/// Trace of one reflected path started at `start` on ∂D. `extra` sees every
/// step of the underlying path up to the last grid point.
pub fn trace_path_with<O: PathObserver + ?Sized>(
    start: &BoundaryPoint,
    spec: &TraceSpec,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    rng: &mut PathRng,
    extra: &mut O,
) -> Result<BoundaryTrace> {
    spec.validate()?;
    let threshold = spec.jump_threshold.unwrap_or_else(|| default_jump_threshold(spec.spacing, params));
    let n_samples = (spec.horizon / spec.spacing + 1e-9).floor() as usize + 1;
    let mut samples: Vec<TraceSample> = Vec::with_capacity(n_samples);
    let mut obs = |e: &StepEvent<'_>| {
        let flow = extra.observe(e);
        if let Some(p) = e.boundary {
            while samples.len() < n_samples && e.state.local_time > samples.len() as f64 * spec.spacing {
                samples.push(TraceSample { s: samples.len() as f64 * spec.spacing, point: p });
            }
        }
        if samples.len() == n_samples {
            Flow::Stop
        } else {
            flow
        }
    };
    let p = SimulationParams { kill_threshold: 0.0, ..params.clone() };
    let end = simulate_path(start.position, field, domain, &p, &|_: &BoundaryPoint| 0.0, &mut obs, rng)?;
    if samples.len() < n_samples {
        return Err(Error::LocalTimeExhausted { requested: spec.horizon, reached: end.local_time });
    }
    let jumps = samples
        .windows(2)
        .filter_map(|w| {
            let gap = w[0].point.position.distance(w[1].point.position);
            (gap > threshold).then_some(Jump { s: w[1].s, from: w[0].point, to: w[1].point, gap })
        })
        .collect();
    Ok(BoundaryTrace { samples, jumps, spacing: spec.spacing, jump_threshold: threshold })
}

pub fn trace_path(
    start: &BoundaryPoint,
    spec: &TraceSpec,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    rng: &mut PathRng,
) -> Result<BoundaryTrace> {
    trace_path_with(start, spec, field, domain, params, rng, &mut NoObserver)
}

/// Traces from `starts[k % starts.len()]` for path indices `0..n_paths`.
pub fn trace_paths(
    starts: &[BoundaryPoint],
    spec: &TraceSpec,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<Vec<BoundaryTrace>> {
    if starts.is_empty() {
        return Err(Error::InvalidParameter("no trace start points".into()));
    }
    map_paths(n_paths, params.workers, |i| {
        let start = &starts[i as usize % starts.len()];
        trace_path(start, spec, field, domain, params, &mut PathRng::increments(params.seed, i))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DtnPoint {
    pub start: BoundaryPoint,
    pub value: f64,
    pub stderr: f64,
}

/// Finest step used near ∂D when the caller sets none: the local time
/// gained per reflection, about `√dt`, should be a hundredth of `t`.
fn dtn_params(params: &SimulationParams, t: f64) -> SimulationParams {
    let fine = params.boundary_dt.unwrap_or_else(|| (1e-2 * t).powi(2).min(params.dt));
    SimulationParams { boundary_dt: Some(fine), kill_threshold: 0.0, ..params.clone() }
}

/// `Λ̂φ(x) = (φ(x) - E φ(X̂_t)) / t` at each start point, for several φ on
/// the same paths. Path `i` from start `j` uses stream `j · n_paths + i`.
pub fn estimate_dtn_many(
    phis: &[&(dyn Fn(&BoundaryPoint) -> f64 + Sync)],
    t: f64,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
    starts: &[BoundaryPoint],
) -> Result<Vec<Vec<DtnPoint>>> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("trace time must be positive, got {t}")));
    }
    if n_paths < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 paths, got {n_paths}")));
    }
    let p = dtn_params(params, t);
    p.validate()?;
    let ends = map_paths(starts.len() * n_paths, p.workers, |k| {
        let start = &starts[k as usize / n_paths];
        let mut hit: Option<BoundaryPoint> = None;
        let mut obs = |e: &StepEvent<'_>| {
            if e.state.local_time > t {
                hit = e.boundary;
                Flow::Stop
            } else {
                Flow::Continue
            }
        };
        let end = simulate_path(start.position, field, domain, &p, &|_: &BoundaryPoint| 0.0, &mut obs, &mut PathRng::increments(p.seed, k))?;
        hit.ok_or(Error::LocalTimeExhausted { requested: t, reached: end.local_time })
    })?;
    Ok(phis
        .iter()
        .map(|phi| {
            starts
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let fx = phi(x);
                    let vals: Vec<f64> = ends[j * n_paths..(j + 1) * n_paths].iter().map(|y| (fx - phi(y)) / t).collect();
                    let s = RunningStats::from_samples(&vals);
                    DtnPoint { start: *x, value: s.mean(), stderr: s.stderr() }
                })
                .collect()
        })
        .collect())
}

pub fn estimate_dtn<F>(
    phi: &F,
    t: f64,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
    starts: &[BoundaryPoint],
) -> Result<Vec<DtnPoint>>
where
    F: Fn(&BoundaryPoint) -> f64 + Sync,
{
    Ok(estimate_dtn_many(&[phi], t, field, domain, params, n_paths, starts)?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftPoint {
    pub start: BoundaryPoint,
    pub b: Vec2,
    pub stderr: Vec2,
}

impl DriftPoint {
    /// Components along the outward normal and the counterclockwise tangent.
    pub fn normal_tangential(&self) -> (f64, f64) {
        let n = self.start.outward_normal;
        (self.b.dot(n), self.b.dot(n.perp()))
    }
}

/// `b = Λ id`, the DtN map applied to both coordinate functions.
pub fn drift_field(
    t: f64,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
    starts: &[BoundaryPoint],
) -> Result<Vec<DriftPoint>> {
    let x = |p: &BoundaryPoint| p.position.x;
    let y = |p: &BoundaryPoint| p.position.y;
    let r = estimate_dtn_many(&[&x, &y], t, field, domain, params, n_paths, starts)?;
    Ok(r[0]
        .iter()
        .zip(&r[1])
        .map(|(a, b)| DriftPoint { start: a.start, b: Vec2::new(a.value, b.value), stderr: Vec2::new(a.stderr, b.stderr) })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpKernelEstimate {
    pub bins: usize,
    pub bin_width: f64,
    /// `counts[a][b]`: jumps from source bin a to target bin b.
    pub counts: Vec<Vec<u64>>,
    /// Local-time parameter spent in each source bin.
    pub exposure: Vec<f64>,
    /// `counts / (2 · exposure · bin width)`.
    pub estimate: Vec<Vec<f64>>,
    pub min_gap: f64,
}

/// Bins the jumps of several traces by arc parameter. Only jumps with gap at
/// least `min_gap` are counted; diagonal bins mix in unresolved small jumps
/// and are not meaningful.
pub fn jump_statistics(
    traces: &[BoundaryTrace],
    bins: usize,
    domain: &DomainGeometry,
    min_gap: f64,
) -> Result<JumpKernelEstimate> {
    if bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let perimeter = domain.boundary_measure();
    let width = perimeter / bins as f64;
    let bin = |p: &BoundaryPoint| ((p.arc_parameter.rem_euclid(perimeter) / width) as usize).min(bins - 1);
    let mut counts = vec![vec![0u64; bins]; bins];
    let mut exposure = vec![0.0; bins];
    for tr in traces {
        for w in tr.samples.windows(2) {
            exposure[bin(&w[0].point)] += w[1].s - w[0].s;
        }
        for j in &tr.jumps {
            if j.gap >= min_gap {
                counts[bin(&j.from)][bin(&j.to)] += 1;
            }
        }
    }
    if let Some(a) = exposure.iter().position(|e| *e <= 0.0) {
        return Err(Error::InsufficientData(format!("source bin {a} has no exposure")));
    }
    let estimate = counts
        .iter()
        .zip(&exposure)
        .map(|(row, e)| row.iter().map(|&c| c as f64 / (2.0 * e * width)).collect())
        .collect();
    Ok(JumpKernelEstimate { bins, bin_width: width, counts, exposure, estimate, min_gap })
}

/// `Σ gap² / (2 · exposure)` over jumps with gap at least `min_gap`: the
/// empirical `∫ N(x, y) |x - y|² dσ(y)` averaged over the trace.
pub fn integrability_proxy(traces: &[BoundaryTrace], min_gap: f64) -> Result<f64> {
    let exposure: f64 = traces.iter().filter_map(|t| t.samples.last().map(|l| l.s - t.samples[0].s)).sum();
    if !(exposure > 0.0) {
        return Err(Error::InsufficientData("traces carry no local time".into()));
    }
    let sum: f64 = traces.iter().flat_map(|t| &t.jumps).filter(|j| j.gap >= min_gap).map(|j| j.gap * j.gap).sum();
    Ok(sum / (2.0 * exposure))
}

/// Continuum solution through the trace: exit the domain from `x`, then
/// integrate `f` along the trace up to local time S.
#[allow(clippy::too_many_arguments)]
pub fn continuum_via_trace<F>(
    x: Vec2,
    f: &F,
    spec: &TraceSpec,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<crate::feynman_kac::EstimatorResult>
where
    F: Fn(&BoundaryPoint) -> f64 + Sync,
{
    let rows = map_paths(n_paths, params.workers, |i| {
        let mut rng = PathRng::increments(params.seed, i);
        let exit = first_exit(x, field, domain, params, &mut rng)?;
        let tr = trace_path(&exit.exit, spec, field, domain, params, &mut rng)?;
        let n = tr.samples.len() - 1;
        Ok(tr.samples[..n].iter().map(|s| f(&s.point)).sum::<f64>() * spec.spacing)
    })?;
    let s = RunningStats::from_samples(&rows);
    Ok(crate::feynman_kac::EstimatorResult {
        mean: s.mean(),
        stderr: s.stderr(),
        n_paths,
        horizon_used: spec.horizon,
        truncation_tail_bound: None,
    })
}

/// Rows `path,s,arc,jump` with `jump = 1` on samples reached by a jump.
pub fn traces_to_csv(traces: &[BoundaryTrace]) -> String {
    let mut out = String::from("path,s,arc,jump\n");
    for (k, tr) in traces.iter().enumerate() {
        let mut jumps = tr.jumps.iter().map(|j| j.s).peekable();
        for smp in &tr.samples {
            let flag = if jumps.peek() == Some(&smp.s) {
                jumps.next();
                1
            } else {
                0
            };
            let _ = writeln!(out, "{k},{:e},{:e},{flag}", smp.s, smp.point.arc_parameter);
        }
    }
    out
}

impl JumpKernelEstimate {
    /// Rows `source_bin,target_bin,source_arc,target_arc,count,exposure,estimate`
    /// with bin-center arc parameters.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source_bin,target_bin,source_arc,target_arc,count,exposure,estimate\n");
        for a in 0..self.bins {
            for b in 0..self.bins {
                let _ = writeln!(
                    out,
                    "{a},{b},{:e},{:e},{},{:e},{:e}",
                    (a as f64 + 0.5) * self.bin_width,
                    (b as f64 + 0.5) * self.bin_width,
                    self.counts[a][b],
                    self.exposure[a],
                    self.estimate[a][b]
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_params() -> (DomainGeometry, ConductivityField, SimulationParams) {
        let disk = DomainGeometry::unit_disk();
        let p = SimulationParams { dt: 1e-4, seed: 21, ..SimulationParams::for_domain(&disk) };
        (disk, ConductivityField::identity(), p)
    }

    #[test]
    fn inverse_local_time_on_a_ledger() {
        let mut l = LocalTimeLedger::new();
        for (t, lt) in [(0.1, 0.0), (0.2, 0.5), (0.3, 0.5), (0.4, 1.0)] {
            l.record(t, lt);
        }
        assert_eq!(inverse_local_time(&l, 0.0).unwrap(), 0.2);
        assert_eq!(inverse_local_time(&l, 0.49).unwrap(), 0.2);
        assert_eq!(inverse_local_time(&l, 0.5).unwrap(), 0.4);
        assert!(matches!(inverse_local_time(&l, 1.0), Err(Error::LocalTimeExhausted { .. })));
    }

    #[test]
    fn boundary_start_gains_local_time_at_once() {
        let (disk, id, p) = disk_params();
        let start = disk.boundary_point_at(0.3);
        let mut ledger = LocalTimeLedger::new();
        let p = SimulationParams { max_time: 0.05, ..p };
        simulate_path(start.position, &id, &disk, &p, &|_: &BoundaryPoint| 0.0, &mut ledger, &mut PathRng::increments(1, 0))
            .unwrap();
        let tau0 = inverse_local_time(&ledger, 0.0).unwrap();
        assert!(tau0 <= 20.0 * p.dt, "{tau0}");
        let mut last = 0.0;
        for k in 0..50 {
            let s = k as f64 * ledger.final_local_time() / 60.0;
            let t = inverse_local_time(&ledger, s).unwrap();
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn trace_samples_lie_on_boundary() {
        let (disk, id, p) = disk_params();
        let spec = TraceSpec { horizon: 0.5, spacing: 0.01, jump_threshold: None };
        let tr = trace_path(&disk.boundary_point_at(1.0), &spec, &id, &disk, &p, &mut PathRng::increments(2, 0)).unwrap();
        assert_eq!(tr.samples.len(), 51);
        assert!(tr.samples.windows(2).all(|w| w[1].s > w[0].s));
        for s in &tr.samples {
            assert!(disk.signed_distance(s.point.position).abs() < 1e-12);
        }
        assert!(tr.jumps.iter().all(|j| j.gap > tr.jump_threshold));
    }

    #[test]
    fn constant_has_zero_dtn() {
        let (disk, id, p) = disk_params();
        let starts = disk.boundary_grid(3, 0.0);
        let r = estimate_dtn(&|_: &BoundaryPoint| 1.0, 0.01, &id, &disk, &p, 20, &starts).unwrap();
        assert!(r.iter().all(|d| d.value == 0.0 && d.stderr == 0.0));
    }

    #[test]
    fn dtn_is_linear_under_coupling() {
        let (disk, id, p) = disk_params();
        let starts = disk.boundary_grid(2, 0.2);
        let a = |q: &BoundaryPoint| q.position.x;
        let b = |q: &BoundaryPoint| q.position.y * q.position.y;
        let c = |q: &BoundaryPoint| 2.0 * a(q) + b(q);
        let r = estimate_dtn_many(&[&a, &b, &c], 0.01, &id, &disk, &p, 50, &starts).unwrap();
        for j in 0..2 {
            assert!((r[2][j].value - 2.0 * r[0][j].value - r[1][j].value).abs() < 1e-9);
        }
    }

    #[test]
    fn jump_statistics_normalization() {
        let disk = DomainGeometry::unit_disk();
        let a = disk.boundary_point_at(0.1);
        let b = disk.boundary_point_at(3.3);
        let tr = BoundaryTrace {
            samples: vec![TraceSample { s: 0.0, point: a }, TraceSample { s: 0.5, point: b }, TraceSample { s: 1.0, point: b }],
            jumps: vec![Jump { s: 0.5, from: a, to: b, gap: a.position.distance(b.position) }],
            spacing: 0.5,
            jump_threshold: 0.1,
        };
        let est = jump_statistics(std::slice::from_ref(&tr), 2, &disk, 0.0).unwrap();
        assert_eq!(est.counts, vec![vec![0, 1], vec![0, 0]]);
        assert_eq!(est.exposure, vec![0.5, 0.5]);
        assert!((est.estimate[0][1] - 1.0 / (2.0 * 0.5 * std::f64::consts::PI)).abs() < 1e-12);
        assert!(matches!(jump_statistics(&[tr], 4, &disk, 0.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn csv_flags_jumps() {
        let disk = DomainGeometry::unit_disk();
        let a = disk.boundary_point_at(0.0);
        let b = disk.boundary_point_at(2.0);
        let tr = BoundaryTrace {
            samples: vec![TraceSample { s: 0.0, point: a }, TraceSample { s: 0.1, point: b }],
            jumps: vec![Jump { s: 0.1, from: a, to: b, gap: 1.0 }],
            spacing: 0.1,
            jump_threshold: 0.5,
        };
        let csv = traces_to_csv(&[tr]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "path,s,arc,jump");
        assert!(lines[1].ends_with(",0") && lines[2].ends_with(",1"));
    }
}
