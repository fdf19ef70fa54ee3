//! One function per subcommand, each returning the CSV reports it produced.

use fk_eit::acceptance::{run_all, SuiteConfig};
use fk_eit::boundary_process::{estimate_dtn, jump_statistics, trace_paths, traces_to_csv};
use fk_eit::feynman_kac::{solve_cem, solve_continuum, solve_dirichlet, ContinuumHorizon, EstimatorResult};
use fk_eit::oracle::{fd_solve, richardson_error, OracleProblem, ScalarConductivity};
use fk_eit::rng::derive_seed;
use fk_eit::sde::calibrate_local_time;
use fk_eit::Vec2;

use crate::config::{OracleKind, Setup};
use crate::error::CliError;
use crate::report::Csv;

fn missing(section: &str) -> CliError {
    CliError::Config(format!("this subcommand needs a [{section}] section"))
}

fn need_probes(s: &Setup) -> Result<(), CliError> {
    if s.probes.is_empty() {
        return Err(CliError::Config("no probe points given".into()));
    }
    Ok(())
}

const PROBE_HEADER: [&str; 7] = ["probe_x", "probe_y", "mean", "stderr", "n_paths", "seed", "dt"];

fn probe_row(s: &Setup, x: Vec2, r: &EstimatorResult) -> Vec<String> {
    vec![
        x.x.to_string(),
        x.y.to_string(),
        r.mean.to_string(),
        r.stderr.to_string(),
        r.n_paths.to_string(),
        s.params.seed.to_string(),
        s.params.dt.to_string(),
    ]
}

/// Probe k runs on the seed `derive_seed(seed, k)`.
fn per_probe<F>(s: &Setup, mut solve: F) -> Result<Vec<(Vec2, EstimatorResult)>, CliError>
where
    F: FnMut(Vec2, &fk_eit::SimulationParams) -> fk_eit::Result<EstimatorResult>,
{
    need_probes(s)?;
    s.probes
        .iter()
        .enumerate()
        .map(|(k, x)| Ok((*x, solve(*x, &s.params.with_seed(derive_seed(s.params.seed, k as u64)))?)))
        .collect()
}

pub fn solve_dirichlet_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let spec = s.config.dirichlet.as_ref().ok_or_else(|| missing("dirichlet"))?;
    let phi = spec.boundary.on(&s.domain);
    let n = s.config.simulation.n_paths;
    let rows = per_probe(s, |x, p| solve_dirichlet(x, &phi, &s.field, &s.domain, p, n))?;
    let mut csv = Csv::new("dirichlet.csv", &PROBE_HEADER);
    for (x, r) in &rows {
        csv.row(&probe_row(s, *x, r));
    }
    Ok(vec![csv])
}

pub fn solve_continuum_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let spec = s.config.continuum.as_ref().ok_or_else(|| missing("continuum"))?;
    let data = s.neumann.as_ref().ok_or_else(|| missing("continuum"))?;
    let rate = match spec.spectral_gap {
        Some(g) => g,
        None => fk_eit::oracle::spectral_gap(&s.domain, &s.field, spec.gap_resolution)?,
    };
    let horizon = ContinuumHorizon { rate, offset: spec.offset, tolerance: spec.tolerance };
    let n = s.config.simulation.n_paths;
    let rows = per_probe(s, |x, p| solve_continuum(x, data, &s.field, &s.domain, p, n, &horizon))?;
    let mut header = PROBE_HEADER.to_vec();
    header.extend(["spectral_gap", "horizon", "tail_bound"]);
    let mut csv = Csv::new("continuum.csv", &header);
    for (x, r) in &rows {
        let mut row = probe_row(s, *x, r);
        row.extend([rate.to_string(), horizon.horizon().to_string(), horizon.tail_bound().to_string()]);
        csv.row(&row);
    }
    Ok(vec![csv])
}

pub fn solve_cem_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let electrodes = s.electrodes.as_ref().ok_or_else(|| missing("cem"))?;
    let n = s.config.simulation.n_paths;
    let rows = per_probe(s, |x, p| solve_cem(x, electrodes, &s.field, &s.domain, p, n))?;
    let mut header = PROBE_HEADER.to_vec();
    header.push("truncation_bound");
    let mut csv = Csv::new("cem.csv", &header);
    for (x, r) in &rows {
        let mut row = probe_row(s, *x, r);
        row.push(r.truncation_tail_bound.unwrap_or(0.0).to_string());
        csv.row(&row);
    }
    Ok(vec![csv])
}

pub fn estimate_dtn_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let spec = s.config.dtn.as_ref().ok_or_else(|| missing("dtn"))?;
    let phi = spec.phi.on(&s.domain);
    let starts = s.domain.boundary_grid(spec.n_starts, 0.0);
    let n = s.config.simulation.n_paths;
    let points = estimate_dtn(&phi, spec.t, &s.field, &s.domain, &s.params, n, &starts)?;
    let mut csv = Csv::new("dtn.csv", &["arc", "x", "y", "value", "stderr", "n_paths", "t", "seed", "dt"]);
    for d in &points {
        csv.row(&[
            d.start.arc_parameter.to_string(),
            d.start.position.x.to_string(),
            d.start.position.y.to_string(),
            d.value.to_string(),
            d.stderr.to_string(),
            n.to_string(),
            spec.t.to_string(),
            s.params.seed.to_string(),
            s.params.dt.to_string(),
        ]);
    }
    Ok(vec![csv])
}

fn traces(s: &Setup) -> Result<Vec<fk_eit::boundary_process::BoundaryTrace>, CliError> {
    let spec = s.config.trace.as_ref().ok_or_else(|| missing("trace"))?;
    let starts = s.domain.boundary_grid(spec.n_starts, 0.0);
    Ok(trace_paths(&starts, &spec.spec(), &s.field, &s.domain, &s.params, s.config.simulation.n_paths)?)
}

/// Appends `seed,dt` to every line of a CSV text produced by the engine.
fn with_seed_and_dt(name: &str, text: &str, s: &Setup) -> Csv {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').chain(["seed", "dt"]).collect();
    let mut csv = Csv::new(name, &header);
    for line in lines {
        let mut row: Vec<String> = line.split(',').map(str::to_string).collect();
        row.extend([s.params.seed.to_string(), s.params.dt.to_string()]);
        csv.row(&row);
    }
    csv
}

pub fn boundary_trace_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let tr = traces(s)?;
    Ok(vec![with_seed_and_dt("trace.csv", &traces_to_csv(&tr), s)])
}

pub fn jump_kernel_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let spec = s.config.trace.as_ref().ok_or_else(|| missing("trace"))?;
    let tr = traces(s)?;
    let k = jump_statistics(&tr, spec.bins, &s.domain, spec.min_gap)?;
    Ok(vec![with_seed_and_dt("jump_kernel.csv", &k.to_csv(), s)])
}

pub fn calibrate_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let c = calibrate_local_time(&s.domain, &s.field, &s.params, s.config.simulation.n_paths)?;
    let mut csv =
        Csv::new("calibration.csv", &["rho", "rho_analytic", "raw_mean", "raw_stderr", "target", "n_paths", "seed", "dt"]);
    csv.row(&[
        c.rho.to_string(),
        c.rho_analytic.to_string(),
        c.raw_mean.to_string(),
        c.raw_stderr.to_string(),
        c.target.to_string(),
        c.n_paths.to_string(),
        s.params.seed.to_string(),
        s.params.dt.to_string(),
    ]);
    Ok(vec![csv])
}

/// Runs the acceptance suite; failures are reported after the CSV is built.
pub fn validate_cmd(s: &Setup) -> (Vec<Csv>, usize) {
    let cfg = SuiteConfig { seed: s.params.seed, workers: s.params.workers };
    let mut csv = Csv::new("acceptance.csv", &["id", "name", "passed", "detail", "seconds", "seed", "dt"]);
    let mut failed = 0;
    for r in run_all(&cfg) {
        println!("{}", r.line());
        failed += usize::from(!r.passed);
        csv.row(&[
            r.id.to_string(),
            r.name.clone(),
            r.passed.to_string(),
            r.detail.clone(),
            format!("{:.3}", r.seconds),
            cfg.seed.to_string(),
            r.dt.map_or(String::new(), |d| d.to_string()),
        ]);
    }
    (vec![csv], failed)
}

pub fn oracle_cmd(s: &Setup) -> Result<Vec<Csv>, CliError> {
    let spec = s.config.oracle.as_ref().ok_or_else(|| missing("oracle"))?;
    let problem = match spec.problem {
        OracleKind::Dirichlet => {
            OracleProblem::Dirichlet(s.config.dirichlet.as_ref().ok_or_else(|| missing("dirichlet"))?.boundary.clone())
        }
        OracleKind::Continuum => {
            OracleProblem::Continuum(s.config.continuum.as_ref().ok_or_else(|| missing("continuum"))?.flux.clone())
        }
        OracleKind::Cem => OracleProblem::Cem(s.electrodes.clone().ok_or_else(|| missing("cem"))?),
    };
    let kappa: &dyn ScalarConductivity = match &s.piecewise {
        Some(p) => p,
        None => &s.field,
    };
    let fine = fd_solve(&problem, &s.domain, kappa, spec.resolution)?;
    let mut grid = Csv::new("oracle_grid.csv", &["x", "y", "value", "resolution"]);
    for (c, v) in fine.nodes() {
        grid.row(&[c.x.to_string(), c.y.to_string(), v.to_string(), spec.resolution.to_string()]);
    }
    let mut out = vec![grid];
    if !s.probes.is_empty() {
        let coarse = fd_solve(&problem, &s.domain, kappa, (spec.resolution / 2).max(1))?;
        let mut probes = Csv::new("oracle_probes.csv", &["probe_x", "probe_y", "value", "richardson_error", "resolution"]);
        for x in &s.probes {
            probes.row(&[
                x.x.to_string(),
                x.y.to_string(),
                fine.interpolate(*x).to_string(),
                richardson_error(&coarse, &fine, *x).to_string(),
                spec.resolution.to_string(),
            ]);
        }
        out.push(probes);
    }
    Ok(out)
}
