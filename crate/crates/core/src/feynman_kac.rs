//! Path-functional estimators for the Dirichlet, Neumann (continuum) and
//! Robin (complete electrode) problems, plus the martingale and occupation
//! diagnostics.

use serde::Serialize;

use crate::boundary_data::{BoundaryFunction, NeumannData};
use crate::conductivity::ConductivityField;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, DomainGeometry, ElectrodeConfig};
use crate::linalg::Vec2;
use crate::rng::{PathRng, StreamPurpose};
use crate::sde::{first_exit, simulate_path, Flow, NoObserver, SimulationParams, StepEvent};
use crate::stats::{map_paths, RunningStats};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Longest simulated time over all paths.
    pub horizon_used: f64,
    /// Bound on the bias from stopping paths early, when one applies.
    pub truncation_tail_bound: Option<f64>,
}

impl EstimatorResult {
    fn from_rows(rows: &[(f64, f64)], tail: Option<f64>) -> Self {
        let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let s = RunningStats::from_samples(&values);
        EstimatorResult {
            mean: s.mean(),
            stderr: s.stderr(),
            n_paths: rows.len(),
            horizon_used: rows.iter().map(|r| r.1).fold(0.0, f64::max),
            truncation_tail_bound: tail,
        }
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 paths, got {n_paths}")));
    }
    Ok(())
}

/// `u(x) = E_x φ(X_τ)`, the exit-point average of the unreflected chain.
pub fn solve_dirichlet<F>(
    x: Vec2,
    phi: &F,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<EstimatorResult>
where
    F: Fn(&BoundaryPoint) -> f64 + Sync + ?Sized,
{
    params.validate()?;
    check_paths(n_paths)?;
    let rows = map_paths(n_paths, params.workers, |i| {
        let e = first_exit(x, field, domain, params, &mut PathRng::increments(params.seed, i))?;
        Ok((phi(&e.exit), e.time))
    })?;
    Ok(EstimatorResult::from_rows(&rows, None))
}

/// Discretization bias of [`solve_dirichlet`], measured as the mean of
/// `φ(exit) - h(crossing)` where `h` is harmonic on the whole plane with
/// `h = φ` on ∂D.
///
/// For κ ≡ 1 the Gaussian chain keeps `h` a martingale, so `E h(crossing)`
/// equals `h(x)` exactly and the only remaining error is the projection of
/// the crossing onto ∂D. The sample variance is far below that of the plain
/// estimator, which makes small biases measurable.
pub fn dirichlet_bias<F, H>(
    x: Vec2,
    phi: &F,
    harmonic: &H,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<EstimatorResult>
where
    F: Fn(&BoundaryPoint) -> f64 + Sync + ?Sized,
    H: Fn(Vec2) -> f64 + Sync + ?Sized,
{
    params.validate()?;
    check_paths(n_paths)?;
    if !field.is_constant_identity() {
        return Err(Error::UnsupportedField("bias measurement needs κ ≡ 1".into()));
    }
    let rows = map_paths(n_paths, params.workers, |i| {
        let e = first_exit(x, field, domain, params, &mut PathRng::increments(params.seed, i))?;
        Ok((phi(&e.exit) - harmonic(e.crossing), e.time))
    })?;
    Ok(EstimatorResult::from_rows(&rows, None))
}

/// Time horizon for the continuum estimator.
///
/// The ergodic tail after time `t` decays like `exp(-rate (t - offset))`,
/// where `rate` is the spectral gap of the Neumann problem. The horizon is
/// the first time this bound drops to `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuumHorizon {
    pub rate: f64,
    pub offset: f64,
    pub tolerance: f64,
}

impl ContinuumHorizon {
    pub const DEFAULT_OFFSET: f64 = 0.5;
    pub const DEFAULT_TOLERANCE: f64 = 0.005;

    pub fn new(rate: f64) -> Self {
        Self { rate, offset: Self::DEFAULT_OFFSET, tolerance: Self::DEFAULT_TOLERANCE }
    }

    /// Uses the spectral gap of the grid operator at the given resolution.
    pub fn from_oracle(domain: &DomainGeometry, field: &ConductivityField, resolution: usize) -> Result<Self> {
        Ok(Self::new(crate::oracle::spectral_gap(domain, field, resolution)?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.offset >= 0.0 && self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!("invalid continuum horizon {self:?}")));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.offset + (1.0 / self.tolerance).ln() / self.rate
    }

    pub fn tail_bound(&self) -> f64 {
        (-self.rate * (self.horizon() - self.offset)).exp()
    }
}

/// `u(x) ≈ E_x ∫₀ᵀ f(X_s) dL_s` with T from `horizon`. The limit is the
/// solution with zero mean over D.
pub fn solve_continuum(
    x: Vec2,
    data: &NeumannData,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
    horizon: &ContinuumHorizon,
) -> Result<EstimatorResult> {
    check_paths(n_paths)?;
    horizon.validate()?;
    if !field.identity_at_boundary() {
        return Err(Error::MissingCollar);
    }
    let p = SimulationParams { max_time: horizon.horizon(), kill_threshold: 0.0, ..params.clone() };
    p.validate()?;
    let rows = map_paths(n_paths, p.workers, |i| {
        let mut acc = 0.0;
        let mut obs = |e: &StepEvent<'_>| {
            if let Some(b) = &e.boundary {
                acc += data.value(b) * e.delta_local_time;
            }
            Flow::Continue
        };
        let end = simulate_path(x, field, domain, &p, &|_: &BoundaryPoint| 0.0, &mut obs, &mut PathRng::increments(p.seed, i))?;
        Ok((acc, end.time))
    })?;
    Ok(EstimatorResult::from_rows(&rows, Some(horizon.tail_bound())))
}

/// `u(x) = E_x ∫₀^∞ e_g(t) f(X_t) dL_t` for the electrode model.
///
/// On each reflected step the discount decays by `exp(-g ΔL)` with g frozen
/// at the reflection point; the source term of that step is integrated
/// exactly against it. Paths stop once the discount falls below the kill
/// threshold. The remaining contribution of a stopped path is
/// `e_g · u(X)`, and `|u| ≤ max |U_l|`, which gives the reported bound.
pub fn solve_cem(
    x: Vec2,
    electrodes: &ElectrodeConfig,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<EstimatorResult> {
    params.validate()?;
    check_paths(n_paths)?;
    let rate = |p: &BoundaryPoint| electrodes.rate(p);
    let rows = map_paths(n_paths, params.workers, |i| {
        let mut acc = 0.0;
        let mut obs = |e: &StepEvent<'_>| {
            if let Some(b) = &e.boundary {
                acc += e.discount_before * discounted_mass(electrodes.source(b), electrodes.rate(b), e.delta_local_time);
            }
            Flow::Continue
        };
        let end = simulate_path(x, field, domain, params, &rate, &mut obs, &mut PathRng::increments(params.seed, i))?;
        Ok((acc, end.time, end.discount))
    })?;
    let umax = electrodes.voltages().iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let remaining = RunningStats::from_samples(&rows.iter().map(|r| r.2).collect::<Vec<_>>()).mean();
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    Ok(EstimatorResult::from_rows(&pairs, Some(umax * remaining)))
}

/// `∫₀^{ΔL} f e^{-g l} dl`.
fn discounted_mass(f: f64, g: f64, dl: f64) -> f64 {
    if f == 0.0 {
        0.0
    } else if g * dl < 1e-12 {
        f * dl
    } else {
        f * (1.0 - (-g * dl).exp()) / g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Estimates `E_x[u(X_t) - u(x) - ∫₀ᵗ g u dL + ∫₀ᵗ f dL]` on `t_grid`, all
/// times sharing the same paths. Zero for the true electrode-model solution.
#[allow(clippy::too_many_arguments)]
pub fn martingale_residual<U>(
    x: Vec2,
    u: &U,
    electrodes: &ElectrodeConfig,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    t_grid: &[f64],
    n_paths: usize,
) -> Result<Vec<ResidualPoint>>
where
    U: Fn(Vec2) -> f64 + Sync + ?Sized,
{
    check_paths(n_paths)?;
    let mut grid = t_grid.to_vec();
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("time grid must be positive and increasing".into()));
    }
    let last = *grid.last().unwrap_or(&0.0);
    let p = SimulationParams { max_time: last, kill_threshold: 0.0, ..params.clone() };
    p.validate()?;
    let u0 = u(x);
    let rows = map_paths(n_paths, p.workers, |i| {
        let mut out = Vec::with_capacity(grid.len());
        let mut integral = 0.0;
        let mut obs = |e: &StepEvent<'_>| {
            if let Some(b) = &e.boundary {
                integral += (electrodes.source(b) - electrodes.rate(b) * u(b.position)) * e.delta_local_time;
            }
            while out.len() < grid.len() && e.state.time >= grid[out.len()] - 0.5 * e.dt {
                out.push(u(e.state.position) - u0 + integral);
            }
            Flow::Continue
        };
        simulate_path(x, field, domain, &p, &|_: &BoundaryPoint| 0.0, &mut obs, &mut PathRng::increments(p.seed, i))?;
        Ok(out)
    })?;
    grid.truncate(rows.iter().map(Vec::len).min().unwrap_or(0));
    Ok(grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let s = RunningStats::from_samples(&col);
            ResidualPoint { t, mean: s.mean(), stderr: s.stderr() }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OccupationReport {
    /// Uniform-start mean of `∫₀ᵗ φ dL`.
    pub value: f64,
    pub stderr: f64,
    /// `t ∫ φ dσ / |D|`.
    pub reference: f64,
    pub z_score: f64,
}

/// Compares the uniform-start mean of `∫₀ᵗ φ dL` with `t ∫ φ dσ / |D|`.
///
/// The uniform law is invariant for the reflected diffusion, so the
/// reference holds at every t with no transient term.
pub fn occupation_check(
    phi: &BoundaryFunction,
    t: f64,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<OccupationReport> {
    check_paths(n_paths)?;
    phi.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("occupation time must be positive, got {t}")));
    }
    let p = SimulationParams { max_time: t, kill_threshold: 0.0, ..params.clone() };
    p.validate()?;
    let f = phi.on(domain);
    let values = map_paths(n_paths, p.workers, |i| {
        let start = domain.sample_interior(&mut PathRng::new(p.seed, i, StreamPurpose::Starts));
        let mut acc = 0.0;
        let mut obs = |e: &StepEvent<'_>| {
            if let Some(b) = &e.boundary {
                acc += f(b) * e.delta_local_time;
            }
            Flow::Continue
        };
        simulate_path(start, field, domain, &p, &|_: &BoundaryPoint| 0.0, &mut obs, &mut PathRng::increments(p.seed, i))?;
        Ok(acc)
    })?;
    let s = RunningStats::from_samples(&values);
    let reference = t * phi.integral(domain) / domain.area();
    let diff = s.mean() - reference;
    let z_score = if s.stderr() > 0.0 {
        diff / s.stderr()
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(OccupationReport { value: s.mean(), stderr: s.stderr(), reference, z_score })
}

/// Final states of reflected paths from `x` without any functional.
pub fn local_time_at(
    x: Vec2,
    t: f64,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<RunningStats> {
    let p = SimulationParams { max_time: t, kill_threshold: 0.0, ..params.clone() };
    p.validate()?;
    let values = map_paths(n_paths, p.workers, |i| {
        let end = simulate_path(x, field, domain, &p, &|_: &BoundaryPoint| 0.0, &mut NoObserver, &mut PathRng::increments(p.seed, i))?;
        Ok(end.local_time)
    })?;
    Ok(RunningStats::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Electrode;
    use std::f64::consts::PI;

    fn disk_setup() -> (DomainGeometry, ConductivityField, SimulationParams) {
        let disk = DomainGeometry::unit_disk();
        let params = SimulationParams { dt: 1e-3, seed: 11, ..SimulationParams::for_domain(&disk) };
        (disk, ConductivityField::identity(), params)
    }

    fn halves(disk: &DomainGeometry, u: [f64; 2]) -> ElectrodeConfig {
        let e = vec![Electrode { start: 0.0, end: PI }, Electrode { start: PI, end: 2.0 * PI }];
        ElectrodeConfig::new(e, u.to_vec(), 1.0, disk).unwrap()
    }

    #[test]
    fn constant_dirichlet_data_is_exact() {
        let (disk, id, params) = disk_setup();
        let r = solve_dirichlet(Vec2::new(0.3, 0.1), &|_: &BoundaryPoint| 0.7, &id, &disk, &params, 50).unwrap();
        assert_eq!(r.mean, 0.7);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn boundary_start_returns_boundary_value() {
        let (disk, id, params) = disk_setup();
        let cos = BoundaryFunction::cos(1);
        let x = Vec2::from_polar(1.0, 0.4);
        let r = solve_dirichlet(x, &cos.on(&disk), &id, &disk, &params, 10).unwrap();
        assert!((r.mean - 0.4f64.cos()).abs() < 1e-12);
        assert_eq!(r.horizon_used, 0.0);
    }

    #[test]
    fn dirichlet_shift_covariance() {
        let (disk, id, params) = disk_setup();
        let cos = BoundaryFunction::cos(1);
        let f = cos.on(&disk);
        let x = Vec2::new(0.2, -0.3);
        let a = solve_dirichlet(x, &f, &id, &disk, &params, 200).unwrap();
        let b = solve_dirichlet(x, &|p: &BoundaryPoint| f(p) + 2.5, &id, &disk, &params, 200).unwrap();
        assert!((b.mean - a.mean - 2.5).abs() < 1e-12);
        assert!((b.stderr - a.stderr).abs() < 1e-12);
    }

    #[test]
    fn zero_neumann_data_gives_zero() {
        let (disk, id, params) = disk_setup();
        let data = NeumannData::new(BoundaryFunction::constant(0.0), &disk).unwrap();
        let r = solve_continuum(Vec2::new(0.5, 0.0), &data, &id, &disk, &params, 20, &ContinuumHorizon::new(3.39)).unwrap();
        assert_eq!(r.mean, 0.0);
        assert!(r.truncation_tail_bound.unwrap() <= 0.005 + 1e-12);
    }

    #[test]
    fn continuum_requires_collar() {
        let (disk, _, params) = disk_setup();
        let k = ConductivityField::constant(crate::linalg::SymMat2::scalar(2.0), 3.0).unwrap();
        let data = NeumannData::new(BoundaryFunction::cos(1), &disk).unwrap();
        let r = solve_continuum(Vec2::ZERO, &data, &k, &disk, &params, 20, &ContinuumHorizon::new(3.39));
        assert_eq!(r, Err(Error::MissingCollar));
    }

    #[test]
    fn horizon_rule() {
        let h = ContinuumHorizon::new(3.39);
        assert!((h.horizon() - (0.5 + 200f64.ln() / 3.39)).abs() < 1e-12);
        assert!((h.tail_bound() - 0.005).abs() < 1e-12);
    }

    #[test]
    fn grounded_electrodes_give_zero() {
        let (disk, id, params) = disk_setup();
        let cfg = halves(&disk, [0.0, 0.0]);
        let r = solve_cem(Vec2::new(0.1, 0.2), &cfg, &id, &disk, &params, 20).unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn full_boundary_electrode_gives_constant() {
        let (disk, id, params) = disk_setup();
        let cfg = ElectrodeConfig::without_grounding(vec![Electrode { start: 0.0, end: 2.0 * PI }], vec![1.0], 0.5, &disk)
            .unwrap();
        let r = solve_cem(Vec2::new(0.4, 0.1), &cfg, &id, &disk, &params, 200).unwrap();
        // each path contributes 1 - e_g(end) exactly
        assert!((r.mean - 1.0).abs() < 1e-5, "{r:?}");
        assert!(r.truncation_tail_bound.unwrap() < 1e-5);
    }

    #[test]
    fn cem_linearity_in_voltages() {
        let (disk, id, params) = disk_setup();
        let cfg = halves(&disk, [1.0, -1.0]);
        let x = Vec2::new(0.3, 0.4);
        let a = solve_cem(x, &cfg, &id, &disk, &params, 100).unwrap();
        let b = solve_cem(x, &cfg.with_scaled_voltages(-2.5), &id, &disk, &params, 100).unwrap();
        assert!((b.mean + 2.5 * a.mean).abs() < 1e-12);
    }

    #[test]
    fn constant_candidate_without_data_has_zero_residual() {
        let (disk, id, params) = disk_setup();
        let cfg = halves(&disk, [0.0, 0.0]);
        // g is nonzero here, so use a grounded layout with vanishing voltages
        // and a zero candidate; then also check a constant with no electrodes
        let r = martingale_residual(Vec2::new(0.5, 0.0), &|_: Vec2| 0.0, &cfg, &id, &disk, &params, &[0.1, 0.2], 20).unwrap();
        assert!(r.iter().all(|p| p.mean == 0.0 && p.stderr == 0.0));
        let none = ElectrodeConfig::without_grounding(Vec::new(), Vec::new(), 1.0, &disk).unwrap();
        let r = martingale_residual(Vec2::new(0.5, 0.0), &|_: Vec2| 3.0, &none, &id, &disk, &params, &[0.1, 0.2], 20).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|p| p.mean == 0.0 && p.stderr == 0.0));
    }

    #[test]
    fn occupation_of_zero_time_limit_and_symmetry() {
        let (disk, id, params) = disk_setup();
        let r = occupation_check(&BoundaryFunction::cos(1), 0.5, &id, &disk, &params, 2000).unwrap();
        assert_eq!(r.reference, 0.0);
        assert!(r.z_score.abs() < 4.0, "{r:?}");
        let r = occupation_check(&BoundaryFunction::constant(1.0), 0.005, &id, &disk, &params, 200).unwrap();
        assert!(r.value < 0.05);
    }
}
