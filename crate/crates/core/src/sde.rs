//! Reflected Euler-Maruyama path engine with boundary local time.
//!
//! One step proposes `y = x + a(x) dt + B(x) ΔW`. A proposal outside the
//! domain is projected to `p` on ∂D and mirrored back along the conormal
//! `κ(p)ν` to the same depth `δ` it overshot by. The overshoot feeds the
//! local time, `ΔL = ρ δ / (ν·κ(p)ν)`, and the multiplicative functional
//! `e_g` is updated with the exact factor `exp(-g(p) ΔL)`.
//!
//! For a flat boundary and constant κ the mirrored chain has exactly the law
//! of the reflected diffusion at the grid times, and the total push equals the
//! Skorohod regulator. Since the push per crossing is `2δ` and the regulator
//! is `(ν·κν) L`, the analytic constant is `ρ₀ = 2`.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, DomainGeometry};
use crate::conductivity::ConductivityField;
use crate::linalg::{LowerTri2, SymMat2, Vec2};
use crate::rng::{PathRng, StreamPurpose};
use crate::stats::{map_paths, RunningStats};

/// Half-space value of the local-time calibration constant.
pub const HALF_SPACE_LOCAL_TIME_CONSTANT: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationParams {
    /// Time step; with `boundary_dt` set this is the largest step taken.
    pub dt: f64,
    /// Calibration factor ρ turning overshoot into local time.
    pub local_time_constant: f64,
    pub seed: u64,
    pub max_time: f64,
    /// Paths stop once the discount e_g drops below this value.
    pub kill_threshold: f64,
    /// Finest step near ∂D. When set, the step shrinks to
    /// `clamp(d² / (32 λ_max), boundary_dt, dt)` at distance d from ∂D.
    pub boundary_dt: Option<f64>,
    pub workers: usize,
}

impl SimulationParams {
    /// Defaults: `dt = 1e-4 · diameter²`, `ρ = ρ₀`, kill threshold 1e-6.
    pub fn for_domain(domain: &DomainGeometry) -> Self {
        let d = domain.diameter();
        Self {
            dt: 1e-4 * d * d,
            local_time_constant: HALF_SPACE_LOCAL_TIME_CONSTANT,
            seed: 0,
            max_time: 100.0 * d * d,
            kill_threshold: 1e-6,
            boundary_dt: None,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.local_time_constant > 0.0) {
            return bad(format!("local-time constant must be positive, got {}", self.local_time_constant));
        }
        if !(self.max_time > 0.0) {
            return bad(format!("max_time must be positive, got {}", self.max_time));
        }
        if !(self.kill_threshold >= 0.0 && self.kill_threshold < 1.0) {
            return bad(format!("kill threshold must lie in [0, 1), got {}", self.kill_threshold));
        }
        if let Some(b) = self.boundary_dt {
            if !(b > 0.0 && b <= self.dt) {
                return bad(format!("boundary_dt must lie in (0, dt], got {b}"));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathStatus {
    Alive,
    Absorbed { exit: BoundaryPoint, time: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathState {
    pub position: Vec2,
    pub time: f64,
    pub local_time: f64,
    /// e_g(t) = exp(-∫ g dL)
    pub discount: f64,
    pub status: PathStatus,
    pub steps: u64,
}

impl PathState {
    pub fn start(position: Vec2) -> Self {
        Self { position, time: 0.0, local_time: 0.0, discount: 1.0, status: PathStatus::Alive, steps: 0 }
    }
}

/// What an observer sees after each step.
#[derive(Clone, Copy, Debug)]
pub struct StepEvent<'a> {
    pub state: &'a PathState,
    pub delta_local_time: f64,
    /// Boundary point where the step was reflected, if it was.
    pub boundary: Option<BoundaryPoint>,
    pub discount_before: f64,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

pub trait PathObserver {
    fn observe(&mut self, event: &StepEvent<'_>) -> Flow;
}

impl<F: FnMut(&StepEvent<'_>) -> Flow> PathObserver for F {
    fn observe(&mut self, event: &StepEvent<'_>) -> Flow {
        self(event)
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl PathObserver for NoObserver {
    fn observe(&mut self, _: &StepEvent<'_>) -> Flow {
        Flow::Continue
    }
}

impl<A: PathObserver, B: PathObserver> PathObserver for (A, B) {
    fn observe(&mut self, event: &StepEvent<'_>) -> Flow {
        let a = self.0.observe(event);
        let b = self.1.observe(event);
        if a == Flow::Stop || b == Flow::Stop {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }
}

/// Result of one reflected step.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub state: PathState,
    pub delta_local_time: f64,
    pub boundary: Option<BoundaryPoint>,
}

/// Coefficients seen by the stepper; constant fields are factored once.
#[derive(Clone, Copy)]
enum Coefficients<'a> {
    Frozen { kappa: SymMat2, factor: LowerTri2 },
    Variable(&'a ConductivityField),
}

impl<'a> Coefficients<'a> {
    fn new(field: &'a ConductivityField) -> Result<Self> {
        if field.is_constant() {
            let at = Vec2::ZERO;
            Ok(Coefficients::Frozen { kappa: field.evaluate(at)?, factor: field.diffusion_factor(at)? })
        } else {
            Ok(Coefficients::Variable(field))
        }
    }

    fn kappa(&self, x: Vec2) -> Result<SymMat2> {
        match self {
            Coefficients::Frozen { kappa, .. } => Ok(*kappa),
            Coefficients::Variable(f) => f.evaluate(x),
        }
    }

    fn proposal(&self, x: Vec2, dt: f64, noise: (f64, f64)) -> Result<Vec2> {
        let sq = dt.sqrt();
        let dw = Vec2::new(noise.0 * sq, noise.1 * sq);
        match self {
            Coefficients::Frozen { factor, .. } => Ok(x + factor.apply(dw)),
            Coefficients::Variable(f) => Ok(x + f.drift(x) * dt + f.diffusion_factor(x)?.apply(dw)),
        }
    }
}

/// Mirror an exterior point back through its projection along the conormal.
fn reflect(
    y: Vec2,
    coef: &Coefficients<'_>,
    domain: &DomainGeometry,
    rho: f64,
) -> Result<(Vec2, f64, BoundaryPoint)> {
    let p = domain.project_to_boundary(y)?;
    let overshoot = domain.signed_distance(y);
    let nu = p.outward_normal;
    let k_nu = coef.kappa(p.position)?.apply(nu);
    let normal_part = nu.dot(k_nu);
    let conormal = k_nu * (1.0 / k_nu.norm());
    let inward = overshoot / conormal.dot(nu);
    Ok((p.position - conormal * inward, rho * overshoot / normal_part, p))
}

/// One Euler step with conormal reflection. `rate` is the boundary function g
/// of the discount.
pub fn step<G>(
    state: &PathState,
    field: &ConductivityField,
    domain: &DomainGeometry,
    dt: f64,
    noise: (f64, f64),
    rho: f64,
    rate: &G,
) -> Result<StepOutcome>
where
    G: Fn(&BoundaryPoint) -> f64 + ?Sized,
{
    step_with(state, &Coefficients::Variable(field), domain, dt, noise, rho, rate)
}

fn step_with<G>(
    state: &PathState,
    coef: &Coefficients<'_>,
    domain: &DomainGeometry,
    dt: f64,
    noise: (f64, f64),
    rho: f64,
    rate: &G,
) -> Result<StepOutcome>
where
    G: Fn(&BoundaryPoint) -> f64 + ?Sized,
{
    let y = coef.proposal(state.position, dt, noise)?;
    let tol = domain.tolerance();

    let mut next = *state;
    next.time += dt;
    next.steps += 1;

    if domain.signed_distance(y) <= tol {
        next.position = y;
        return Ok(StepOutcome { state: next, delta_local_time: 0.0, boundary: None });
    }

    let (mut z, mut dl, p) = reflect(y, coef, domain, rho)?;
    if domain.signed_distance(z) > tol {
        let (z2, dl2, _) = reflect(z, coef, domain, rho)?;
        if domain.signed_distance(z2) > tol {
            return Err(Error::StuckAtCorner(z2));
        }
        z = z2;
        dl += dl2;
    }
    next.position = z;
    next.local_time += dl;
    next.discount *= (-rate(&p) * dl).exp();
    Ok(StepOutcome { state: next, delta_local_time: dl, boundary: Some(p) })
}

/// Step size at `x`, refined near the boundary when `boundary_dt` is set.
pub fn effective_dt(params: &SimulationParams, field: &ConductivityField, domain: &DomainGeometry, x: Vec2) -> Result<f64> {
    adaptive_dt(params, &Coefficients::Variable(field), domain, x)
}

fn adaptive_dt(params: &SimulationParams, coef: &Coefficients<'_>, domain: &DomainGeometry, x: Vec2) -> Result<f64> {
    match params.boundary_dt {
        None => Ok(params.dt),
        Some(fine) => {
            let d = -domain.signed_distance(x);
            let (_, lambda) = coef.kappa(x)?.eigenvalues();
            Ok((d * d / (32.0 * lambda)).clamp(fine, params.dt))
        }
    }
}

fn check_start(domain: &DomainGeometry, start: Vec2) -> Result<()> {
    if domain.signed_distance(start) > domain.tolerance() {
        return Err(Error::InvalidParameter(format!("start ({}, {}) lies outside the domain", start.x, start.y)));
    }
    Ok(())
}

/// Simulates a reflected path until `max_time`, until the discount falls
/// below the kill threshold, or until the observer stops it.
pub fn simulate_path<G, O>(
    start: Vec2,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    rate: &G,
    observer: &mut O,
    rng: &mut PathRng,
) -> Result<PathState>
where
    G: Fn(&BoundaryPoint) -> f64 + ?Sized,
    O: PathObserver + ?Sized,
{
    check_start(domain, start)?;
    let coef = Coefficients::new(field)?;
    let mut state = PathState::start(start);
    let horizon = params.max_time * (1.0 - 1e-12);
    while state.time < horizon && state.discount >= params.kill_threshold {
        let dt = adaptive_dt(params, &coef, domain, state.position)?;
        let noise = rng.gaussian_pair();
        let before = state.discount;
        let out = step_with(&state, &coef, domain, dt, noise, params.local_time_constant, rate)?;
        state = out.state;
        let event = StepEvent {
            state: &state,
            delta_local_time: out.delta_local_time,
            boundary: out.boundary,
            discount_before: before,
            dt,
        };
        if observer.observe(&event) == Flow::Stop {
            break;
        }
    }
    Ok(state)
}

/// First exit of the unreflected Euler chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitRecord {
    pub time: f64,
    pub exit: BoundaryPoint,
    /// The exterior proposal that ended the path (equals the exit point for
    /// boundary starts).
    pub crossing: Vec2,
}

/// Runs the Euler chain without reflection until a proposal leaves the
/// closed domain; the exit point is that proposal's projection.
pub fn first_exit(
    start: Vec2,
    field: &ConductivityField,
    domain: &DomainGeometry,
    params: &SimulationParams,
    rng: &mut PathRng,
) -> Result<ExitRecord> {
    check_start(domain, start)?;
    let tol = domain.tolerance();
    if domain.signed_distance(start) >= -tol {
        let p = domain.project_to_boundary(start)?;
        return Ok(ExitRecord { time: 0.0, exit: p, crossing: start });
    }
    let coef = Coefficients::new(field)?;
    let mut x = start;
    let mut t = 0.0;
    loop {
        if t >= params.max_time {
            return Err(Error::HorizonExceeded(params.max_time));
        }
        let dt = adaptive_dt(params, &coef, domain, x)?;
        let y = coef.proposal(x, dt, rng.gaussian_pair())?;
        t += dt;
        if domain.signed_distance(y) >= -tol {
            let p = domain.project_to_boundary(y)?;
            return Ok(ExitRecord { time: t, exit: p, crossing: y });
        }
        x = y;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    /// Fitted constant ρ.
    pub rho: f64,
    /// Half-space analytic constant ρ₀.
    pub rho_analytic: f64,
    /// Mean raw overshoot functional Σ δ/(ν·κν) at t = 1 under uniform starts.
    pub raw_mean: f64,
    pub raw_stderr: f64,
    /// Stationary target σ(∂D)/|D|.
    pub target: f64,
    pub n_paths: usize,
}

/// Fits ρ so that the uniform-start mean local time at t = 1 equals
/// σ(∂D)/|D|, the stationary value of the occupation formula.
pub fn calibrate_local_time(
    domain: &DomainGeometry,
    field: &ConductivityField,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<Calibration> {
    let admissible = field.identity_at_boundary()
        || matches!(field.kind(), crate::conductivity::FieldKind::Constant { matrix } if matrix.is_isotropic());
    if !admissible {
        return Err(Error::UnsupportedField(
            "calibration needs an identity collar or a constant isotropic field".into(),
        ));
    }
    let raw = SimulationParams { local_time_constant: 1.0, max_time: 1.0, kill_threshold: 0.0, ..params.clone() };
    let stats = uniform_local_time(domain, field, &raw, n_paths)?;
    let target = domain.boundary_measure() / domain.area();
    let rho = target / stats.mean();
    let cal = Calibration {
        rho,
        rho_analytic: HALF_SPACE_LOCAL_TIME_CONSTANT,
        raw_mean: stats.mean(),
        raw_stderr: stats.stderr(),
        target,
        n_paths,
    };
    if (rho - cal.rho_analytic).abs() > 0.2 * cal.rho_analytic {
        return Err(Error::CalibrationDiverged { fitted: rho, analytic: cal.rho_analytic });
    }
    Ok(cal)
}

/// Local time at `params.max_time` for uniformly distributed starts.
pub fn uniform_local_time(
    domain: &DomainGeometry,
    field: &ConductivityField,
    params: &SimulationParams,
    n_paths: usize,
) -> Result<RunningStats> {
    params.validate()?;
    let values = map_paths(n_paths, params.workers, |i| {
        let mut starts = PathRng::new(params.seed, i, StreamPurpose::Starts);
        let x = domain.sample_interior(&mut starts);
        let mut rng = PathRng::increments(params.seed, i);
        let end = simulate_path(x, field, domain, params, &|_: &BoundaryPoint| 0.0, &mut NoObserver, &mut rng)?;
        Ok(end.local_time)
    })?;
    Ok(RunningStats::from_samples(&values))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingReport {
    /// Predicted ratio L'/L = length / magnitude.
    pub factor: f64,
    /// max over paths and steps of |L'_k - factor · L_k|.
    pub max_deviation: f64,
    pub mean_final_local_time: f64,
    pub n_paths: usize,
}

/// Runs each path on D with κ and, with the same noise, on `length · D` with
/// `magnitude · κ(x / length)` and step `dt · length² / magnitude`. The
/// coupled path is `length · X`, so its local time is
/// `(length / magnitude) · L` step by step.
pub fn coupled_scaling(
    domain: &DomainGeometry,
    field: &ConductivityField,
    params: &SimulationParams,
    length: f64,
    magnitude: f64,
    n_paths: usize,
) -> Result<ScalingReport> {
    params.validate()?;
    if params.boundary_dt.is_some() {
        return Err(Error::InvalidParameter("scaling coupling needs a fixed step".into()));
    }
    let big = domain.scaled(length)?;
    let big_field = field.rescaled(length, magnitude)?;
    let time_factor = length * length / magnitude;
    let big_params = SimulationParams { dt: params.dt * time_factor, max_time: params.max_time * time_factor, ..params.clone() };
    let factor = length / magnitude;
    let zero = |_: &BoundaryPoint| 0.0;
    let rows = map_paths(n_paths, params.workers, |i| {
        let mut starts = PathRng::new(params.seed, i, StreamPurpose::Starts);
        let x = domain.sample_interior(&mut starts);
        let mut small_lt = Vec::new();
        let mut rec = |e: &StepEvent<'_>| {
            small_lt.push(e.state.local_time);
            Flow::Continue
        };
        simulate_path(x, field, domain, params, &zero, &mut rec, &mut PathRng::increments(params.seed, i))?;
        let mut k = 0;
        let mut dev: f64 = 0.0;
        let mut rec_big = |e: &StepEvent<'_>| {
            if let Some(l) = small_lt.get(k) {
                dev = dev.max((e.state.local_time - factor * l).abs());
            }
            k += 1;
            Flow::Continue
        };
        let end = simulate_path(
            x * length,
            &big_field,
            &big,
            &big_params,
            &zero,
            &mut rec_big,
            &mut PathRng::increments(params.seed, i),
        )?;
        if k != small_lt.len() {
            dev = f64::INFINITY;
        }
        Ok((dev, end.local_time / factor))
    })?;
    let max_deviation = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let finals: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(ScalingReport {
        factor,
        max_deviation,
        mean_final_local_time: RunningStats::from_samples(&finals).mean(),
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(_: &BoundaryPoint) -> f64 {
        0.0
    }

    #[test]
    fn interior_step_moves_to_proposal() {
        let disk = DomainGeometry::unit_disk();
        let id = ConductivityField::identity();
        let s = PathState::start(Vec2::new(0.1, 0.2));
        let dt: f64 = 1e-4;
        let out = step(&s, &id, &disk, dt, (0.5, -1.0), 2.0, &zero).unwrap();
        let sq = (2.0 * dt).sqrt();
        assert!((out.state.position - Vec2::new(0.1 + 0.5 * sq, 0.2 - sq)).norm() < 1e-15);
        assert_eq!(out.delta_local_time, 0.0);
        assert!(out.boundary.is_none());
    }

    #[test]
    fn radial_reflection_example() {
        // proposal (1.1, 0) from (1, 0) with dt = 1 and noise chosen so that B ΔW = (0.1, 0)
        let disk = DomainGeometry::unit_disk();
        let id = ConductivityField::identity();
        let s = PathState::start(Vec2::new(1.0, 0.0));
        let z = 0.1 / 2f64.sqrt();
        let out = step(&s, &id, &disk, 1.0, (z, 0.0), 2.0, &|_: &BoundaryPoint| 3.0).unwrap();
        assert!((out.state.position - Vec2::new(0.9, 0.0)).norm() < 1e-14);
        assert!((out.delta_local_time - 0.2).abs() < 1e-14);
        assert!((out.state.discount - (-0.6f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn conormal_reflection_keeps_depth() {
        let sq = DomainGeometry::unit_square();
        let k = ConductivityField::constant(SymMat2::new(1.0, 0.5, 1.0), 2.0).unwrap();
        let (z, dl, p) = reflect(Vec2::new(0.5, 1.1), &Coefficients::new(&k).unwrap(), &sq, 1.0).unwrap();
        assert!((z.y - 0.9).abs() < 1e-14);
        // conormal κν = (0.5, 1) pushes sideways as well
        assert!((z.x - 0.45).abs() < 1e-14);
        assert!((dl - 0.1).abs() < 1e-14);
        assert_eq!(p.outward_normal, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn paths_stay_in_closure() {
        let sq = DomainGeometry::unit_square();
        let id = ConductivityField::identity();
        let params = SimulationParams { dt: 1e-3, max_time: 1.0, ..SimulationParams::for_domain(&sq) };
        for i in 0..50 {
            let mut last_l = 0.0;
            let mut check = |e: &StepEvent<'_>| {
                assert!(sq.signed_distance(e.state.position) <= sq.tolerance());
                assert!(e.state.local_time >= last_l);
                if e.boundary.is_none() {
                    assert_eq!(e.delta_local_time, 0.0);
                }
                last_l = e.state.local_time;
                Flow::Continue
            };
            simulate_path(Vec2::new(0.05, 0.95), &id, &sq, &params, &zero, &mut check, &mut PathRng::increments(3, i))
                .unwrap();
        }
    }

    #[test]
    fn zero_rate_keeps_discount() {
        let disk = DomainGeometry::unit_disk();
        let id = ConductivityField::identity();
        let params = SimulationParams { dt: 1e-3, max_time: 2.0, ..SimulationParams::for_domain(&disk) };
        let end = simulate_path(Vec2::new(0.9, 0.0), &id, &disk, &params, &zero, &mut NoObserver, &mut PathRng::increments(1, 0))
            .unwrap();
        assert_eq!(end.discount, 1.0);
        assert!(end.local_time > 0.0);
    }

    #[test]
    fn boundary_start_exits_immediately() {
        let disk = DomainGeometry::unit_disk();
        let id = ConductivityField::identity();
        let params = SimulationParams::for_domain(&disk);
        let start = Vec2::from_polar(1.0, 0.3);
        let e = first_exit(start, &id, &disk, &params, &mut PathRng::increments(0, 0)).unwrap();
        assert_eq!(e.time, 0.0);
        assert!((e.exit.position - start).norm() < 1e-15);
    }

    #[test]
    fn horizon_is_reported() {
        let disk = DomainGeometry::unit_disk();
        let id = ConductivityField::identity();
        let params = SimulationParams { dt: 1e-4, max_time: 1e-3, ..SimulationParams::for_domain(&disk) };
        let e = first_exit(Vec2::ZERO, &id, &disk, &params, &mut PathRng::increments(0, 0));
        assert!(matches!(e, Err(Error::HorizonExceeded(_))));
    }

    #[test]
    fn adaptive_step_is_clamped() {
        let disk = DomainGeometry::unit_disk();
        let id = ConductivityField::identity();
        let params = SimulationParams { dt: 1e-4, boundary_dt: Some(1e-8), ..SimulationParams::for_domain(&disk) };
        assert_eq!(effective_dt(&params, &id, &disk, Vec2::ZERO).unwrap(), 1e-4);
        assert_eq!(effective_dt(&params, &id, &disk, Vec2::new(1.0, 0.0)).unwrap(), 1e-8);
        let mid = effective_dt(&params, &id, &disk, Vec2::new(0.99, 0.0)).unwrap();
        assert!((mid - 1e-4 / 32.0).abs() < 1e-12);
    }

    #[test]
    fn half_line_reflection_matches_reflected_brownian_motion() {
        // Flat boundary {x = 0} of a large square, far from corners: after n
        // steps the mirrored chain started on the face should be |√2 W_t|.
        let dom = DomainGeometry::rectangle(Vec2::new(0.0, -50.0), Vec2::new(100.0, 50.0)).unwrap();
        let id = ConductivityField::identity();
        let params = SimulationParams { dt: 0.01, max_time: 1.0, ..SimulationParams::for_domain(&dom) };
        let n = 10_000;
        let mut ends: Vec<f64> = (0..n)
            .map(|i| {
                simulate_path(Vec2::new(0.0, 0.0), &id, &dom, &params, &zero, &mut NoObserver, &mut PathRng::increments(5, i))
                    .unwrap()
                    .position
                    .x
            })
            .collect();
        ends.sort_by(f64::total_cmp);
        // oracle CDF of |√2 W_1|: erf(x / 2)
        let cdf = |x: f64| erf(x / 2.0);
        let d = ends
            .iter()
            .enumerate()
            .map(|(i, &x)| (cdf(x) - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf(x)).abs()))
            .fold(0.0, f64::max);
        assert!(d * (n as f64).sqrt() < 1.63, "KS distance {d}");
    }

    /// Abramowitz-Stegun 7.1.26 is too coarse for a KS test; use a series.
    fn erf(x: f64) -> f64 {
        let mut sum: f64 = 0.0;
        let mut term = x;
        let mut k = 0;
        while term.abs() > 1e-17 * sum.abs().max(1e-300) || k < 3 {
            sum += term / (2 * k + 1) as f64;
            k += 1;
            term *= -x * x / k as f64;
            if k > 200 {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-14);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-14);
    }

    #[test]
    fn scaling_coupling_same_time_variant() {
        // Shrinking D by 2 and dividing κ by 4 keeps the clock: L' = 2L.
        let disk = DomainGeometry::disk(Vec2::ZERO, 2.0).unwrap();
        let id = ConductivityField::identity();
        let params = SimulationParams { dt: 4e-4, max_time: 0.4, seed: 9, ..SimulationParams::for_domain(&disk) };
        let r = coupled_scaling(&disk, &id, &params, 0.5, 0.25, 50).unwrap();
        assert_eq!(r.factor, 2.0);
        assert!(r.max_deviation < 1e-10, "{r:?}");
        assert!(r.mean_final_local_time > 0.0);
    }
}
