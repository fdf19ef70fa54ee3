//! Cell-centered finite volumes for `∇·(κ∇u) = 0` on rectangles (Cartesian
//! grid) and disks (polar grid with a central cell).
//!
//! Fluxes use two-point transmissibilities, which amount to harmonic
//! averaging of κ across faces. Boundary faces sit exactly on ∂D.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use crate::boundary_data::BoundaryFunction;
use crate::conductivity::ConductivityField;
use crate::error::{Error, Result};
use crate::geometry::{DomainGeometry, ElectrodeConfig, Shape};
use crate::linalg::Vec2;

/// Isotropic conductivity as seen by the grid solver.
pub trait ScalarConductivity: Sync {
    fn scalar_at(&self, x: Vec2) -> Result<f64>;
}

impl ScalarConductivity for ConductivityField {
    fn scalar_at(&self, x: Vec2) -> Result<f64> {
        self.isotropic_value(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub center: Vec2,
    pub radius: f64,
    pub value: f64,
}

/// Disk-shaped inclusions of constant conductivity in a constant background.
/// Later inclusions win where they overlap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantField {
    pub background: f64,
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
}

impl ScalarConductivity for PiecewiseConstantField {
    fn scalar_at(&self, x: Vec2) -> Result<f64> {
        let v = self
            .inclusions
            .iter()
            .rev()
            .find(|i| (x - i.center).norm() < i.radius)
            .map_or(self.background, |i| i.value);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("conductivity must be positive, got {v}")));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleProblem {
    /// `u = φ` on ∂D.
    Dirichlet(BoundaryFunction),
    /// `κ ∂_ν u = f` on ∂D, zero-mean solution.
    Continuum(BoundaryFunction),
    /// `κ ∂_ν u + g u = f` with f, g induced by the electrodes.
    Cem(ElectrodeConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    /// Cell centers `lo + (i + ½) h`.
    Rect { lo: Vec2, hi: Vec2, nx: usize, ny: usize },
    /// Cell 0 is a central disk of radius Δr/2; ring `i` has center radius
    /// `(i + 1) Δr` and `ntheta` cells centered at `(j + ½) Δθ`.
    Polar { center: Vec2, radius: f64, nr: usize, ntheta: usize },
}

impl GridSpec {
    pub fn for_domain(domain: &DomainGeometry, resolution: usize) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::InvalidParameter(format!("grid resolution {resolution} is too small")));
        }
        match *domain.shape() {
            Shape::Rectangle { lo, hi } => Ok(GridSpec::Rect { lo, hi, nx: resolution, ny: resolution }),
            Shape::Disk { center, radius } => Ok(GridSpec::Polar { center, radius, nr: resolution, ntheta: 4 * resolution }),
            Shape::Polygon { .. } => Err(Error::InvalidDomain("the grid solver handles rectangles and disks only".into())),
        }
    }

    pub fn n_cells(&self) -> usize {
        match *self {
            GridSpec::Rect { nx, ny, .. } => nx * ny,
            GridSpec::Polar { nr, ntheta, .. } => 1 + nr * ntheta,
        }
    }

    fn dr(&self) -> f64 {
        match *self {
            GridSpec::Polar { radius, nr, .. } => radius / (nr as f64 + 0.5),
            GridSpec::Rect { .. } => unreachable!(),
        }
    }

    /// Cell centers in storage order.
    pub fn centers(&self) -> Vec<Vec2> {
        match *self {
            GridSpec::Rect { lo, hi, nx, ny } => {
                let h = Vec2::new((hi.x - lo.x) / nx as f64, (hi.y - lo.y) / ny as f64);
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        out.push(Vec2::new(lo.x + (i as f64 + 0.5) * h.x, lo.y + (j as f64 + 0.5) * h.y));
                    }
                }
                out
            }
            GridSpec::Polar { center, nr, ntheta, .. } => {
                let dr = self.dr();
                let dt = TAU / ntheta as f64;
                let mut out = Vec::with_capacity(1 + nr * ntheta);
                out.push(center);
                for i in 0..nr {
                    for j in 0..ntheta {
                        out.push(center + Vec2::from_polar((i + 1) as f64 * dr, (j as f64 + 0.5) * dt));
                    }
                }
                out
            }
        }
    }

    /// Cell areas in storage order.
    pub fn areas(&self) -> Vec<f64> {
        match *self {
            GridSpec::Rect { lo, hi, nx, ny } => vec![(hi.x - lo.x) * (hi.y - lo.y) / (nx * ny) as f64; nx * ny],
            GridSpec::Polar { nr, ntheta, .. } => {
                let dr = self.dr();
                let dt = TAU / ntheta as f64;
                let mut out = vec![std::f64::consts::PI * dr * dr / 4.0];
                for i in 0..nr {
                    let a = (i + 1) as f64 * dr * dr * dt;
                    out.extend(std::iter::repeat(a).take(ntheta));
                }
                out
            }
        }
    }
}

/// Face on ∂D: owning cell, length, center-to-face distance and the arc
/// parameter range it covers.
#[derive(Clone, Copy, Debug)]
struct BoundaryFace {
    cell: usize,
    length: f64,
    distance: f64,
    s0: f64,
    s1: f64,
}

struct Assembly {
    matrix: Csr,
    boundary: Vec<BoundaryFace>,
    kappa: Vec<f64>,
}

/// Compressed sparse rows.
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals }
    }

    fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }

    fn add_diagonal(&mut self, i: usize, v: f64) {
        let k = (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&k| self.cols[k] == i).expect("diagonal entry");
        self.vals[k] += v;
    }
}

fn add_link(rows: &mut [Vec<(usize, f64)>], a: usize, b: usize, t: f64) {
    rows[a].push((a, t));
    rows[a].push((b, -t));
    rows[b].push((b, t));
    rows[b].push((a, -t));
}

/// Interior operator `-∇·κ∇` with no-flux boundary faces.
fn assemble(grid: &GridSpec, kappa_field: &dyn ScalarConductivity) -> Result<Assembly> {
    let centers = grid.centers();
    let kappa: Vec<f64> = centers.iter().map(|&c| kappa_field.scalar_at(c)).collect::<Result<_>>()?;
    let n = grid.n_cells();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 0.0)]).collect();
    let mut boundary = Vec::new();
    match *grid {
        GridSpec::Rect { lo, hi, nx, ny } => {
            let hx = (hi.x - lo.x) / nx as f64;
            let hy = (hi.y - lo.y) / ny as f64;
            let (w, h) = (hi.x - lo.x, hi.y - lo.y);
            let id = |i: usize, j: usize| j * nx + i;
            for j in 0..ny {
                for i in 0..nx {
                    if i + 1 < nx {
                        let t = hy / (0.5 * hx / kappa[id(i, j)] + 0.5 * hx / kappa[id(i + 1, j)]);
                        add_link(&mut rows, id(i, j), id(i + 1, j), t);
                    }
                    if j + 1 < ny {
                        let t = hx / (0.5 * hy / kappa[id(i, j)] + 0.5 * hy / kappa[id(i, j + 1)]);
                        add_link(&mut rows, id(i, j), id(i, j + 1), t);
                    }
                }
            }
            // arc parameter runs counterclockwise from `lo`
            for i in 0..nx {
                let s = i as f64 * hx;
                boundary.push(BoundaryFace { cell: id(i, 0), length: hx, distance: 0.5 * hy, s0: s, s1: s + hx });
                let s = w + h + (nx - 1 - i) as f64 * hx;
                boundary.push(BoundaryFace { cell: id(i, ny - 1), length: hx, distance: 0.5 * hy, s0: s, s1: s + hx });
            }
            for j in 0..ny {
                let s = w + j as f64 * hy;
                boundary.push(BoundaryFace { cell: id(nx - 1, j), length: hy, distance: 0.5 * hx, s0: s, s1: s + hy });
                let s = 2.0 * w + h + (ny - 1 - j) as f64 * hy;
                boundary.push(BoundaryFace { cell: id(0, j), length: hy, distance: 0.5 * hx, s0: s, s1: s + hy });
            }
        }
        GridSpec::Polar { radius, nr, ntheta, .. } => {
            let dr = grid.dr();
            let dt = TAU / ntheta as f64;
            let id = |i: usize, j: usize| 1 + i * ntheta + j % ntheta;
            for j in 0..ntheta {
                // central disk to ring 0 through the arc at radius Δr/2
                let len = 0.5 * dr * dt;
                let t = len / (0.5 * dr / kappa[0] + 0.5 * dr / kappa[id(0, j)]);
                add_link(&mut rows, 0, id(0, j), t);
            }
            for i in 0..nr {
                let r = (i + 1) as f64 * dr;
                for j in 0..ntheta {
                    let half = 0.5 * r * dt;
                    let t = dr / (half / kappa[id(i, j)] + half / kappa[id(i, j + 1)]);
                    add_link(&mut rows, id(i, j), id(i, j + 1), t);
                    if i + 1 < nr {
                        let len = (r + 0.5 * dr) * dt;
                        let t = len / (0.5 * dr / kappa[id(i, j)] + 0.5 * dr / kappa[id(i + 1, j)]);
                        add_link(&mut rows, id(i, j), id(i + 1, j), t);
                    }
                }
            }
            for j in 0..ntheta {
                boundary.push(BoundaryFace {
                    cell: id(nr - 1, j),
                    length: radius * dt,
                    distance: 0.5 * dr,
                    s0: radius * j as f64 * dt,
                    s1: radius * (j + 1) as f64 * dt,
                });
            }
        }
    }
    Ok(Assembly { matrix: Csr::from_rows(rows), boundary, kappa })
}

/// `∫ f dσ` over the arc range of a face.
fn face_integral(f: &BoundaryFunction, domain: &DomainGeometry, s0: f64, s1: f64) -> f64 {
    let perimeter = domain.boundary_measure();
    if let BoundaryFunction::Piecewise { arcs, values } = f {
        let mut sum = 0.0;
        for (arc, v) in arcs.iter().zip(values) {
            for (a, b) in arc.pieces(perimeter) {
                for shift in [-perimeter, 0.0, perimeter] {
                    let overlap = (b + shift).min(s1) - (a + shift).max(s0);
                    if overlap > 0.0 {
                        sum += overlap * v;
                    }
                }
            }
        }
        return sum;
    }
    // three-point Gauss-Legendre in the arc parameter
    let (mid, half) = (0.5 * (s0 + s1), 0.5 * (s1 - s0));
    let node = (0.6f64).sqrt();
    [(-node, 5.0 / 9.0), (0.0, 8.0 / 9.0), (node, 5.0 / 9.0)]
        .iter()
        .map(|&(x, w)| w * f.evaluate(&domain.boundary_point_at(mid + half * x), perimeter))
        .sum::<f64>()
        * half
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients. For singular Neumann systems
/// the right-hand side and iterates are kept orthogonal to constants.
fn pcg(a: &Csr, b: &[f64], x: &mut [f64], singular: bool, tol: f64) -> Result<SolverReport> {
    let n = a.n();
    let project = |v: &mut [f64]| {
        if singular {
            let m = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= m);
        }
    };
    let mut rhs = b.to_vec();
    project(&mut rhs);
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolverReport { iterations: 0, relative_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut ax = vec![0.0; n];
    a.apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    project(&mut r);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let max_iter = 20 * n + 1000;
    for it in 0..max_iter {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol * bnorm {
            return Ok(SolverReport { iterations: it, relative_residual: rnorm / bnorm });
        }
        a.apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged { residual: rnorm / bnorm, iterations: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project(&mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(Error::SolverDiverged { residual: rnorm / bnorm, iterations: max_iter })
}

/// Relative residual reached by every grid solve.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Cell values of a grid solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Net flux through ∂D relative to the total absolute boundary flux.
    pub flux_residual: f64,
    pub solver: SolverReport,
}

/// Second-order finite-volume solve. `resolution` is the number of cells per
/// side (rectangles) or radial rings (disks, with four times as many angular
/// cells).
pub fn fd_solve(
    problem: &OracleProblem,
    domain: &DomainGeometry,
    kappa: &dyn ScalarConductivity,
    resolution: usize,
) -> Result<GridSolution> {
    let grid = GridSpec::for_domain(domain, resolution)?;
    let mut asm = assemble(&grid, kappa)?;
    let n = grid.n_cells();
    let mut rhs = vec![0.0; n];
    // boundary flux into the domain through each face as an affine function
    // of the owning cell value: flux = c0 - c1 * u_cell
    let mut flux_terms = Vec::with_capacity(asm.boundary.len());
    let singular = matches!(problem, OracleProblem::Continuum(_));
    match problem {
        OracleProblem::Continuum(f) => {
            f.validate()?;
            let integral = f.integral(domain);
            let tolerance = 1e-8 * domain.boundary_measure() * f.sup_norm(domain);
            if integral.abs() > tolerance {
                return Err(Error::CompatibilityViolation { integral, tolerance });
            }
            for face in &asm.boundary {
                let q = face_integral(f, domain, face.s0, face.s1);
                rhs[face.cell] += q;
                flux_terms.push((q, 0.0));
            }
        }
        OracleProblem::Dirichlet(phi) => {
            phi.validate()?;
            for face in &asm.boundary {
                let value = face_integral(phi, domain, face.s0, face.s1) / (face.s1 - face.s0);
                let c = asm.kappa[face.cell] * face.length / face.distance;
                asm.matrix.add_diagonal(face.cell, c);
                rhs[face.cell] += c * value;
                flux_terms.push((c * value, c));
            }
        }
        OracleProblem::Cem(cfg) => {
            for face in &asm.boundary {
                let (fi, gi) = cfg.integrate_over(face.s0, face.s1);
                let (fbar, gbar) = (fi / face.length, gi / face.length);
                let a = asm.kappa[face.cell] / face.distance;
                let w = face.length * a / (a + gbar);
                asm.matrix.add_diagonal(face.cell, w * gbar);
                rhs[face.cell] += w * fbar;
                flux_terms.push((w * fbar, w * gbar));
            }
        }
    }
    let mut values = vec![0.0; n];
    let solver = pcg(&asm.matrix, &rhs, &mut values, singular, SOLVER_TOLERANCE)?;
    if singular {
        let areas = grid.areas();
        let mean = values.iter().zip(&areas).map(|(v, a)| v * a).sum::<f64>() / areas.iter().sum::<f64>();
        values.iter_mut().for_each(|v| *v -= mean);
    }
    let (mut net, mut total) = (0.0, 0.0);
    for (face, (c0, c1)) in asm.boundary.iter().zip(&flux_terms) {
        let q = c0 - c1 * values[face.cell];
        net += q;
        total += q.abs();
    }
    let flux_residual = if total > 0.0 { net.abs() / total } else { 0.0 };
    Ok(GridSolution { grid, values, flux_residual, solver })
}

fn bracket(t: f64, n: usize) -> (usize, f64) {
    // lower index in 0..n-1 with linear weight, extrapolating past the ends
    let i = (t.floor().max(0.0) as usize).min(n - 2);
    (i, t - i as f64)
}

impl GridSolution {
    /// Piecewise-(bi)linear interpolation of the cell values, extrapolated
    /// linearly between the outermost cell centers and ∂D.
    pub fn interpolate(&self, x: Vec2) -> f64 {
        match self.grid {
            GridSpec::Rect { lo, hi, nx, ny } => {
                let hx = (hi.x - lo.x) / nx as f64;
                let hy = (hi.y - lo.y) / ny as f64;
                let (i, fx) = bracket((x.x - lo.x) / hx - 0.5, nx);
                let (j, fy) = bracket((x.y - lo.y) / hy - 0.5, ny);
                let v = |i: usize, j: usize| self.values[j * nx + i];
                (1.0 - fy) * ((1.0 - fx) * v(i, j) + fx * v(i + 1, j)) + fy * ((1.0 - fx) * v(i, j + 1) + fx * v(i + 1, j + 1))
            }
            GridSpec::Polar { center, nr, ntheta, .. } => {
                let dr = self.grid.dr();
                let dt = TAU / ntheta as f64;
                let d = x - center;
                let r = d.norm();
                let t = d.y.atan2(d.x).rem_euclid(TAU) / dt - 0.5;
                let j0 = t.floor();
                let ft = t - j0;
                let j0 = (j0 as i64).rem_euclid(ntheta as i64) as usize;
                let ring = |i: usize| {
                    let v = |j: usize| self.values[1 + i * ntheta + j % ntheta];
                    (1.0 - ft) * v(j0) + ft * v(j0 + 1)
                };
                if r < dr {
                    let w = r / dr;
                    (1.0 - w) * self.values[0] + w * ring(0)
                } else {
                    let (i, fr) = bracket(r / dr - 1.0, nr);
                    (1.0 - fr) * ring(i) + fr * ring(i + 1)
                }
            }
        }
    }

    /// Rectangle solution on the grid with half the cells per side, each
    /// coarse value the mean of its four children.
    pub fn coarsened(&self) -> Option<GridSolution> {
        match self.grid {
            GridSpec::Rect { lo, hi, nx, ny } if nx % 2 == 0 && ny % 2 == 0 => {
                let (cx, cy) = (nx / 2, ny / 2);
                let v = |i: usize, j: usize| self.values[j * nx + i];
                let mut values = Vec::with_capacity(cx * cy);
                for j in 0..cy {
                    for i in 0..cx {
                        values.push(0.25 * (v(2 * i, 2 * j) + v(2 * i + 1, 2 * j) + v(2 * i, 2 * j + 1) + v(2 * i + 1, 2 * j + 1)));
                    }
                }
                Some(GridSolution { grid: GridSpec::Rect { lo, hi, nx: cx, ny: cy }, values, ..self.clone() })
            }
            _ => None,
        }
    }

    /// `(center, value)` for every cell.
    pub fn nodes(&self) -> Vec<(Vec2, f64)> {
        self.grid.centers().into_iter().zip(self.values.iter().copied()).collect()
    }

    /// CSV with a leading comment carrying the grid, then `x,y,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let meta = serde_json::json!({ "grid": self.grid, "flux_residual": self.flux_residual, "solver": self.solver });
        let _ = writeln!(out, "# {meta}");
        out.push_str("x,y,value\n");
        for (c, v) in self.nodes() {
            let _ = writeln!(out, "{:e},{:e},{:e}", c.x, c.y, v);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("grid solution CSV: {m}"));
        let mut lines = text.lines();
        let meta = lines.next().and_then(|l| l.strip_prefix("# ")).ok_or_else(|| bad("missing header"))?;
        let meta: serde_json::Value = serde_json::from_str(meta).map_err(|e| bad(&e.to_string()))?;
        let grid: GridSpec = serde_json::from_value(meta["grid"].clone()).map_err(|e| bad(&e.to_string()))?;
        let solver: SolverReport = serde_json::from_value(meta["solver"].clone()).map_err(|e| bad(&e.to_string()))?;
        let flux_residual = meta["flux_residual"].as_f64().ok_or_else(|| bad("missing flux residual"))?;
        if lines.next() != Some("x,y,value") {
            return Err(bad("missing column header"));
        }
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.rsplit(',').next().unwrap_or("").trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != grid.n_cells() {
            return Err(bad("row count does not match the grid"));
        }
        Ok(Self { grid, values, flux_residual, solver })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }
}

/// Error estimate of the finer solution at `x` from two grids a factor 2
/// apart, assuming second-order convergence.
pub fn richardson_error(coarse: &GridSolution, fine: &GridSolution, x: Vec2) -> f64 {
    (coarse.interpolate(x) - fine.interpolate(x)).abs() / 3.0
}

/// Smallest nonzero eigenvalue of the Neumann operator `-∇·κ∇`, by inverse
/// iteration on the complement of constants in the area-weighted inner
/// product.
pub fn spectral_gap(domain: &DomainGeometry, kappa: &dyn ScalarConductivity, resolution: usize) -> Result<f64> {
    let grid = GridSpec::for_domain(domain, resolution)?;
    let asm = assemble(&grid, kappa)?;
    let areas = grid.areas();
    let total: f64 = areas.iter().sum();
    let deflate = |v: &mut [f64]| {
        let m = v.iter().zip(&areas).map(|(x, a)| x * a).sum::<f64>() / total;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let m_norm = |v: &[f64]| v.iter().zip(&areas).map(|(x, a)| x * x * a).sum::<f64>().sqrt();
    let mut v: Vec<f64> = grid
        .centers()
        .iter()
        .map(|c| {
            let d = *c - domain.boundary_centroid();
            d.x + 0.37 * d.y + 0.11 * d.x * d.y
        })
        .collect();
    deflate(&mut v);
    let mut lambda = f64::NAN;
    let mut av = vec![0.0; v.len()];
    for _ in 0..200 {
        let nv = m_norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let b: Vec<f64> = v.iter().zip(&areas).map(|(x, a)| x * a).collect();
        let mut w = v.clone();
        pcg(&asm.matrix, &b, &mut w, true, 1e-12)?;
        deflate(&mut w);
        asm.matrix.apply(&w, &mut av);
        let num: f64 = w.iter().zip(&av).map(|(a, b)| a * b).sum();
        let den = m_norm(&w).powi(2);
        let next = num / den;
        v = w;
        if (next - lambda).abs() <= 1e-12 * next {
            return Ok(next);
        }
        lambda = next;
    }
    if lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(Error::SolverDiverged { residual: f64::NAN, iterations: 200 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Electrode;
    use crate::oracle::analytic::{disk_neumann_analytic, disk_robin_analytic, disk_neumann_gap, FourierBoundaryData};
    use std::f64::consts::PI;

    fn unit() -> ConductivityField {
        ConductivityField::identity()
    }

    #[test]
    fn zero_data_gives_zero() {
        let sq = DomainGeometry::unit_square();
        let s = fd_solve(&OracleProblem::Continuum(BoundaryFunction::constant(0.0)), &sq, &unit(), 32).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rectangle_arc_convention_matches_geometry() {
        let dom = DomainGeometry::rectangle(Vec2::new(-1.0, 0.0), Vec2::new(2.0, 1.0)).unwrap();
        let grid = GridSpec::for_domain(&dom, 8).unwrap();
        let asm = assemble(&grid, &unit()).unwrap();
        let centers = grid.centers();
        for face in &asm.boundary {
            let mid = dom.boundary_point_at(0.5 * (face.s0 + face.s1));
            let c = centers[face.cell];
            assert!(((mid.position - c).norm() - face.distance).abs() < 1e-12, "{face:?}");
        }
    }

    #[test]
    fn disk_neumann_second_order() {
        let disk = DomainGeometry::unit_disk();
        let f = BoundaryFunction::cos(1);
        let data = FourierBoundaryData::cos(1);
        let err = |n: usize| {
            let s = fd_solve(&OracleProblem::Continuum(f.clone()), &disk, &unit(), n).unwrap();
            assert!(s.flux_residual < 1e-8, "{}", s.flux_residual);
            s.nodes()
                .into_iter()
                .map(|(c, v)| (v - disk_neumann_analytic(&data, c.norm(), c.y.atan2(c.x)).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "errors {e1} {e2}, order {order}");
        assert!(e2 < 2e-3);
    }

    #[test]
    fn cem_half_disks_are_antisymmetric() {
        let disk = DomainGeometry::unit_disk();
        let e = vec![Electrode { start: 0.0, end: PI }, Electrode { start: PI, end: 2.0 * PI }];
        let cfg = ElectrodeConfig::new(e, vec![1.0, -1.0], 1.0, &disk).unwrap();
        let s = fd_solve(&OracleProblem::Cem(cfg.clone()), &disk, &unit(), 32).unwrap();
        assert!(s.interpolate(Vec2::ZERO).abs() < 1e-8);
        assert!(s.flux_residual < 1e-8);
        let data = FourierBoundaryData::from_electrode_source(&cfg, 1.0, 4001);
        let p = Vec2::new(0.0, 0.5);
        let exact = disk_robin_analytic(&data, 1.0, 0.5, PI / 2.0);
        assert!((s.interpolate(p) - exact).abs() < 5e-3, "{} vs {exact}", s.interpolate(p));
    }

    #[test]
    fn rectangle_dirichlet_linear_is_exact() {
        let sq = DomainGeometry::unit_square();
        let s = fd_solve(&OracleProblem::Dirichlet(BoundaryFunction::Coordinate { axis: 0 }), &sq, &unit(), 32).unwrap();
        for p in [Vec2::new(0.3, 0.7), Vec2::new(0.51, 0.02)] {
            assert!((s.interpolate(p) - p.x).abs() < 1e-8);
        }
    }

    #[test]
    fn spectral_gaps() {
        let disk = DomainGeometry::unit_disk();
        let g = spectral_gap(&disk, &unit(), 32).unwrap();
        assert!((g / disk_neumann_gap() - 1.0).abs() < 0.02, "{g}");
        let sq = DomainGeometry::unit_square();
        let g = spectral_gap(&sq, &unit(), 32).unwrap();
        assert!((g / (PI * PI) - 1.0).abs() < 0.02, "{g}");
        let two = ConductivityField::constant(crate::linalg::SymMat2::scalar(2.0), 2.0).unwrap();
        let g2 = spectral_gap(&sq, &two, 32).unwrap();
        assert!((g2 / g - 2.0).abs() < 1e-8);
    }

    #[test]
    fn piecewise_field_and_csv_roundtrip() {
        let disk = DomainGeometry::unit_disk();
        let field = PiecewiseConstantField {
            background: 1.0,
            inclusions: vec![Inclusion { center: Vec2::new(0.3, 0.0), radius: 0.3, value: 5.0 }],
        };
        let s = fd_solve(&OracleProblem::Continuum(BoundaryFunction::cos(1)), &disk, &field, 16).unwrap();
        let back = GridSolution::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back.grid, s.grid);
        for (a, b) in back.values.iter().zip(&s.values) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300) * 10.0);
        }
    }

    #[test]
    fn anisotropic_fields_are_rejected() {
        let sq = DomainGeometry::unit_square();
        let k = ConductivityField::constant(crate::linalg::SymMat2::new(2.0, 0.5, 1.0), 3.0).unwrap();
        let r = fd_solve(&OracleProblem::Continuum(BoundaryFunction::constant(0.0)), &sq, &k, 8);
        assert!(matches!(r, Err(Error::UnsupportedField(_))));
    }

    #[test]
    fn incompatible_neumann_data() {
        let sq = DomainGeometry::unit_square();
        let r = fd_solve(&OracleProblem::Continuum(BoundaryFunction::constant(1.0)), &sq, &unit(), 8);
        assert!(matches!(r, Err(Error::CompatibilityViolation { .. })));
    }
}
