//! Conductivity fields κ(x): evaluation, diffusion factor and drift.
//!
//! The generator of the associated diffusion is ∇·κ∇ (no factor ½), so the
//! diffusion factor satisfies `B Bᵀ = 2κ` and the drift is the row
//! divergence `a_i = Σ_j ∂_j κ_ij`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::linalg::{LowerTri2, SymMat2, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    Constant {
        matrix: SymMat2,
    },
    /// Isotropic `c(r) I` with `c(r) = Σ_k coefficients[k] r^{2k}`, `r = |x - center|`.
    RadialIsotropic {
        center: Vec2,
        coefficients: Vec<f64>,
    },
    /// `background + amplitude ψ(|x - center| / radius) I` with the C^∞ bump
    /// `ψ(s) = exp(1 - 1/(1 - s²))` on `s < 1`, so ψ(0) = 1.
    SmoothBump {
        background: SymMat2,
        center: Vec2,
        radius: f64,
        amplitude: f64,
    },
    Grid(GridField),
}

/// Isotropic nodal values on a regular grid, interpolated with C¹
/// Catmull-Rom cubics in each direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub lo: Vec2,
    pub hi: Vec2,
    /// Row-major, `values[j * nx + i]` is the value at node (i, j).
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
struct Collar {
    width: f64,
    domain: DomainGeometry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConductivityField {
    kind: FieldKind,
    ellipticity_bound: f64,
    collar: Option<Collar>,
    /// κ(x) = magnitude · κ_base(x / length)
    length: f64,
    magnitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityReport {
    /// max(λ_max, 1/λ_min) over the sampled points.
    pub estimate: f64,
    pub declared: f64,
    pub passed: bool,
}

impl ConductivityField {
    pub fn new(kind: FieldKind, ellipticity_bound: f64) -> Result<Self> {
        if !(ellipticity_bound >= 1.0) {
            return Err(Error::InvalidParameter(format!("ellipticity bound must be >= 1, got {ellipticity_bound}")));
        }
        match &kind {
            FieldKind::SmoothBump { radius, .. } if !(*radius > 0.0) => {
                return Err(Error::InvalidParameter("bump radius must be positive".into()))
            }
            FieldKind::RadialIsotropic { coefficients, .. } if coefficients.is_empty() => {
                return Err(Error::InvalidParameter("radial profile needs at least one coefficient".into()))
            }
            FieldKind::Grid(g) => g.validate()?,
            _ => {}
        }
        Ok(Self { kind, ellipticity_bound, collar: None, length: 1.0, magnitude: 1.0 })
    }

    pub fn identity() -> Self {
        Self::constant(SymMat2::IDENTITY, 1.0).expect("identity is elliptic")
    }

    pub fn constant(matrix: SymMat2, ellipticity_bound: f64) -> Result<Self> {
        Self::new(FieldKind::Constant { matrix }, ellipticity_bound)
    }

    /// Forces κ ≡ identity within `width` of ∂D, blending smoothly back to the
    /// base field over the next `width`.
    pub fn with_collar(mut self, width: f64, domain: &DomainGeometry) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter("collar width must be positive".into()));
        }
        self.collar = Some(Collar { width, domain: domain.clone() });
        Ok(self)
    }

    /// The field `x ↦ magnitude · κ(x / length)`, i.e. κ transported to the
    /// domain dilated by `length` and multiplied by `magnitude`.
    pub fn rescaled(&self, length: f64, magnitude: f64) -> Result<Self> {
        if !(length > 0.0 && magnitude > 0.0) {
            return Err(Error::InvalidParameter("rescaling factors must be positive".into()));
        }
        Ok(Self {
            length: self.length * length,
            magnitude: self.magnitude * magnitude,
            ellipticity_bound: self.ellipticity_bound * magnitude.max(1.0 / magnitude),
            ..self.clone()
        })
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn ellipticity_bound(&self) -> f64 {
        self.ellipticity_bound
    }

    pub fn collar_width(&self) -> Option<f64> {
        self.collar.as_ref().map(|c| c.width * self.length)
    }

    /// True when κ equals the identity near ∂D: either an explicit collar or a
    /// constant identity field.
    pub fn identity_at_boundary(&self) -> bool {
        self.magnitude == 1.0 && (self.collar.is_some() || self.is_constant_identity())
    }

    pub fn is_constant_identity(&self) -> bool {
        self.magnitude == 1.0 && matches!(self.kind, FieldKind::Constant { matrix } if matrix == SymMat2::IDENTITY)
    }

    pub fn is_constant(&self) -> bool {
        self.collar.is_none() && matches!(self.kind, FieldKind::Constant { .. })
    }

    /// κ(x), checked against the declared ellipticity bound.
    pub fn evaluate(&self, x: Vec2) -> Result<SymMat2> {
        let k = self.evaluate_unchecked(x);
        let (lo, hi) = k.eigenvalues();
        let c0 = self.ellipticity_bound * (1.0 + 1e-12);
        if !(lo * c0 >= 1.0 && hi <= c0) {
            return Err(Error::EllipticityViolation { at: x, min: lo, max: hi, bound: self.ellipticity_bound });
        }
        Ok(k)
    }

    fn evaluate_unchecked(&self, x: Vec2) -> SymMat2 {
        let y = x * (1.0 / self.length);
        self.base_value(y).scale(self.magnitude)
    }

    fn base_value(&self, y: Vec2) -> SymMat2 {
        let raw = self.raw_value(y);
        match &self.collar {
            None => raw,
            Some(c) => {
                let (w, _) = collar_weight(c, y);
                if w == 1.0 {
                    raw
                } else {
                    SymMat2::IDENTITY.add(&raw.add(&SymMat2::IDENTITY.scale(-1.0)).scale(w))
                }
            }
        }
    }

    fn raw_value(&self, y: Vec2) -> SymMat2 {
        match &self.kind {
            FieldKind::Constant { matrix } => *matrix,
            FieldKind::RadialIsotropic { center, coefficients } => {
                let r2 = (y - *center).norm_sq();
                SymMat2::scalar(horner(coefficients, r2))
            }
            FieldKind::SmoothBump { background, center, radius, amplitude } => {
                let s2 = (y - *center).norm_sq() / (radius * radius);
                background.add(&SymMat2::scalar(amplitude * bump(s2)))
            }
            FieldKind::Grid(g) => SymMat2::scalar(g.interpolate(y)),
        }
    }

    /// Row divergence of the unscaled field with analytic gradients (central
    /// differences of the interpolant for grid fields).
    fn raw_drift(&self, y: Vec2) -> Vec2 {
        match &self.kind {
            FieldKind::Constant { .. } => Vec2::ZERO,
            FieldKind::RadialIsotropic { center, coefficients } => {
                let d = y - *center;
                let r2 = d.norm_sq();
                // d/dr Σ a_k r^{2k} = r Σ 2k a_k r^{2k-2}
                let deriv: Vec<f64> =
                    coefficients.iter().enumerate().skip(1).map(|(k, a)| 2.0 * k as f64 * a).collect();
                d * horner(&deriv, r2)
            }
            FieldKind::SmoothBump { center, radius, amplitude, .. } => {
                let d = y - *center;
                let r2 = radius * radius;
                let s2 = d.norm_sq() / r2;
                if s2 >= 1.0 {
                    return Vec2::ZERO;
                }
                let q = 1.0 - s2;
                d * (amplitude * bump(s2) * (-2.0 / (q * q * r2)))
            }
            FieldKind::Grid(g) => {
                let h = g.fd_step();
                Vec2::new(
                    (g.interpolate(y + Vec2::new(h.x, 0.0)) - g.interpolate(y - Vec2::new(h.x, 0.0))) / (2.0 * h.x),
                    (g.interpolate(y + Vec2::new(0.0, h.y)) - g.interpolate(y - Vec2::new(0.0, h.y))) / (2.0 * h.y),
                )
            }
        }
    }

    /// Drift a(x) with `a_i = Σ_j ∂_j κ_ij(x)`.
    pub fn drift(&self, x: Vec2) -> Vec2 {
        let y = x * (1.0 / self.length);
        let raw = self.raw_drift(y);
        let base = match &self.collar {
            None => raw,
            Some(c) => {
                let (w, grad_w) = collar_weight(c, y);
                if w == 0.0 {
                    Vec2::ZERO
                } else {
                    let excess = self.raw_value(y).add(&SymMat2::IDENTITY.scale(-1.0));
                    raw * w + excess.apply(grad_w)
                }
            }
        };
        base * (self.magnitude / self.length)
    }

    /// Lower-triangular B with `B Bᵀ = 2κ(x)`.
    pub fn diffusion_factor(&self, x: Vec2) -> Result<LowerTri2> {
        let k = self.evaluate(x)?;
        LowerTri2::cholesky(&k.scale(2.0)).ok_or(Error::FactorizationFailure(x))
    }

    /// Scalar value of an isotropic field; errors on anisotropic evaluations.
    pub fn isotropic_value(&self, x: Vec2) -> Result<f64> {
        let k = self.evaluate(x)?;
        if k.xy.abs() > 1e-14 * k.norm() || (k.xx - k.yy).abs() > 1e-14 * k.norm() {
            return Err(Error::UnsupportedField(format!(
                "anisotropic conductivity at ({}, {}) is not supported by the grid solver",
                x.x, x.y
            )));
        }
        Ok(k.xx)
    }

    /// Samples `n_samples` interior points and reports the eigenvalue envelope.
    pub fn check_ellipticity<R: Rng + ?Sized>(
        &self,
        domain: &DomainGeometry,
        n_samples: usize,
        rng: &mut R,
    ) -> EllipticityReport {
        let mut estimate: f64 = 1.0;
        for _ in 0..n_samples {
            let (lo, hi) = self.evaluate_unchecked(domain.sample_interior(rng)).eigenvalues();
            estimate = estimate.max(hi).max(if lo > 0.0 { 1.0 / lo } else { f64::INFINITY });
        }
        EllipticityReport {
            estimate,
            declared: self.ellipticity_bound,
            passed: estimate <= self.ellipticity_bound * (1.0 + 1e-12),
        }
    }
}

fn horner(coefficients: &[f64], z: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, a| acc * z + a)
}

/// ψ as a function of s².
fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

/// Blend weight (0 inside the collar, 1 beyond twice its width) and its gradient.
fn collar_weight(c: &Collar, y: Vec2) -> (f64, Vec2) {
    let dist = -c.domain.signed_distance(y);
    let s = (dist - c.width) / c.width;
    if s <= 0.0 {
        return (0.0, Vec2::ZERO);
    }
    if s >= 1.0 {
        return (1.0, Vec2::ZERO);
    }
    let w = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let dw = 30.0 * s * s * (1.0 - s) * (1.0 - s) / c.width;
    // ∇dist = -outward normal of the nearest boundary point; zero on the medial axis
    let grad_dist = c.domain.project_to_boundary(y).map_or(Vec2::ZERO, |p| -p.outward_normal);
    (w, grad_dist * dw)
}

impl GridField {
    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidParameter("grid field needs at least 2x2 nodes".into()));
        }
        if self.values.len() != self.nx * self.ny {
            return Err(Error::InvalidParameter(format!(
                "grid field has {} values, expected {}",
                self.values.len(),
                self.nx * self.ny
            )));
        }
        if !(self.hi.x > self.lo.x && self.hi.y > self.lo.y) {
            return Err(Error::InvalidParameter("grid bounding box is empty".into()));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("grid values must be positive".into()));
        }
        Ok(())
    }

    fn spacing(&self) -> Vec2 {
        Vec2::new(
            (self.hi.x - self.lo.x) / (self.nx - 1) as f64,
            (self.hi.y - self.lo.y) / (self.ny - 1) as f64,
        )
    }

    /// Finite-difference step: a quarter of the grid spacing.
    pub fn fd_step(&self) -> Vec2 {
        self.spacing() * 0.25
    }

    fn node(&self, i: isize, j: isize) -> f64 {
        let i = i.clamp(0, self.nx as isize - 1) as usize;
        let j = j.clamp(0, self.ny as isize - 1) as usize;
        self.values[j * self.nx + i]
    }

    /// Tensor-product Catmull-Rom interpolation; coordinates are clamped to
    /// the bounding box.
    pub fn interpolate(&self, p: Vec2) -> f64 {
        let h = self.spacing();
        let gx = ((p.x - self.lo.x) / h.x).clamp(0.0, (self.nx - 1) as f64);
        let gy = ((p.y - self.lo.y) / h.y).clamp(0.0, (self.ny - 1) as f64);
        let i = (gx.floor() as isize).min(self.nx as isize - 2);
        let j = (gy.floor() as isize).min(self.ny as isize - 2);
        let tx = gx - i as f64;
        let ty = gy - j as f64;
        let wx = catmull_rom_weights(tx);
        let wy = catmull_rom_weights(ty);
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let mut row = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                row += wxa * self.node(i + a as isize - 1, j + b as isize - 1);
            }
            acc += wyb * row;
        }
        acc
    }

    /// Reads the grid CSV layout:
    ///
    /// ```text
    /// nx,ny,x_lo,y_lo,x_hi,y_hi
    /// 4,4,0,0,1,1
    /// i,j,value
    /// 0,0,1.0
    /// ...
    /// ```
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameter(format!("grid csv: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        if header.replace(' ', "") != "nx,ny,x_lo,y_lo,x_hi,y_hi" {
            return Err(bad("first line must be nx,ny,x_lo,y_lo,x_hi,y_hi"));
        }
        let dims: Vec<&str> = lines.next().ok_or_else(|| bad("missing dimensions"))?.split(',').collect();
        if dims.len() != 6 {
            return Err(bad("dimension line needs six fields"));
        }
        let nx: usize = dims[0].trim().parse().map_err(|_| bad("nx"))?;
        let ny: usize = dims[1].trim().parse().map_err(|_| bad("ny"))?;
        let f: Vec<f64> = dims[2..]
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bounding box")))
            .collect::<Result<_>>()?;
        if lines.next().map(|l| l.replace(' ', "")) != Some("i,j,value".to_string()) {
            return Err(bad("third line must be i,j,value"));
        }
        let mut values = vec![f64::NAN; nx * ny];
        for line in lines {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(bad(&format!("malformed row '{line}'")));
            }
            let i: usize = cols[0].parse().map_err(|_| bad("i"))?;
            let j: usize = cols[1].parse().map_err(|_| bad("j"))?;
            if i >= nx || j >= ny {
                return Err(bad(&format!("node ({i}, {j}) outside the grid")));
            }
            values[j * nx + i] = cols[2].parse().map_err(|_| bad("value"))?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(bad("missing nodes"));
        }
        let g = GridField { nx, ny, lo: Vec2::new(f[0], f[1]), hi: Vec2::new(f[2], f[3]), values };
        g.validate()?;
        Ok(g)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }
}

fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bump_field() -> ConductivityField {
        ConductivityField::new(
            FieldKind::SmoothBump {
                background: SymMat2::IDENTITY,
                center: Vec2::new(0.1, -0.2),
                radius: 0.6,
                amplitude: 2.0,
            },
            4.0,
        )
        .unwrap()
    }

    fn fd_drift(f: &ConductivityField, x: Vec2, h: f64) -> Vec2 {
        let dx = Vec2::new(h, 0.0);
        let dy = Vec2::new(0.0, h);
        let kxp = f.evaluate(x + dx).unwrap();
        let kxm = f.evaluate(x - dx).unwrap();
        let kyp = f.evaluate(x + dy).unwrap();
        let kym = f.evaluate(x - dy).unwrap();
        Vec2::new(
            (kxp.xx - kxm.xx) / (2.0 * h) + (kyp.xy - kym.xy) / (2.0 * h),
            (kxp.xy - kxm.xy) / (2.0 * h) + (kyp.yy - kym.yy) / (2.0 * h),
        )
    }

    #[test]
    fn evaluate_examples() {
        let id = ConductivityField::identity();
        assert_eq!(id.evaluate(Vec2::new(0.3, 0.4)).unwrap(), SymMat2::IDENTITY);
        let b = bump_field();
        assert_eq!(b.evaluate(Vec2::new(0.1, -0.2)).unwrap(), SymMat2::scalar(3.0));
        let g = GridField {
            nx: 3,
            ny: 3,
            lo: Vec2::ZERO,
            hi: Vec2::new(1.0, 1.0),
            values: vec![1.0, 1.5, 2.0, 1.2, 1.7, 2.2, 1.1, 1.3, 1.9],
        };
        let f = ConductivityField::new(FieldKind::Grid(g), 3.0).unwrap();
        assert_eq!(f.evaluate(Vec2::new(0.5, 0.5)).unwrap().xx, 1.7);
        assert_eq!(f.evaluate(Vec2::new(1.0, 0.5)).unwrap().xx, 2.2);
    }

    #[test]
    fn ellipticity_violation_is_reported() {
        let f = ConductivityField::constant(SymMat2::diag(4.0, 0.25), 2.0).unwrap();
        assert!(matches!(f.evaluate(Vec2::ZERO), Err(Error::EllipticityViolation { .. })));
    }

    #[test]
    fn diffusion_factor_examples() {
        let b = ConductivityField::identity().diffusion_factor(Vec2::ZERO).unwrap();
        let s = 2f64.sqrt();
        assert_eq!((b.a, b.b, b.c), (s, 0.0, s));
        let f = ConductivityField::constant(SymMat2::diag(2.0, 0.5), 2.0).unwrap();
        let b = f.diffusion_factor(Vec2::ZERO).unwrap();
        assert_eq!((b.a, b.b, b.c), (2.0, 0.0, 1.0));
    }

    #[test]
    fn diffusion_factor_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(0.2..3.0);
            let c: f64 = rng.random_range(0.2..3.0);
            let b: f64 = rng.random_range(-0.9..0.9) * (a * c).sqrt();
            let k = SymMat2::new(a, b, c);
            let f = ConductivityField::constant(k, 100.0).unwrap();
            let g = f.diffusion_factor(Vec2::ZERO).unwrap().gram();
            let diff = g.add(&k.scale(-2.0)).norm();
            assert!(diff <= 1e-12 * k.norm(), "{diff}");
        }
    }

    #[test]
    fn drift_examples() {
        assert_eq!(ConductivityField::identity().drift(Vec2::new(0.2, 0.1)), Vec2::ZERO);
        // κ = (1 + x₁) I written as a grid field is piecewise cubic; use a radial-free
        // closed form instead: c(r) = 1 + r² has ∇c = 2x
        let r = ConductivityField::new(
            FieldKind::RadialIsotropic { center: Vec2::ZERO, coefficients: vec![1.0, 1.0] },
            3.0,
        )
        .unwrap();
        let a = r.drift(Vec2::new(0.3, -0.4));
        assert!((a.x - 0.6).abs() < 1e-14 && (a.y + 0.8).abs() < 1e-14);
        // κ = (1 + x₁) I sampled on a grid: linear data is reproduced exactly
        let nodes = 9;
        let values = (0..nodes * nodes).map(|k| 1.0 + (k % nodes) as f64 / (nodes - 1) as f64).collect();
        let g = GridField { nx: nodes, ny: nodes, lo: Vec2::ZERO, hi: Vec2::new(1.0, 1.0), values };
        let f = ConductivityField::new(FieldKind::Grid(g), 2.0).unwrap();
        let a = f.drift(Vec2::new(0.43, 0.61));
        assert!((a.x - 1.0).abs() < 1e-12 && a.y.abs() < 1e-12);
    }

    #[test]
    fn bump_drift_matches_finite_differences_to_second_order() {
        let f = bump_field();
        let x = Vec2::new(0.35, 0.05);
        let a = f.drift(x);
        let e1 = (fd_drift(&f, x, 1e-2) - a).norm();
        let e2 = (fd_drift(&f, x, 1e-3) - a).norm();
        let order = (e1 / e2).log10();
        assert!(order >= 1.9, "observed order {order} ({e1}, {e2})");
    }

    #[test]
    fn collar_is_identity_near_boundary() {
        let disk = DomainGeometry::unit_disk();
        let f = bump_field().with_collar(0.1, &disk).unwrap();
        assert!(f.identity_at_boundary());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = rng.random_range(0.9..1.0);
            let x = Vec2::from_polar(r, rng.random_range(0.0..6.3));
            assert_eq!(f.evaluate(x).unwrap(), SymMat2::IDENTITY);
            assert_eq!(f.drift(x), Vec2::ZERO);
        }
        // drift in the blend zone still matches finite differences
        let wide = ConductivityField::new(
            FieldKind::RadialIsotropic { center: Vec2::ZERO, coefficients: vec![2.0, -0.5] },
            3.0,
        )
        .unwrap()
        .with_collar(0.2, &disk)
        .unwrap();
        let x = Vec2::from_polar(0.7, 0.4);
        let err = (fd_drift(&wide, x, 1e-5) - wide.drift(x)).norm();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn ellipticity_checks() {
        let disk = DomainGeometry::unit_disk();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = ConductivityField::identity().check_ellipticity(&disk, 100, &mut rng);
        assert!(r.passed && r.estimate == 1.0);
        let r = ConductivityField::constant(SymMat2::diag(4.0, 0.25), 2.0)
            .unwrap()
            .check_ellipticity(&disk, 100, &mut rng);
        assert!(!r.passed);
        let r = bump_field().check_ellipticity(&disk, 10_000, &mut rng);
        assert!(r.passed && r.estimate <= 3.0 && r.estimate > 2.5, "{r:?}");
    }

    #[test]
    fn rescaling_transports_the_field() {
        let f = bump_field();
        let g = f.rescaled(2.0, 0.25).unwrap();
        let x = Vec2::new(0.3, 0.5);
        let k1 = f.evaluate(x).unwrap().scale(0.25);
        let k2 = g.evaluate(x * 2.0).unwrap();
        assert!(k1.add(&k2.scale(-1.0)).norm() < 1e-15);
        let a1 = f.drift(x) * (0.25 / 2.0);
        assert!((g.drift(x * 2.0) - a1).norm() < 1e-15);
    }

    #[test]
    fn grid_csv_parsing() {
        let text = "nx,ny,x_lo,y_lo,x_hi,y_hi\n2,2,0,0,1,1\ni,j,value\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n";
        let g = GridField::from_csv_str(text).unwrap();
        assert_eq!(g.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(GridField::from_csv_str("nx,ny,x_lo,y_lo,x_hi,y_hi\n2,2,0,0,1,1\ni,j,value\n0,0,1\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn factor_roundtrip_on_bump(x in -0.9f64..0.9, y in -0.4f64..0.4) {
                let f = bump_field();
                let p = Vec2::new(x, y);
                let k = f.evaluate(p).unwrap();
                let g = f.diffusion_factor(p).unwrap().gram();
                prop_assert!(g.add(&k.scale(-2.0)).norm() <= 1e-12 * k.norm());
                prop_assert_eq!(k.xy, k.xy);
            }
        }
    }
}
