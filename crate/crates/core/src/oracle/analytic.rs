//! Separation-of-variables solutions on the unit disk with κ ≡ 1.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::boundary_data::BoundaryFunction;
use crate::error::{Error, Result};
use crate::geometry::ElectrodeConfig;

/// `mean + Σ_{n≥1} cos[n-1] cos nθ + sin[n-1] sin nθ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FourierBoundaryData {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierBoundaryData {
    pub fn cos(n: usize) -> Self {
        let mut c = vec![0.0; n];
        c[n - 1] = 1.0;
        Self { mean: 0.0, cos: c, sin: Vec::new() }
    }

    pub fn sin(n: usize) -> Self {
        let mut s = vec![0.0; n];
        s[n - 1] = 1.0;
        Self { mean: 0.0, cos: Vec::new(), sin: s }
    }

    pub fn order(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    fn coefficients(&self, n: usize) -> (f64, f64) {
        (self.cos.get(n - 1).copied().unwrap_or(0.0), self.sin.get(n - 1).copied().unwrap_or(0.0))
    }

    /// Applies `c_n ↦ m(n) c_n` to every harmonic and `m(0)` to the mean.
    pub fn map_harmonics(&self, m: impl Fn(usize) -> f64) -> Self {
        Self {
            mean: self.mean * m(0),
            cos: self.cos.iter().enumerate().map(|(k, a)| a * m(k + 1)).collect(),
            sin: self.sin.iter().enumerate().map(|(k, b)| b * m(k + 1)).collect(),
        }
    }

    pub fn evaluate(&self, theta: f64) -> f64 {
        self.evaluate_scaled(theta, |_| 1.0)
    }

    fn evaluate_scaled(&self, theta: f64, weight: impl Fn(usize) -> f64) -> f64 {
        let mut v = self.mean * weight(0);
        for n in 1..=self.order() {
            let (a, b) = self.coefficients(n);
            if a != 0.0 || b != 0.0 {
                let (s, c) = (n as f64 * theta).sin_cos();
                v += weight(n) * (a * c + b * s);
            }
        }
        v
    }

    /// Coefficients of a Fourier boundary function, in the angle on the disk.
    pub fn from_boundary_function(f: &BoundaryFunction) -> Result<Self> {
        match f {
            BoundaryFunction::Constant { value } => Ok(Self { mean: *value, ..Self::default() }),
            BoundaryFunction::Fourier { mean, cos, sin } => Ok(Self { mean: *mean, cos: cos.clone(), sin: sin.clone() }),
            _ => Err(Error::InvalidParameter("boundary function is not a Fourier series".into())),
        }
    }

    /// Exact coefficients up to order `n_max` of the electrode source
    /// `f = U_l / z` on a disk of the given radius.
    pub fn from_electrode_source(cfg: &ElectrodeConfig, radius: f64, n_max: usize) -> Self {
        let mut out = Self { mean: 0.0, cos: vec![0.0; n_max], sin: vec![0.0; n_max] };
        let z = cfg.contact_impedance();
        for (e, u) in cfg.electrodes().iter().zip(cfg.voltages()) {
            let v = u / z;
            let (a, b) = (e.start / radius, e.end / radius);
            out.mean += v * (b - a) / TAU;
            for n in 1..=n_max {
                let nf = n as f64;
                out.cos[n - 1] += v * ((nf * b).sin() - (nf * a).sin()) / (nf * PI);
                out.sin[n - 1] += v * ((nf * a).cos() - (nf * b).cos()) / (nf * PI);
            }
        }
        out
    }
}

fn check_zero_mean(data: &FourierBoundaryData) -> Result<()> {
    let scale = data.cos.iter().chain(&data.sin).fold(data.mean.abs(), |m, c| m.max(c.abs()));
    let tolerance = 1e-12 * scale.max(1.0);
    if data.mean.abs() > tolerance {
        return Err(Error::CompatibilityViolation { integral: data.mean * TAU, tolerance: tolerance * TAU });
    }
    Ok(())
}

/// Zero-mean solution of `Δu = 0`, `∂_r u = f` on the unit disk:
/// `u = Σ rⁿ (aₙ cos nθ + bₙ sin nθ) / n`.
pub fn disk_neumann_analytic(data: &FourierBoundaryData, r: f64, theta: f64) -> Result<f64> {
    check_zero_mean(data)?;
    Ok(data.evaluate_scaled(theta, |n| if n == 0 { 0.0 } else { r.powi(n as i32) / n as f64 }))
}

/// Harmonic extension of Dirichlet data: `u = a₀ + Σ rⁿ (aₙ cos nθ + bₙ sin nθ)`.
pub fn disk_dirichlet_analytic(data: &FourierBoundaryData, r: f64, theta: f64) -> f64 {
    data.evaluate_scaled(theta, |n| r.powi(n as i32))
}

/// Solution of `Δu = 0`, `∂_r u + g u = f` with constant `g > 0`:
/// `u = a₀ / g + Σ rⁿ (aₙ cos nθ + bₙ sin nθ) / (n + g)`.
pub fn disk_robin_analytic(data: &FourierBoundaryData, g: f64, r: f64, theta: f64) -> f64 {
    data.evaluate_scaled(theta, |n| r.powi(n as i32) / (n as f64 + g))
}

/// Dirichlet-to-Neumann map of the unit disk: multiplies harmonic n by n.
pub fn disk_dtn(data: &FourierBoundaryData) -> FourierBoundaryData {
    data.map_harmonics(|n| n as f64)
}

/// Derivative of J₁ through its power series.
fn bessel_j1_prime(x: f64) -> f64 {
    // J₁(x) = Σ (-1)^k (x/2)^{2k+1} / (k! (k+1)!)
    let mut sum = 0.0;
    let mut term = 0.5; // coefficient of x^0 in J₁'(x), k = 0
    let half2 = x * x / 4.0;
    for k in 0..60 {
        sum += term;
        let kf = k as f64;
        // ratio of consecutive terms of J₁' = Σ (-1)^k (2k+1) x^{2k} / (2^{2k+1} k! (k+1)!)
        term *= -half2 * (2.0 * kf + 3.0) / ((2.0 * kf + 1.0) * (kf + 1.0) * (kf + 2.0));
    }
    sum
}

/// First positive zero of J₁′, squared: the first nonzero Neumann eigenvalue
/// of the unit disk.
pub fn disk_neumann_gap() -> f64 {
    let (mut lo, mut hi) = (1.5, 2.2);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if bessel_j1_prime(lo) * bessel_j1_prime(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let j = 0.5 * (lo + hi);
    j * j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainGeometry, Electrode};

    #[test]
    fn neumann_examples() {
        let c1 = FourierBoundaryData::cos(1);
        assert!((disk_neumann_analytic(&c1, 0.5, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let c2 = FourierBoundaryData::cos(2);
        let u = disk_neumann_analytic(&c2, 0.7, 0.3).unwrap();
        assert!((u - 0.49 * 0.6f64.cos() / 2.0).abs() < 1e-15);
        assert_eq!(disk_neumann_analytic(&FourierBoundaryData::default(), 0.3, 1.0).unwrap(), 0.0);
        let bad = FourierBoundaryData { mean: 1.0, ..Default::default() };
        assert!(matches!(disk_neumann_analytic(&bad, 0.1, 0.0), Err(Error::CompatibilityViolation { .. })));
    }

    #[test]
    fn dtn_examples() {
        assert_eq!(disk_dtn(&FourierBoundaryData { mean: 1.0, ..Default::default() }).mean, 0.0);
        assert_eq!(disk_dtn(&FourierBoundaryData::cos(1)), FourierBoundaryData::cos(1));
        let s3 = disk_dtn(&FourierBoundaryData::sin(3));
        assert_eq!(s3.sin, vec![0.0, 0.0, 3.0]);
        // composition is multiplication by n²
        let data = FourierBoundaryData { mean: 0.3, cos: vec![1.0, -2.0, 0.5], sin: vec![0.0, 1.5] };
        assert_eq!(disk_dtn(&disk_dtn(&data)), data.map_harmonics(|n| (n * n) as f64));
    }

    #[test]
    fn half_disk_electrode_series() {
        let disk = DomainGeometry::unit_disk();
        let e = vec![Electrode { start: 0.0, end: PI }, Electrode { start: PI, end: TAU }];
        let cfg = ElectrodeConfig::new(e, vec![1.0, -1.0], 1.0, &disk).unwrap();
        let d = FourierBoundaryData::from_electrode_source(&cfg, 1.0, 9);
        assert!(d.mean.abs() < 1e-15);
        for n in 1..=9 {
            let expected = if n % 2 == 1 { 4.0 / (n as f64 * PI) } else { 0.0 };
            assert!((d.sin[n - 1] - expected).abs() < 1e-14);
            assert!(d.cos[n - 1].abs() < 1e-14);
        }
        // the Robin solution is odd in y, so it vanishes at the center
        assert!(disk_robin_analytic(&d, 1.0, 0.0, 0.0).abs() < 1e-15);
    }

    #[test]
    fn bessel_root() {
        assert!((disk_neumann_gap().sqrt() - 1.841_183_781_340_659).abs() < 1e-12);
    }
}
