//! Scalar functions on the boundary: boundary voltages, current densities
//! and test functions.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, DomainGeometry, Electrode};

/// A function on ∂D.
///
/// Fourier series are written in the normalized angle `θ = 2π s / σ(∂D)` of
/// the arc parameter `s`; on a disk this is the polar angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BoundaryFunction {
    Constant { value: f64 },
    /// `mean + Σ_k cos[k-1] cos kθ + sin[k-1] sin kθ`
    Fourier {
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// The Cartesian coordinate `y_axis` of the boundary point.
    Coordinate { axis: usize },
    /// `values[l]` on arc `arcs[l]`, zero elsewhere.
    Piecewise { arcs: Vec<Electrode>, values: Vec<f64> },
}

impl BoundaryFunction {
    pub fn constant(value: f64) -> Self {
        BoundaryFunction::Constant { value }
    }

    pub fn cos(k: usize) -> Self {
        let mut cos = vec![0.0; k];
        cos[k - 1] = 1.0;
        BoundaryFunction::Fourier { mean: 0.0, cos, sin: Vec::new() }
    }

    pub fn sin(k: usize) -> Self {
        let mut sin = vec![0.0; k];
        sin[k - 1] = 1.0;
        BoundaryFunction::Fourier { mean: 0.0, cos: Vec::new(), sin }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            BoundaryFunction::Constant { value } => value.is_finite(),
            BoundaryFunction::Fourier { mean, cos, sin } => mean.is_finite() && finite(cos) && finite(sin),
            BoundaryFunction::Coordinate { axis } => *axis < 2,
            BoundaryFunction::Piecewise { arcs, values } => {
                arcs.len() == values.len() && finite(values) && arcs.iter().all(|a| a.length() > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("malformed boundary function {self:?}")))
        }
    }

    /// Value at `p` on a boundary of total length `perimeter`.
    pub fn evaluate(&self, p: &BoundaryPoint, perimeter: f64) -> f64 {
        match self {
            BoundaryFunction::Constant { value } => *value,
            BoundaryFunction::Fourier { mean, cos, sin } => {
                let theta = TAU * p.arc_parameter / perimeter;
                let mut v = *mean;
                for (k, a) in cos.iter().enumerate() {
                    v += a * ((k + 1) as f64 * theta).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    v += b * ((k + 1) as f64 * theta).sin();
                }
                v
            }
            BoundaryFunction::Coordinate { axis } => p.position.component(*axis),
            BoundaryFunction::Piecewise { arcs, values } => arcs
                .iter()
                .position(|a| a.contains(p.arc_parameter, perimeter))
                .map_or(0.0, |l| values[l]),
        }
    }

    /// Closure evaluating the function on `domain`'s boundary.
    pub fn on<'a>(&'a self, domain: &DomainGeometry) -> impl Fn(&BoundaryPoint) -> f64 + Sync + 'a {
        let perimeter = domain.boundary_measure();
        move |p: &BoundaryPoint| self.evaluate(p, perimeter)
    }

    /// Exact `∫_{∂D} f dσ`.
    pub fn integral(&self, domain: &DomainGeometry) -> f64 {
        let sigma = domain.boundary_measure();
        match self {
            BoundaryFunction::Constant { value } => value * sigma,
            BoundaryFunction::Fourier { mean, .. } => mean * sigma,
            BoundaryFunction::Coordinate { axis } => sigma * domain.boundary_centroid().component(*axis),
            BoundaryFunction::Piecewise { arcs, values } => {
                arcs.iter().zip(values).map(|(a, v)| a.length() * v).sum()
            }
        }
    }

    /// Sup norm; sampled on a fine grid for Fourier series and coordinates.
    pub fn sup_norm(&self, domain: &DomainGeometry) -> f64 {
        match self {
            BoundaryFunction::Constant { value } => value.abs(),
            BoundaryFunction::Piecewise { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            _ => {
                let f = self.on(domain);
                domain.boundary_grid(8192, 0.0).iter().fold(0.0, |m, p| m.max(f(p).abs()))
            }
        }
    }
}

/// Neumann current density with the compatibility condition checked.
#[derive(Clone, Debug, PartialEq)]
pub struct NeumannData {
    f: BoundaryFunction,
    perimeter: f64,
}

impl NeumannData {
    /// Requires `|∫ f dσ| ≤ 1e-8 σ(∂D) ‖f‖_∞`.
    pub fn new(f: BoundaryFunction, domain: &DomainGeometry) -> Result<Self> {
        f.validate()?;
        let integral = f.integral(domain);
        let tolerance = 1e-8 * domain.boundary_measure() * f.sup_norm(domain);
        if integral.abs() > tolerance {
            return Err(Error::CompatibilityViolation { integral, tolerance });
        }
        Ok(Self { f, perimeter: domain.boundary_measure() })
    }

    pub fn function(&self) -> &BoundaryFunction {
        &self.f
    }

    pub fn value(&self, p: &BoundaryPoint) -> f64 {
        self.f.evaluate(p, self.perimeter)
    }
}
