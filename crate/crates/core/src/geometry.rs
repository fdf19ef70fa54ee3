//! Computational domains in the plane, their boundary and the electrode layout.
//!
//! Three shapes are supported: disks, axis-aligned rectangles and strictly
//! convex polygons. Rectangles are stored as polygons internally so that both
//! share the projection code. Every boundary point carries an arc parameter
//! in `[0, perimeter)`: for disks it is `radius * angle` measured from the
//! point `center + (radius, 0)`, for polygons it is the arclength from the
//! first vertex walking counter-clockwise.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::linalg::Vec2;

/// Relative geometric tolerance; multiplied by the diameter.
pub const GEOMETRIC_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    Disk { center: Vec2, radius: f64 },
    Rectangle { lo: Vec2, hi: Vec2 },
    Polygon { vertices: Vec<Vec2> },
}

#[derive(Clone, Debug, PartialEq)]
struct Edge {
    start: Vec2,
    dir: Vec2,
    normal: Vec2,
    length: f64,
    arc_start: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainGeometry {
    shape: Shape,
    edges: Vec<Edge>,
    /// Outward normal at each vertex: bisector of the adjacent face normals.
    vertex_normals: Vec<Vec2>,
    perimeter: f64,
    area: f64,
    diameter: f64,
}

/// A point on the boundary with its outward normal and arc parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub position: Vec2,
    pub outward_normal: Vec2,
    pub arc_parameter: f64,
}

impl DomainGeometry {
    pub fn new(shape: Shape) -> Result<Self> {
        match shape {
            Shape::Disk { center, radius } => Self::disk(center, radius),
            Shape::Rectangle { lo, hi } => Self::rectangle(lo, hi),
            Shape::Polygon { vertices } => Self::polygon(vertices),
        }
    }

    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.x.is_finite() || !center.y.is_finite() {
            return Err(Error::InvalidDomain(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Self {
            shape: Shape::Disk { center, radius },
            edges: Vec::new(),
            vertex_normals: Vec::new(),
            perimeter: TAU * radius,
            area: PI * radius * radius,
            diameter: 2.0 * radius,
        })
    }

    pub fn unit_disk() -> Self {
        Self::disk(Vec2::ZERO, 1.0).expect("unit disk is valid")
    }

    pub fn rectangle(lo: Vec2, hi: Vec2) -> Result<Self> {
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(Error::InvalidDomain("rectangle needs hi > lo in both coordinates".into()));
        }
        let vertices = vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
        let mut dom = Self::polygon(vertices)?;
        dom.shape = Shape::Rectangle { lo, hi };
        Ok(dom)
    }

    pub fn unit_square() -> Self {
        Self::rectangle(Vec2::ZERO, Vec2::new(1.0, 1.0)).expect("unit square is valid")
    }

    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidDomain("polygon needs at least three vertices".into()));
        }
        let mut turning = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            if e1.norm() == 0.0 {
                return Err(Error::InvalidDomain(format!("repeated vertex at index {i}")));
            }
            let cross = e1.cross(e2);
            if !(cross > 0.0) {
                return Err(Error::InvalidDomain(
                    "polygon vertices must be strictly convex and counter-clockwise".into(),
                ));
            }
            turning += cross.atan2(e1.dot(e2));
        }
        if (turning - TAU).abs() > 1e-9 {
            return Err(Error::InvalidDomain("polygon winds more than once".into()));
        }

        let mut edges = Vec::with_capacity(n);
        let mut arc = 0.0;
        let mut area2 = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let d = b - a;
            let length = d.norm();
            let dir = d * (1.0 / length);
            // CCW orientation: outward normal is the clockwise perpendicular
            let normal = Vec2::new(dir.y, -dir.x);
            edges.push(Edge { start: a, dir, normal, length, arc_start: arc });
            arc += length;
            area2 += a.cross(b);
        }
        let vertex_normals = (0..n)
            .map(|i| {
                let prev = &edges[(i + n - 1) % n];
                (prev.normal + edges[i].normal).normalized()
            })
            .collect();
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max(vertices[i].distance(vertices[j]));
            }
        }
        Ok(Self {
            shape: Shape::Polygon { vertices },
            edges,
            vertex_normals,
            perimeter: arc,
            area: 0.5 * area2,
            diameter,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// σ(∂D), the total boundary length.
    pub fn boundary_measure(&self) -> f64 {
        self.perimeter
    }

    /// |D|, the Lebesgue measure of the domain.
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn tolerance(&self) -> f64 {
        GEOMETRIC_TOLERANCE * self.diameter
    }

    /// The same domain dilated by `factor` about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let shape = match &self.shape {
            Shape::Disk { center, radius } => Shape::Disk { center: *center * factor, radius: radius * factor },
            Shape::Rectangle { lo, hi } => Shape::Rectangle { lo: *lo * factor, hi: *hi * factor },
            Shape::Polygon { vertices } => Shape::Polygon { vertices: vertices.iter().map(|v| *v * factor).collect() },
        };
        Self::new(shape)
    }

    /// Negative inside, zero on the boundary, positive outside; the magnitude
    /// is the Euclidean distance to the boundary.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        match self.shape {
            Shape::Disk { center, radius } => (x - center).norm() - radius,
            _ => {
                let mut max_line = f64::NEG_INFINITY;
                for e in &self.edges {
                    max_line = max_line.max((x - e.start).dot(e.normal));
                }
                if max_line <= 0.0 {
                    // convex interior: nearest face line foot lies on its edge
                    max_line
                } else {
                    self.edges
                        .iter()
                        .map(|e| {
                            let t = (x - e.start).dot(e.dir).clamp(0.0, e.length);
                            (x - (e.start + e.dir * t)).norm()
                        })
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.signed_distance(x) <= self.tolerance()
    }

    /// Nearest boundary point with its outward normal.
    pub fn project_to_boundary(&self, x: Vec2) -> Result<BoundaryPoint> {
        let tol = self.tolerance();
        match self.shape {
            Shape::Disk { center, radius } => {
                let d = x - center;
                let r = d.norm();
                if r <= tol {
                    return Err(Error::AmbiguousProjection(x));
                }
                let u = d * (1.0 / r);
                Ok(BoundaryPoint {
                    position: center + u * radius,
                    outward_normal: u,
                    arc_parameter: radius * u.angle().rem_euclid(TAU),
                })
            }
            _ => {
                let outside = self.edges.iter().any(|e| (x - e.start).dot(e.normal) > 0.0);
                if outside {
                    let mut best = (f64::INFINITY, 0usize, 0.0);
                    for (i, e) in self.edges.iter().enumerate() {
                        let t = (x - e.start).dot(e.dir).clamp(0.0, e.length);
                        let d = (x - (e.start + e.dir * t)).norm_sq();
                        if d < best.0 {
                            best = (d, i, t);
                        }
                    }
                    Ok(self.edge_point(best.1, best.2))
                } else {
                    let mut dists: Vec<(f64, usize)> = self
                        .edges
                        .iter()
                        .enumerate()
                        .map(|(i, e)| (-(x - e.start).dot(e.normal), i))
                        .collect();
                    dists.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let (d0, i0) = dists[0];
                    let foot = |i: usize| {
                        let e = &self.edges[i];
                        (x - e.start).dot(e.dir).clamp(0.0, e.length)
                    };
                    let p0 = self.edge_point(i0, foot(i0));
                    let (d1, i1) = dists[1];
                    if d1 - d0 <= tol {
                        let p1 = self.edge_point(i1, foot(i1));
                        if p1.position.distance(p0.position) > tol {
                            return Err(Error::AmbiguousProjection(x));
                        }
                    }
                    Ok(p0)
                }
            }
        }
    }

    fn edge_point(&self, edge: usize, t: f64) -> BoundaryPoint {
        let e = &self.edges[edge];
        let tol = self.tolerance();
        let n = self.edges.len();
        let (position, normal, arc) = if t <= tol {
            (e.start, self.vertex_normals[edge], e.arc_start)
        } else if t >= e.length - tol {
            let next = (edge + 1) % n;
            (self.edges[next].start, self.vertex_normals[next], self.edges[next].arc_start)
        } else {
            (e.start + e.dir * t, e.normal, e.arc_start + t)
        };
        BoundaryPoint { position, outward_normal: normal, arc_parameter: arc }
    }

    /// Centroid of the boundary curve, `σ(∂D)⁻¹ ∫ y dσ(y)`.
    pub fn boundary_centroid(&self) -> Vec2 {
        match self.shape {
            Shape::Disk { center, .. } => center,
            _ => {
                let sum = self
                    .edges
                    .iter()
                    .fold(Vec2::ZERO, |acc, e| acc + (e.start + e.dir * (0.5 * e.length)) * e.length);
                sum * (1.0 / self.perimeter)
            }
        }
    }

    /// Boundary point at arc parameter `s` (taken modulo the perimeter).
    pub fn boundary_point_at(&self, s: f64) -> BoundaryPoint {
        let s = s.rem_euclid(self.perimeter);
        match self.shape {
            Shape::Disk { center, radius } => {
                let u = Vec2::from_polar(1.0, s / radius);
                BoundaryPoint { position: center + u * radius, outward_normal: u, arc_parameter: s }
            }
            _ => {
                let idx = self
                    .edges
                    .iter()
                    .rposition(|e| e.arc_start <= s)
                    .unwrap_or(0);
                self.edge_point(idx, s - self.edges[idx].arc_start)
            }
        }
    }

    /// Uniform sample with respect to Lebesgue measure on D.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        match &self.shape {
            Shape::Disk { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                *center + Vec2::from_polar(r, TAU * rng.random::<f64>())
            }
            Shape::Rectangle { lo, hi } => {
                Vec2::new(lo.x + (hi.x - lo.x) * rng.random::<f64>(), lo.y + (hi.y - lo.y) * rng.random::<f64>())
            }
            Shape::Polygon { vertices } => {
                // fan triangulation from the first vertex
                let v0 = vertices[0];
                let mut target = rng.random::<f64>() * self.area;
                let mut tri = 1;
                for k in 1..vertices.len() - 1 {
                    tri = k;
                    let a = 0.5 * (vertices[k] - v0).cross(vertices[k + 1] - v0);
                    if target < a {
                        break;
                    }
                    target -= a;
                }
                let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                v0 + (vertices[tri] - v0) * u + (vertices[tri + 1] - v0) * v
            }
        }
    }

    /// Uniform sample with respect to arclength on ∂D.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> BoundaryPoint {
        self.boundary_point_at(rng.random::<f64>() * self.perimeter)
    }

    /// Equally spaced boundary points, starting at arc parameter `offset`.
    pub fn boundary_grid(&self, n: usize, offset: f64) -> Vec<BoundaryPoint> {
        (0..n)
            .map(|k| self.boundary_point_at(offset + self.perimeter * k as f64 / n as f64))
            .collect()
    }
}

/// A boundary arc `[start, start + length)` in arc parameter, wrapping modulo
/// the perimeter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub start: f64,
    pub end: f64,
}

impl Electrode {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, s: f64, perimeter: f64) -> bool {
        (s - self.start).rem_euclid(perimeter) < self.length()
    }

    /// The arc as at most two plain intervals inside `[0, perimeter)`.
    pub fn pieces(&self, perimeter: f64) -> Vec<(f64, f64)> {
        let a = self.start.rem_euclid(perimeter);
        let b = a + self.length();
        if b <= perimeter {
            vec![(a, b)]
        } else {
            vec![(a, perimeter), (0.0, b - perimeter)]
        }
    }
}

/// Electrode arcs, applied voltages and the shared contact impedance.
///
/// Induces the boundary source `f = U_l / z` and rate `g = 1 / z` on electrode
/// `l`, both zero in the gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct ElectrodeConfig {
    electrodes: Vec<Electrode>,
    voltages: Vec<f64>,
    contact_impedance: f64,
    perimeter: f64,
}

impl ElectrodeConfig {
    /// Validated configuration including the grounding condition `Σ U_l = 0`.
    pub fn new(
        electrodes: Vec<Electrode>,
        voltages: Vec<f64>,
        contact_impedance: f64,
        domain: &DomainGeometry,
    ) -> Result<Self> {
        let cfg = Self::without_grounding(electrodes, voltages, contact_impedance, domain)?;
        let sum: f64 = cfg.voltages.iter().sum();
        let scale = cfg.voltages.iter().fold(1.0f64, |m, u| m.max(u.abs()));
        if sum.abs() > 1e-12 * scale * cfg.voltages.len() as f64 {
            return Err(Error::InvalidElectrodes(format!("voltages must sum to zero (ground), got {sum}")));
        }
        Ok(cfg)
    }

    /// Same validation minus the grounding check. Used for diagnostics such as
    /// a single electrode covering the whole boundary.
    pub fn without_grounding(
        electrodes: Vec<Electrode>,
        voltages: Vec<f64>,
        contact_impedance: f64,
        domain: &DomainGeometry,
    ) -> Result<Self> {
        let perimeter = domain.boundary_measure();
        if electrodes.len() != voltages.len() {
            return Err(Error::InvalidElectrodes(format!(
                "{} electrodes but {} voltages",
                electrodes.len(),
                voltages.len()
            )));
        }
        if !(contact_impedance > 0.0 && contact_impedance.is_finite()) {
            return Err(Error::InvalidElectrodes(format!(
                "contact impedance must be positive, got {contact_impedance}"
            )));
        }
        let tol = 1e-12 * perimeter;
        for (l, e) in electrodes.iter().enumerate() {
            if !(e.length() > 0.0) || e.length() > perimeter + tol {
                return Err(Error::InvalidElectrodes(format!("electrode {l} has invalid length {}", e.length())));
            }
        }
        for i in 0..electrodes.len() {
            for j in i + 1..electrodes.len() {
                for (a0, a1) in electrodes[i].pieces(perimeter) {
                    for (b0, b1) in electrodes[j].pieces(perimeter) {
                        if a0.max(b0) < a1.min(b1) - tol {
                            return Err(Error::InvalidElectrodes(format!("electrodes {i} and {j} overlap")));
                        }
                    }
                }
            }
        }
        if voltages.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidElectrodes("voltages must be finite".into()));
        }
        Ok(Self { electrodes, voltages, contact_impedance, perimeter })
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }

    pub fn contact_impedance(&self) -> f64 {
        self.contact_impedance
    }

    /// Same layout with voltages multiplied by `alpha`.
    pub fn with_scaled_voltages(&self, alpha: f64) -> Self {
        Self { voltages: self.voltages.iter().map(|u| u * alpha).collect(), ..self.clone() }
    }

    pub fn electrode_at(&self, p: &BoundaryPoint) -> Option<usize> {
        self.electrode_at_arc(p.arc_parameter)
    }

    pub fn electrode_at_arc(&self, s: f64) -> Option<usize> {
        self.electrodes.iter().position(|e| e.contains(s, self.perimeter))
    }

    /// Boundary source f(p) = U_l / z on electrode l.
    pub fn source(&self, p: &BoundaryPoint) -> f64 {
        self.electrode_at(p).map_or(0.0, |l| self.voltages[l] / self.contact_impedance)
    }

    /// Boundary rate g(p) = 1 / z on any electrode.
    pub fn rate(&self, p: &BoundaryPoint) -> f64 {
        self.electrode_at(p).map_or(0.0, |_| 1.0 / self.contact_impedance)
    }

    pub fn max_abs_source(&self) -> f64 {
        self.voltages.iter().fold(0.0f64, |m, u| m.max(u.abs())) / self.contact_impedance
    }

    /// Exact integrals of (f, g) over the arc interval `[s0, s1]`, `s0 <= s1`.
    pub fn integrate_over(&self, s0: f64, s1: f64) -> (f64, f64) {
        let mut f = 0.0;
        let mut g = 0.0;
        for (l, e) in self.electrodes.iter().enumerate() {
            for (a, b) in e.pieces(self.perimeter) {
                // the query interval may itself extend past the perimeter
                for shift in [-self.perimeter, 0.0, self.perimeter] {
                    let overlap = (b + shift).min(s1) - (a + shift).max(s0);
                    if overlap > 0.0 {
                        f += overlap * self.voltages[l] / self.contact_impedance;
                        g += overlap / self.contact_impedance;
                    }
                }
            }
        }
        (f, g)
    }
}
