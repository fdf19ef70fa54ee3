//! Run configuration: a TOML file validated on load.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use fk_eit::boundary_process::TraceSpec;
use fk_eit::conductivity::FieldKind;
use fk_eit::feynman_kac::ContinuumHorizon;
use fk_eit::oracle::{Inclusion, PiecewiseConstantField};
use fk_eit::{
    BoundaryFunction, ConductivityField, DomainGeometry, Electrode, ElectrodeConfig, GridField, NeumannData, Shape,
    SimulationParams, SymMat2, Vec2,
};

use crate::error::CliError;

fn one() -> usize {
    1
}

fn unit_disk() -> Shape {
    Shape::Disk { center: Vec2::ZERO, radius: 1.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Probe points `[x, y]` for the solve commands.
    #[serde(default)]
    pub probes: Vec<[f64; 2]>,
    #[serde(default = "unit_disk")]
    pub domain: Shape,
    #[serde(default)]
    pub conductivity: ConductivitySpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    pub dirichlet: Option<DirichletSpec>,
    pub continuum: Option<ContinuumSpec>,
    pub cem: Option<CemSpec>,
    pub dtn: Option<DtnSpec>,
    pub trace: Option<TraceSection>,
    pub oracle: Option<OracleSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Identity,
    Constant { matrix: SymMat2 },
    RadialIsotropic { center: Vec2, coefficients: Vec<f64> },
    SmoothBump { background: SymMat2, center: Vec2, radius: f64, amplitude: f64 },
    /// Isotropic nodal values from a CSV file, relative to the config file.
    GridCsv { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductivitySpec {
    pub field: FieldSpec,
    pub ellipticity_bound: f64,
    pub collar_width: Option<f64>,
}

impl Default for ConductivitySpec {
    fn default() -> Self {
        Self { field: FieldSpec::Identity, ellipticity_bound: 1.0, collar_width: None }
    }
}

/// Unset fields take the domain defaults of [`SimulationParams::for_domain`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub n_paths: usize,
    pub dt: Option<f64>,
    pub local_time_constant: Option<f64>,
    pub max_time: Option<f64>,
    pub kill_threshold: Option<f64>,
    pub boundary_dt: Option<f64>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { n_paths: 10_000, dt: None, local_time_constant: None, max_time: None, kill_threshold: None, boundary_dt: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSpec {
    pub boundary: BoundaryFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumSpec {
    /// Current density; must integrate to zero over ∂D.
    pub flux: BoundaryFunction,
    /// Overrides the grid estimate of the ergodic rate.
    pub spectral_gap: Option<f64>,
    #[serde(default = "default_gap_resolution")]
    pub gap_resolution: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_offset")]
    pub offset: f64,
}

fn default_gap_resolution() -> usize {
    32
}

fn default_tolerance() -> f64 {
    ContinuumHorizon::DEFAULT_TOLERANCE
}

fn default_offset() -> f64 {
    ContinuumHorizon::DEFAULT_OFFSET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CemSpec {
    pub electrodes: Vec<Electrode>,
    pub voltages: Vec<f64>,
    pub contact_impedance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtnSpec {
    pub phi: BoundaryFunction,
    /// Local-time step of the forward difference.
    #[serde(default = "default_dtn_t")]
    pub t: f64,
    pub n_starts: usize,
}

fn default_dtn_t() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    /// Local-time horizon S.
    pub horizon: f64,
    pub spacing: f64,
    pub jump_threshold: Option<f64>,
    pub n_starts: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub min_gap: f64,
}

fn default_bins() -> usize {
    16
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Dirichlet,
    Continuum,
    Cem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub problem: OracleKind,
    pub resolution: usize,
    /// With a background the grid solve uses this piecewise-constant field
    /// instead of the conductivity section.
    pub background: Option<f64>,
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
}

/// A validated configuration with every engine object built.
pub struct Setup {
    pub config: RunConfig,
    pub domain: DomainGeometry,
    pub field: ConductivityField,
    pub params: SimulationParams,
    pub probes: Vec<Vec2>,
    pub neumann: Option<NeumannData>,
    pub electrodes: Option<ElectrodeConfig>,
    pub piecewise: Option<PiecewiseConstantField>,
}

fn invalid(what: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{what}: {e}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Builds and checks every object the configuration describes. Relative
    /// paths resolve against `base`.
    pub fn setup(self, base: &Path) -> Result<Setup, CliError> {
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if self.simulation.n_paths < 2 {
            return Err(CliError::Config("simulation.n_paths must be at least 2".into()));
        }
        let domain = DomainGeometry::new(self.domain.clone()).map_err(|e| invalid("domain", e))?;
        let field = self.build_field(&domain, base)?;

        let defaults = SimulationParams::for_domain(&domain);
        let s = &self.simulation;
        let params = SimulationParams {
            dt: s.dt.unwrap_or(defaults.dt),
            local_time_constant: s.local_time_constant.unwrap_or(defaults.local_time_constant),
            seed: self.seed,
            max_time: s.max_time.unwrap_or(defaults.max_time),
            kill_threshold: s.kill_threshold.unwrap_or(defaults.kill_threshold),
            boundary_dt: s.boundary_dt,
            workers: self.workers,
        };
        params.validate().map_err(|e| invalid("simulation", e))?;

        let probes: Vec<Vec2> = self.probes.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        if let Some(p) = probes.iter().find(|p| !domain.contains(**p)) {
            return Err(CliError::Config(format!("probe ({}, {}) lies outside the domain", p.x, p.y)));
        }
        if let Some(d) = &self.dirichlet {
            d.boundary.validate().map_err(|e| invalid("dirichlet.boundary", e))?;
        }
        let neumann = match &self.continuum {
            Some(c) => {
                if let Some(g) = c.spectral_gap {
                    if !(g > 0.0) {
                        return Err(CliError::Config(format!("continuum.spectral_gap must be positive, got {g}")));
                    }
                }
                ContinuumHorizon { rate: 1.0, offset: c.offset, tolerance: c.tolerance }
                    .validate()
                    .map_err(|e| invalid("continuum", e))?;
                Some(NeumannData::new(c.flux.clone(), &domain).map_err(|e| invalid("continuum.flux", e))?)
            }
            None => None,
        };
        let electrodes = match &self.cem {
            Some(c) => Some(
                ElectrodeConfig::new(c.electrodes.clone(), c.voltages.clone(), c.contact_impedance, &domain)
                    .map_err(|e| invalid("cem", e))?,
            ),
            None => None,
        };
        if let Some(d) = &self.dtn {
            d.phi.validate().map_err(|e| invalid("dtn.phi", e))?;
            if !(d.t > 0.0) || d.n_starts == 0 {
                return Err(CliError::Config("dtn needs t > 0 and at least one start".into()));
            }
        }
        if let Some(t) = &self.trace {
            t.spec().validate().map_err(|e| invalid("trace", e))?;
            if t.n_starts == 0 || t.bins == 0 || !(t.min_gap >= 0.0) {
                return Err(CliError::Config("trace needs starts, bins and a nonnegative min_gap".into()));
            }
        }
        let piecewise = match &self.oracle {
            Some(o) => {
                if o.resolution < 2 {
                    return Err(CliError::Config("oracle.resolution must be at least 2".into()));
                }
                match o.background {
                    Some(b) => Some(PiecewiseConstantField { background: b, inclusions: o.inclusions.clone() }),
                    None if o.inclusions.is_empty() => None,
                    None => return Err(CliError::Config("oracle inclusions need a background value".into())),
                }
            }
            None => None,
        };
        Ok(Setup { config: self, domain, field, params, probes, neumann, electrodes, piecewise })
    }

    fn build_field(&self, domain: &DomainGeometry, base: &Path) -> Result<ConductivityField, CliError> {
        let c = &self.conductivity;
        let kind = match &c.field {
            FieldSpec::Identity => FieldKind::Constant { matrix: SymMat2::IDENTITY },
            FieldSpec::Constant { matrix } => FieldKind::Constant { matrix: *matrix },
            FieldSpec::RadialIsotropic { center, coefficients } => {
                FieldKind::RadialIsotropic { center: *center, coefficients: coefficients.clone() }
            }
            FieldSpec::SmoothBump { background, center, radius, amplitude } => FieldKind::SmoothBump {
                background: *background,
                center: *center,
                radius: *radius,
                amplitude: *amplitude,
            },
            FieldSpec::GridCsv { path } => {
                let grid = GridField::from_csv_file(&base.join(path)).map_err(|e| invalid("conductivity grid", e))?;
                FieldKind::Grid(grid)
            }
        };
        let mut field = ConductivityField::new(kind, c.ellipticity_bound).map_err(|e| invalid("conductivity", e))?;
        if let Some(w) = c.collar_width {
            field = field.with_collar(w, domain).map_err(|e| invalid("conductivity.collar_width", e))?;
        }
        let mut rng = rand::rngs::StdRng::seed_from_u64(self.seed);
        let report = field.check_ellipticity(domain, 2000, &mut rng);
        if !report.passed {
            return Err(CliError::Config(format!(
                "conductivity exceeds its declared ellipticity bound {} (sampled {})",
                report.declared, report.estimate
            )));
        }
        Ok(field)
    }
}

impl TraceSection {
    pub fn spec(&self) -> TraceSpec {
        TraceSpec { horizon: self.horizon, spacing: self.spacing, jump_threshold: self.jump_threshold }
    }
}

/// Reads, parses and validates a configuration file, then applies command
/// line overrides.
pub fn load(path: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<Setup, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::from_toml(&text)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(w) = workers {
        config.workers = w;
    }
    config.setup(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CEM: &str = r#"
seed = 5
probes = [[0.5, 0.0], [0.0, 0.5]]

[simulation]
n_paths = 100
dt = 4e-4

[cem]
contact_impedance = 1.0
electrodes = [{ start = 0.0, end = 3.141592653589793 }, { start = 3.141592653589793, end = 6.283185307179586 }]
voltages = [1.0, -1.0]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml(CEM).unwrap();
        assert_eq!(c.workers, 1);
        assert_eq!(c.domain, unit_disk());
        assert_eq!(c.conductivity, ConductivitySpec::default());
        let s = c.setup(Path::new(".")).unwrap();
        assert_eq!(s.params.dt, 4e-4);
        assert_eq!(s.params.kill_threshold, 1e-6);
        assert_eq!(s.probes.len(), 2);
        assert!(s.electrodes.is_some());
    }

    #[test]
    fn json_echo_reparses() {
        let c = RunConfig::from_toml(CEM).unwrap();
        let echo = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&echo).unwrap(), c);
        let again = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&again).unwrap(), c);
    }

    #[test]
    fn validation_failures() {
        let ungrounded = CEM.replace("[1.0, -1.0]", "[1.0, 0.5]");
        assert!(RunConfig::from_toml(&ungrounded).unwrap().setup(Path::new(".")).is_err());
        let bad_dt = CEM.replace("dt = 4e-4", "dt = -1.0");
        assert!(RunConfig::from_toml(&bad_dt).unwrap().setup(Path::new(".")).is_err());
        let outside = CEM.replace("[0.0, 0.5]]", "[0.0, 1.5]]");
        assert!(RunConfig::from_toml(&outside).unwrap().setup(Path::new(".")).is_err());
        let flux = format!("{CEM}\n[continuum]\nflux = {{ type = \"constant\", value = 1.0 }}\n");
        assert!(RunConfig::from_toml(&flux).unwrap().setup(Path::new(".")).is_err());
        let field = format!(
            "{CEM}\n[conductivity]\nellipticity_bound = 2.0\n[conductivity.field]\nkind = \"constant\"\nmatrix = {{ xx = 4.0, xy = 0.0, yy = 0.25 }}\n"
        );
        assert!(RunConfig::from_toml(&field).unwrap().setup(Path::new(".")).is_err());
        assert!(RunConfig::from_toml("sed = 3").is_err());
    }
}
