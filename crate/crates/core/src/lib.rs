//! Monte Carlo forward solver for conductivity problems driven by reflecting
//! diffusions and their boundary local time.

pub mod acceptance;
pub mod boundary_data;
pub mod boundary_process;
pub mod conductivity;
pub mod error;
pub mod feynman_kac;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod sde;
pub mod stats;

pub use boundary_data::{BoundaryFunction, NeumannData};
pub use conductivity::{ConductivityField, FieldKind, GridField};
pub use error::{Error, Result};
pub use geometry::{BoundaryPoint, DomainGeometry, Electrode, ElectrodeConfig, Shape};
pub use linalg::{SymMat2, Vec2};
pub use sde::SimulationParams;
