//! Deterministic reference solutions: closed forms on the disk and a
//! finite-volume solver on rectangles and disks.

pub mod analytic;
pub mod fd;

pub use analytic::{
    disk_dirichlet_analytic, disk_dtn, disk_neumann_analytic, disk_neumann_gap, disk_robin_analytic,
    FourierBoundaryData,
};
pub use fd::{
    fd_solve, richardson_error, spectral_gap, GridSolution, GridSpec, Inclusion, OracleProblem,
    PiecewiseConstantField, ScalarConductivity,
};
