//! Measuring edge singularities: power-law fits of boundary densities,
//! predicted exponents, angular gradient profiles and mesh convergence tables.

mod fit;
mod probe;
mod study;

pub use fit::{fit_power_law, predicted_exponent, BoundaryKind, FitResult, FitWindow};
pub use probe::{angular_profile_error, edge_frame, AngularProbe, EdgeFrame, ProbeSample};
pub use study::{
    away_from_edge_error, convergence_study, edge_samples, near_edge_error, oracle_edge_samples, write_study_csv,
    StudyOptions, StudyRow,
};

use thiserror::Error;

use crate::fem::FemError;
use crate::geometry::GeometryError;
use crate::hilbert_oracle::OracleError;

/// Fit window for FEM densities, as fractions of the electrode length.
pub const FEM_WINDOW_FRACTION: (f64, f64) = (1e-3, 5e-2);
/// Absolute fit window for oracle densities.
pub const ORACLE_WINDOW: (f64, f64) = (1e-6, 1e-4);
/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("{found} samples inside the window, at least {needed} required")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("sample {index} has non-positive distance or value ({dist}, {value})")]
    NonPositiveValue { index: usize, dist: f64, value: f64 },
    #[error("invalid fit window [{0}, {1}]")]
    InvalidWindow(f64, f64),
    #[error("corner angle {0} is outside (0, 2 pi)")]
    InvalidAngle(f64),
    #[error("probe point {0} lies outside the domain")]
    ProbeOutsideDomain(num_complex::Complex64),
    #[error("edge coefficient must be positive, got {0}")]
    NonPositiveCoefficient(f64),
    #[error("need at least 3 meshes, got {0}")]
    TooFewMeshes(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}
