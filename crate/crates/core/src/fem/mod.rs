//! Piecewise-linear finite elements for `-div(sigma grad u) = rho` with
//! shunt electrodes: every vertex on electrode `i` carries the single unknown
//! `U_i`, and the injected current `J_i` enters the load at that unknown.

mod assembly;
pub mod conductivity;
mod enrichment;
mod mesh;
mod meshgen;
mod recovery;
mod solve;
pub mod sparse;

pub use assembly::{assemble, element_stiffness, CemSystem, Dof, Source};
pub use conductivity::{conductivity_by_name, ConductivityField, Constant, GaussianBump, LinearX};
pub use enrichment::{solve_enriched, EdgeEnrichment, EnrichedSolution, EnrichmentBasis, EnrichmentOptions};
pub use mesh::{Band, BoundaryEdge, BoundaryLabel, Grading, Mesh};
pub use meshgen::{generate_graded_mesh, MIN_ANGLE_DEG};
pub use recovery::{recover_boundary_flux, DensitySample};
pub use solve::{solve, CemSolution, SolverOptions};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::quadrature::QuadratureError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("electrode layout conflicts with the domain: {0}")]
    LayoutConflict(GeometryError),
    #[error("only bounded domains can be meshed")]
    UnboundedDomain,
    #[error("invalid grading parameters {0:?}")]
    InvalidGrading(Grading),
    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),
    #[error("minimum angle {min_angle_deg:.2} degrees is below the quality limit")]
    GradingTooAggressive { min_angle_deg: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh file: {0}")]
    MeshFormat(String),
    #[error("conductivity {value} at ({x}, {y}) is not positive")]
    NonPositiveConductivity { x: f64, y: f64, value: f64 },
    #[error("unknown conductivity field `{0}`")]
    UnknownConductivity(String),
    #[error("{currents} currents for {electrodes} electrodes")]
    CurrentCount { electrodes: usize, currents: usize },
    #[error("load is incompatible with the pure Neumann structure (net current {0:e})")]
    IncompatibleLoad(f64),
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("boundary mass matrix of electrode {0} is singular")]
    SingularBoundaryMass(usize),
    #[error("enrichment cutoffs overlap (radius {radius} vs endpoint spacing {spacing})")]
    OverlappingCutoffs { radius: f64, spacing: f64 },
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] QuadratureError),
}
