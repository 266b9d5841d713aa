//! Two-dimensional electrode problems with zero contact impedance: an exact
//! half-plane oracle, a graded finite element solver and tools for measuring
//! edge singularities.

pub mod asymptotics;
pub mod fem;
pub mod geometry;
pub mod hilbert_oracle;
pub mod quadrature;
pub mod registry;
