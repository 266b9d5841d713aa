//! Variationally consistent boundary flux.
//!
//! The residual of the discrete equations tested with the hat function of an
//! electrode vertex is the flux that vertex receives. Solving the electrode's
//! boundary mass system turns these nodal fluxes into a piecewise-linear
//! density whose integral over each electrode is exactly the summed residual.

use super::assembly::CemSystem;
use super::mesh::Mesh;
use super::FemError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySample {
    pub electrode: usize,
    pub vertex: usize,
    pub s: f64,
    pub dist_to_edge: f64,
    /// `sigma` times the outward normal derivative.
    pub value: f64,
}

/// Density samples on every electrode vertex, and the current through each electrode.
pub fn recover_boundary_flux(
    mesh: &Mesh,
    system: &CemSystem,
    nodal: &[f64],
) -> Result<(Vec<DensitySample>, Vec<f64>), FemError> {
    let ku = system.vertex_stiffness.mul_vec(nodal);
    let mut samples = Vec::new();
    let mut fluxes = Vec::with_capacity(system.n_electrodes);
    for k in 0..system.n_electrodes {
        let vs = mesh.electrode_vertices(k);
        let r: Vec<f64> = vs.iter().map(|&v| ku[v] - system.source_moments[v]).collect();
        fluxes.push(r.iter().sum());
        let lengths: Vec<f64> = vs
            .windows(2)
            .map(|w| (mesh.point(w[1]) - mesh.point(w[0])).norm())
            .collect();
        let q = solve_boundary_mass(&lengths, &r).ok_or(FemError::SingularBoundaryMass(k))?;
        for (&v, &value) in vs.iter().zip(&q) {
            samples.push(DensitySample {
                electrode: k,
                vertex: v,
                s: mesh.vertex_s[v].unwrap_or(f64::NAN),
                dist_to_edge: mesh.boundary_dist_to_edge(v).unwrap_or(f64::NAN),
                value,
            });
        }
    }
    Ok((samples, fluxes))
}

/// Solves the P1 mass system of a polyline with segment `lengths` by the
/// Thomas algorithm.
pub(super) fn solve_boundary_mass(lengths: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    if n != lengths.len() + 1 || lengths.iter().any(|&l| !(l > 0.0)) {
        return None;
    }
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i > 0 { lengths[i - 1] } else { 0.0 };
            let right = if i + 1 < n { lengths[i] } else { 0.0 };
            (left + right) / 3.0
        })
        .collect();
    let off: Vec<f64> = lengths.iter().map(|l| l / 6.0).collect();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return None;
    }
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if denom == 0.0 {
            return None;
        }
        c[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}
