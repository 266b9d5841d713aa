use super::assembly::CemSystem;
use super::mesh::Mesh;
use super::recovery::{recover_boundary_flux, DensitySample};
use super::sparse::{dot, pcg};
use super::FemError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target relative residual of the grounded system.
    pub rel_tol: f64,
    /// Residual above which the solve is reported as failed.
    pub fail_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_tol: 1e-13,
            fail_tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CemSolution {
    /// `u_h` at every vertex.
    pub nodal: Vec<f64>,
    /// Electrode potentials, zero sum.
    pub potentials: Vec<f64>,
    /// Solution in DOF numbering.
    pub dofs: Vec<f64>,
    /// `a(u_h, u_h)`.
    pub energy: f64,
    /// `(rho, u_h)` with the compatible (mean-free) source.
    pub source_work: f64,
    /// Current through each electrode from the recovered density.
    pub fluxes: Vec<f64>,
    pub density: Vec<DensitySample>,
    pub iterations: usize,
    pub residual: f64,
}

impl CemSolution {
    /// `sum_i J_i U_i + (rho, u_h)`, which equals the energy for the exact
    /// discrete solution.
    pub fn work(&self, currents: &[f64]) -> f64 {
        dot(currents, &self.potentials) + self.source_work
    }
}

/// Grounds by fixing the first DOF, solves with conjugate gradients, then
/// shifts so the electrode potentials sum to zero.
pub fn solve(mesh: &Mesh, system: &CemSystem, options: &SolverOptions) -> Result<CemSolution, FemError> {
    let n = system.n_dofs();
    let net: f64 = system.currents.iter().sum();
    let scale = system.currents.iter().map(|j| j.abs()).sum::<f64>().max(1.0);
    if net.abs() > 1e-14 * scale {
        return Err(FemError::IncompatibleLoad(net));
    }
    let reduced = system.stiffness.without(0);
    let b = &system.load[1..];
    let mut x = vec![0.0; n - 1];
    let outcome = pcg(&reduced, b, &mut x, options.rel_tol, options.max_iter);
    if !(outcome.residual <= options.fail_tol) {
        return Err(FemError::NonConvergence {
            iterations: outcome.iterations,
            residual: outcome.residual,
        });
    }
    let mut dofs = Vec::with_capacity(n);
    dofs.push(0.0);
    dofs.extend_from_slice(&x);
    let n_el = system.n_electrodes;
    if n_el > 0 {
        let shift = dofs[..n_el].iter().sum::<f64>() / n_el as f64;
        if shift != 0.0 {
            dofs.iter_mut().for_each(|v| *v -= shift);
        }
    }
    let nodal = system.expand(&dofs);
    let energy = dot(&dofs, &system.stiffness.mul_vec(&dofs));
    let source_work = dot(&system.source_moments, &nodal);
    let (density, fluxes) = recover_boundary_flux(mesh, system, &nodal)?;
    Ok(CemSolution {
        potentials: dofs[..n_el].to_vec(),
        nodal,
        dofs,
        energy,
        source_work,
        fluxes,
        density,
        iterations: outcome.iterations,
        residual: outcome.residual,
    })
}
