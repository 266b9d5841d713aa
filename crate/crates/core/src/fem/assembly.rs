//! Stiffness and load with electrode DOF tying.

use num_complex::Complex64;
use rayon::prelude::*;

use super::conductivity::ConductivityField;
use super::mesh::Mesh;
use super::sparse::CsrMatrix;
use super::FemError;

/// Volume source `rho(x, y)`.
pub type Source<'a> = &'a (dyn Fn([f64; 2]) -> f64 + Sync);

/// Unknown attached to a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    Electrode(usize),
    Free(usize),
}

/// Tied linear system. DOFs `0..n_electrodes` are the electrode potentials,
/// the rest belong to vertices off the electrodes.
#[derive(Debug, Clone)]
pub struct CemSystem {
    pub stiffness: CsrMatrix,
    /// Untied vertex-level stiffness, used for flux recovery.
    pub vertex_stiffness: CsrMatrix,
    pub load: Vec<f64>,
    pub vertex_dof: Vec<usize>,
    pub n_electrodes: usize,
    pub currents: Vec<f64>,
    /// `(rho - mean(rho), phi_j)` per vertex.
    pub source_moments: Vec<f64>,
    /// Mean of `rho` removed to make the load compatible.
    pub source_mean: f64,
}

impl CemSystem {
    pub fn n_dofs(&self) -> usize {
        self.load.len()
    }

    pub fn dof_kind(&self, dof: usize) -> Dof {
        if dof < self.n_electrodes {
            Dof::Electrode(dof)
        } else {
            Dof::Free(dof)
        }
    }

    /// Vertex values from DOF values.
    pub fn expand(&self, dofs: &[f64]) -> Vec<f64> {
        self.vertex_dof.iter().map(|&d| dofs[d]).collect()
    }
}

/// P1 element stiffness for unit conductivity: `area * grad(phi_i) . grad(phi_j)`.
pub fn element_stiffness(p: &[Complex64; 3]) -> [[f64; 3]; 3] {
    let area2 = {
        let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
        e1.re * e2.im - e1.im * e2.re
    };
    // grad(phi_i) = J (p_{i+2} - p_{i+1}) / area2 with J the quarter turn
    let g: [Complex64; 3] = std::array::from_fn(|i| {
        let e = p[(i + 2) % 3] - p[(i + 1) % 3];
        Complex64::new(-e.im, e.re) / area2
    });
    let area = 0.5 * area2.abs();
    std::array::from_fn(|i| std::array::from_fn(|j| area * (g[i].re * g[j].re + g[i].im * g[j].im)))
}

/// Barycentric coordinates and weights (fractions of the area) of the
/// three-point interior rule.
const RULE3: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

struct ElementData {
    stiffness: [[f64; 3]; 3],
    source: [f64; 3],
}

pub fn assemble(
    mesh: &Mesh,
    sigma: &dyn ConductivityField,
    rho: Option<Source>,
    currents: &[f64],
) -> Result<CemSystem, FemError> {
    let n_el = mesh.layout.len();
    if currents.len() != n_el {
        return Err(FemError::CurrentCount {
            electrodes: n_el,
            currents: currents.len(),
        });
    }
    let net: f64 = currents.iter().sum();
    let scale = currents.iter().map(|j| j.abs()).sum::<f64>().max(1.0);
    if net.abs() > 1e-14 * scale {
        return Err(FemError::IncompatibleLoad(net));
    }

    let elements: Vec<ElementData> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let p = mesh.triangle_points(t);
            let area = mesh.area(t);
            let mut sigma_avg = 0.0;
            let mut source = [0.0; 3];
            for (bary, w) in RULE3 {
                let x = p[0] * bary[0] + p[1] * bary[1] + p[2] * bary[2];
                let s = sigma.sigma([x.re, x.im]);
                if !(s > 0.0) {
                    return Err(FemError::NonPositiveConductivity {
                        x: x.re,
                        y: x.im,
                        value: s,
                    });
                }
                sigma_avg += w * s;
                if let Some(rho) = rho {
                    let f = rho([x.re, x.im]);
                    for i in 0..3 {
                        source[i] += area * w * f * bary[i];
                    }
                }
            }
            let mut stiffness = element_stiffness(&p);
            stiffness.iter_mut().flatten().for_each(|k| *k *= sigma_avg);
            Ok(ElementData { stiffness, source })
        })
        .collect::<Result<_, _>>()?;

    let vertex_electrode = mesh.vertex_electrodes();
    let mut vertex_dof = vec![0; mesh.n_vertices()];
    let mut next = n_el;
    for (v, e) in vertex_electrode.iter().enumerate() {
        vertex_dof[v] = match e {
            Some(k) => *k,
            None => {
                next += 1;
                next - 1
            }
        };
    }
    let n_dofs = next;

    let mut vertex_triplets = Vec::with_capacity(9 * elements.len());
    let mut dof_triplets = Vec::with_capacity(9 * elements.len());
    let mut moments = vec![0.0; mesh.n_vertices()];
    let mut lumped = vec![0.0; mesh.n_vertices()];
    for (t, el) in elements.iter().enumerate() {
        let tri = mesh.triangles[t];
        let area = mesh.area(t);
        for i in 0..3 {
            moments[tri[i]] += el.source[i];
            lumped[tri[i]] += area / 3.0;
            for j in 0..3 {
                vertex_triplets.push((tri[i], tri[j], el.stiffness[i][j]));
                dof_triplets.push((vertex_dof[tri[i]], vertex_dof[tri[j]], el.stiffness[i][j]));
            }
        }
    }
    let total_area: f64 = lumped.iter().sum();
    let source_mean = moments.iter().sum::<f64>() / total_area;
    let source_moments: Vec<f64> = moments.iter().zip(&lumped).map(|(m, l)| m - source_mean * l).collect();

    let mut load = vec![0.0; n_dofs];
    load[..n_el].copy_from_slice(currents);
    for (v, m) in source_moments.iter().enumerate() {
        load[vertex_dof[v]] += m;
    }

    Ok(CemSystem {
        stiffness: CsrMatrix::from_triplets(n_dofs, &dof_triplets),
        vertex_stiffness: CsrMatrix::from_triplets(mesh.n_vertices(), &vertex_triplets),
        load,
        vertex_dof,
        n_electrodes: n_el,
        currents: currents.to_vec(),
        source_moments,
        source_mean,
    })
}
