//! Square-root enrichment at electrode endpoints.
//!
//! Each endpoint `e` gets one extra unknown multiplying
//! `psi_e = chi(|x - x_e|) * Im(c_e sqrt(Z(x) - Z_e))`, where `Z` is a chart
//! onto the upper half-plane and `c_e` is `1` when the electrode lies at
//! `Z > Z_e` and `i` otherwise. The function vanishes identically on the
//! electrode and has zero normal derivative on the adjacent gap, so electrode
//! tying is untouched. Near a smooth boundary point it is `sqrt(r) sin(theta/2)`
//! up to a constant, with `theta` measured from the electrode.

use num_complex::Complex64;
use rayon::prelude::*;

use super::assembly::{assemble, CemSystem, Source};
use super::conductivity::ConductivityField;
use super::mesh::Mesh;
use super::recovery::{solve_boundary_mass, DensitySample};
use super::solve::{CemSolution, SolverOptions};
use super::sparse::{dot, pcg, CsrMatrix};
use super::FemError;
use crate::geometry::{chart_away_from_electrodes, EdgeScale, HalfPlaneChart};
use crate::quadrature::{integrate_triangle_near_point, legendre, point_segment_distance, point_triangle_distance};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Gauss points per boundary segment for the singular density moments.
const SEGMENT_NODES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnrichmentOptions {
    /// Cutoff radius; `None` picks 0.48 times the smallest endpoint spacing,
    /// at most half the domain scale.
    pub radius: Option<f64>,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEnrichment {
    /// Boundary parameter of the endpoint.
    pub s: f64,
    pub electrode: usize,
    pub center: Complex64,
    rotation: Complex64,
    scale: EdgeScale,
}

/// The enrichment functions of every electrode endpoint of a mesh.
#[derive(Debug)]
pub struct EnrichmentBasis {
    chart: Box<dyn HalfPlaneChart>,
    pub edges: Vec<EdgeEnrichment>,
    pub radius: f64,
}

impl EnrichmentBasis {
    pub fn new(mesh: &Mesh, radius: Option<f64>) -> Result<Self, FemError> {
        let domain = mesh.domain;
        let chart = chart_away_from_electrodes(&domain, &mesh.layout)?;
        let mut edges = Vec::new();
        for (k, arc) in mesh.layout.arcs.iter().enumerate() {
            for (s, rotation) in [(arc.start, Complex64::new(1.0, 0.0)), (arc.end, I)] {
                edges.push(EdgeEnrichment {
                    s,
                    electrode: k,
                    center: domain.boundary_point(s)?,
                    rotation,
                    scale: chart.edge_scale(s)?,
                });
            }
        }
        let mut spacing = f64::INFINITY;
        for (i, a) in edges.iter().enumerate() {
            for b in &edges[i + 1..] {
                spacing = spacing.min((a.center - b.center).norm());
            }
        }
        let scale = match domain {
            crate::geometry::DomainSpec::Wedge { radius, .. } => radius,
            _ => 1.0,
        };
        let radius = radius.unwrap_or_else(|| (0.48 * spacing).min(0.5 * scale));
        if !(radius > 0.0) || 2.0 * radius >= spacing {
            return Err(FemError::OverlappingCutoffs { radius, spacing });
        }
        Ok(EnrichmentBasis { chart, edges, radius })
    }

    fn is_endpoint(&self, p: Complex64) -> bool {
        self.edges.iter().any(|e| (e.center - p).norm() <= 1e-12 * self.radius)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Smooth bump `exp(rho^2 / (rho^2 - 1))` with `rho = r / radius`; even in
    /// `r`, so it leaves the singular term untouched at the endpoint.
    fn cutoff(&self, r: f64) -> (f64, f64) {
        let rho = r / self.radius;
        if rho >= 1.0 {
            return (0.0, 0.0);
        }
        let q = rho * rho - 1.0;
        let chi = (rho * rho / q).exp();
        (chi, -2.0 * rho / (q * q) * chi / self.radius)
    }

    /// `Im(c sqrt(zeta))` and its complex derivative, with `arg zeta` taken in
    /// `[0, pi]` so that boundary points are evaluated from inside.
    fn half_plane_part(edge: &EdgeEnrichment, zeta: Complex64) -> (f64, Complex64) {
        let rho = zeta.norm();
        if rho == 0.0 {
            return (0.0, Complex64::new(0.0, 0.0));
        }
        let theta = zeta.im.max(0.0).atan2(zeta.re);
        let root = Complex64::from_polar(rho.sqrt(), 0.5 * theta);
        ((edge.rotation * root).im, edge.rotation / (2.0 * root))
    }

    fn raw(&self, k: usize, p: Complex64) -> Result<(f64, Complex64), FemError> {
        let edge = &self.edges[k];
        let (z, dz) = self.chart.map(p)?;
        let (v, dg) = Self::half_plane_part(edge, z - edge.scale.z_e);
        Ok((v, dg * dz))
    }

    pub fn value(&self, k: usize, p: Complex64) -> Result<f64, FemError> {
        let (chi, _) = self.cutoff((p - self.edges[k].center).norm());
        if chi == 0.0 {
            return Ok(0.0);
        }
        Ok(chi * self.raw(k, p)?.0)
    }

    /// Physical gradient `(d/dx, d/dy)` as a complex number.
    pub fn gradient(&self, k: usize, p: Complex64) -> Result<Complex64, FemError> {
        let d = p - self.edges[k].center;
        let r = d.norm();
        let (chi, dchi) = self.cutoff(r);
        if chi == 0.0 || r == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (v, h) = self.raw(k, p)?;
        // for holomorphic H: grad Im H = (Im H', Re H')
        let grad = Complex64::new(h.im, h.re);
        Ok(chi * grad + dchi * v * d / r)
    }

    /// Signed edge coefficient carried by a unit coefficient of function `k`,
    /// in the convention `density ~ A dist^(lambda - 1)`.
    pub fn unit_edge_coefficient(&self, k: usize) -> f64 {
        let scale = &self.edges[k].scale;
        -scale.lambda * scale.k.sqrt()
    }

    /// Outward normal derivative of function `k` at `p` for the outward unit
    /// normal `normal`.
    fn normal_derivative(&self, k: usize, p: Complex64, normal: Complex64) -> Result<f64, FemError> {
        let g = self.gradient(k, p)?;
        Ok(g.re * normal.re + g.im * normal.im)
    }
}

/// Enriched solve result. `solution.dofs` holds the P1 unknowns followed by
/// one coefficient per endpoint; density samples at the endpoints themselves
/// are omitted because the singular part is unbounded there.
#[derive(Debug)]
pub struct EnrichedSolution {
    pub solution: CemSolution,
    pub basis: EnrichmentBasis,
    pub coefficients: Vec<f64>,
    /// Signed edge coefficient estimate per endpoint, same order as `basis.edges`.
    pub edge_coefficients: Vec<f64>,
    /// Assembled `a(psi_k, psi_k)`.
    pub self_energy: Vec<f64>,
}

struct TriangleCoupling {
    triangle: usize,
    edge: usize,
    /// `a(psi, phi_i)` for the three vertices, `a(psi, psi)` and `(rho, psi)`.
    values: [f64; 5],
}

pub fn solve_enriched(
    mesh: &Mesh,
    sigma: &dyn ConductivityField,
    rho: Option<Source>,
    currents: &[f64],
    options: &EnrichmentOptions,
) -> Result<EnrichedSolution, FemError> {
    let system = assemble(mesh, sigma, rho, currents)?;
    let basis = EnrichmentBasis::new(mesh, options.radius)?;
    let couplings = enrichment_integrals(mesh, &basis, sigma, rho, system.source_mean)?;

    let n = system.n_dofs();
    let m = basis.len();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(system.stiffness.nnz() + 8 * couplings.len());
    for r in 0..n {
        triplets.extend(system.stiffness.row(r).map(|(c, v)| (r, c, v)));
    }
    let mut vertex_coupling = vec![vec![0.0; mesh.n_vertices()]; m];
    let mut enriched_load = vec![0.0; m];
    let mut self_energy = vec![0.0; m];
    for c in &couplings {
        let tri = mesh.triangles[c.triangle];
        let e = n + c.edge;
        for i in 0..3 {
            let d = system.vertex_dof[tri[i]];
            triplets.push((d, e, c.values[i]));
            triplets.push((e, d, c.values[i]));
            vertex_coupling[c.edge][tri[i]] += c.values[i];
        }
        triplets.push((e, e, c.values[3]));
        self_energy[c.edge] += c.values[3];
        enriched_load[c.edge] += c.values[4];
    }
    let stiffness = CsrMatrix::from_triplets(n + m, &triplets);
    let mut load = system.load.clone();
    load.extend_from_slice(&enriched_load);

    let reduced = stiffness.without(0);
    let mut x = vec![0.0; n + m - 1];
    let outcome = pcg(
        &reduced,
        &load[1..],
        &mut x,
        options.solver.rel_tol,
        options.solver.max_iter,
    );
    if !(outcome.residual <= options.solver.fail_tol) {
        return Err(FemError::NonConvergence {
            iterations: outcome.iterations,
            residual: outcome.residual,
        });
    }
    let mut dofs = Vec::with_capacity(n + m);
    dofs.push(0.0);
    dofs.extend_from_slice(&x);
    let n_el = system.n_electrodes;
    if n_el > 0 {
        let shift = dofs[..n_el].iter().sum::<f64>() / n_el as f64;
        dofs[..n].iter_mut().for_each(|v| *v -= shift);
    }
    let coefficients = dofs[n..].to_vec();
    let nodal = system.expand(&dofs[..n]);
    let energy = dot(&dofs, &stiffness.mul_vec(&dofs));
    let source_work = dot(&system.source_moments, &nodal) + dot(&coefficients, &enriched_load);
    let (density, fluxes) =
        recover_enriched_flux(mesh, &system, &basis, sigma, &nodal, &vertex_coupling, &coefficients)?;
    let edge_coefficients = coefficients
        .iter()
        .enumerate()
        .map(|(k, c)| c * basis.unit_edge_coefficient(k))
        .collect();
    Ok(EnrichedSolution {
        solution: CemSolution {
            potentials: dofs[..n_el].to_vec(),
            nodal,
            dofs,
            energy,
            source_work,
            fluxes,
            density,
            iterations: outcome.iterations,
            residual: outcome.residual,
        },
        basis,
        coefficients,
        edge_coefficients,
        self_energy,
    })
}

fn enrichment_integrals(
    mesh: &Mesh,
    basis: &EnrichmentBasis,
    sigma: &dyn ConductivityField,
    rho: Option<Source>,
    source_mean: f64,
) -> Result<Vec<TriangleCoupling>, FemError> {
    let jobs: Vec<(usize, usize)> = (0..basis.len())
        .flat_map(|k| {
            let center = basis.edges[k].center;
            (0..mesh.n_triangles())
                .filter(move |&t| point_triangle_distance(center, &mesh.triangle_points(t)) < basis.radius)
                .map(move |t| (t, k))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(t, k)| {
            let p = mesh.triangle_points(t);
            let area2 = mesh.signed_area2(t);
            let grads: [Complex64; 3] = std::array::from_fn(|i| {
                let e = p[(i + 2) % 3] - p[(i + 1) % 3];
                Complex64::new(-e.im, e.re) / area2
            });
            let mut failure = None;
            let values = integrate_triangle_near_point(&p, basis.edges[k].center, &mut |x| {
                let g = match basis.gradient(k, x) {
                    Ok(g) => g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return [0.0; 5];
                    }
                };
                let s = sigma.sigma([x.re, x.im]);
                let source = match rho {
                    Some(rho) => (rho([x.re, x.im]) - source_mean) * basis.value(k, x).unwrap_or(0.0),
                    None => 0.0,
                };
                let a = |q: Complex64| s * (g.re * q.re + g.im * q.im);
                [a(grads[0]), a(grads[1]), a(grads[2]), s * g.norm_sqr(), source]
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(TriangleCoupling {
                    triangle: t,
                    edge: k,
                    values,
                }),
            }
        })
        .collect()
}

/// Consistent recovery with the singular part split off: the residual minus
/// the boundary moments of the enrichment densities is projected onto P1.
fn recover_enriched_flux(
    mesh: &Mesh,
    system: &CemSystem,
    basis: &EnrichmentBasis,
    sigma: &dyn ConductivityField,
    nodal: &[f64],
    vertex_coupling: &[Vec<f64>],
    coefficients: &[f64],
) -> Result<(Vec<DensitySample>, Vec<f64>), FemError> {
    let ku = system.vertex_stiffness.mul_vec(nodal);
    let singular_density = |x: Complex64, normal: Complex64| -> Result<f64, FemError> {
        let mut sum = 0.0;
        for (k, c) in coefficients.iter().enumerate() {
            if *c != 0.0 && (x - basis.edges[k].center).norm() < basis.radius {
                sum += c * basis.normal_derivative(k, x, normal)?;
            }
        }
        Ok(sum * sigma.sigma([x.re, x.im]))
    };
    let mut samples = Vec::new();
    let mut fluxes = Vec::with_capacity(system.n_electrodes);
    for el in 0..system.n_electrodes {
        let vs = mesh.electrode_vertices(el);
        let mut r: Vec<f64> = vs
            .iter()
            .map(|&v| {
                ku[v] - system.source_moments[v]
                    + coefficients
                        .iter()
                        .zip(vertex_coupling)
                        .map(|(c, col)| c * col[v])
                        .sum::<f64>()
            })
            .collect();
        fluxes.push(r.iter().sum());
        let near = |a: Complex64, b: Complex64| {
            basis
                .edges
                .iter()
                .any(|e| point_segment_distance(e.center, a, b) < basis.radius)
        };
        for i in 0..vs.len().saturating_sub(1) {
            let (a, b) = (mesh.point(vs[i]), mesh.point(vs[i + 1]));
            if !near(a, b) {
                continue;
            }
            let normal = -I * (b - a) / (b - a).norm();
            let len = (b - a).norm();
            // substitute toward whichever end is an endpoint to remove the 1/sqrt
            let at_a = basis.is_endpoint(a);
            let at_b = basis.is_endpoint(b);
            let mut failure = None;
            let mut moment = |phi_a: bool| {
                let mut f = |u: f64| {
                    let x = a + (b - a) * u;
                    let w = if phi_a { 1.0 - u } else { u };
                    singular_density(x, normal).map(|d| d * w * len).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        0.0
                    })
                };
                if at_a {
                    legendre(0.0, 1.0, SEGMENT_NODES, |t| f(t * t) * 2.0 * t)
                } else if at_b {
                    legendre(0.0, 1.0, SEGMENT_NODES, |t| f(1.0 - t * t) * 2.0 * t)
                } else {
                    legendre(0.0, 1.0, SEGMENT_NODES, f)
                }
            };
            let ma = moment(true);
            let mb = moment(false);
            if let Some(e) = failure {
                return Err(e);
            }
            r[i] -= ma;
            r[i + 1] -= mb;
        }
        let lengths: Vec<f64> = vs
            .windows(2)
            .map(|w| (mesh.point(w[1]) - mesh.point(w[0])).norm())
            .collect();
        let q = solve_boundary_mass(&lengths, &r).ok_or(FemError::SingularBoundaryMass(el))?;
        for (i, (&v, &regular)) in vs.iter().zip(&q).enumerate() {
            let x = mesh.point(v);
            if basis.is_endpoint(x) {
                continue;
            }
            // outward normal at a vertex: average of the adjacent segments
            let prev = mesh.point(vs[i.saturating_sub(1)]);
            let next = mesh.point(vs[(i + 1).min(vs.len() - 1)]);
            let t = next - prev;
            let normal = -I * t / t.norm();
            samples.push(DensitySample {
                electrode: el,
                vertex: v,
                s: mesh.vertex_s[v].unwrap_or(f64::NAN),
                dist_to_edge: mesh.boundary_dist_to_edge(v).unwrap_or(f64::NAN),
                value: regular + singular_density(x, normal)?,
            });
        }
    }
    Ok((samples, fluxes))
}
