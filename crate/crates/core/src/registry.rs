//! Forward solvers behind one interface, selectable by name.

use thiserror::Error;

use crate::asymptotics::{
    edge_samples, fit_power_law, predicted_exponent, AsymptoticsError, BoundaryKind, FitWindow, FEM_WINDOW_FRACTION,
};
use crate::fem::{
    assemble, generate_graded_mesh, solve, solve_enriched, CemSolution, ConductivityField, DensitySample,
    EnrichmentOptions, FemError, Grading, Mesh, SolverOptions,
};
use crate::geometry::{chart_away_from_electrodes, CurrentPattern, DomainSpec, ElectrodeLayout, GeometryError};
use crate::hilbert_oracle::{MappedOracle, OracleError, ProfileRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForwardError {
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
    #[error("solver `{solver}` does not support this problem: {reason}")]
    Unsupported { solver: &'static str, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardProblem<'a> {
    pub domain: DomainSpec,
    pub layout: &'a ElectrodeLayout,
    pub currents: &'a CurrentPattern,
    pub sigma: &'a dyn ConductivityField,
    pub grading: Grading,
    pub solver: SolverOptions,
    /// Oracle profile points per electrode and per gap.
    pub profile_points: usize,
    /// FEM fit window as fractions of the electrode length.
    pub window_fraction: (f64, f64),
}

impl<'a> ForwardProblem<'a> {
    pub fn new(
        domain: DomainSpec,
        layout: &'a ElectrodeLayout,
        currents: &'a CurrentPattern,
        sigma: &'a dyn ConductivityField,
    ) -> Self {
        ForwardProblem {
            domain,
            layout,
            currents,
            sigma,
            grading: Grading::default(),
            solver: SolverOptions::default(),
            profile_points: 64,
            window_fraction: FEM_WINDOW_FRACTION,
        }
    }
}

/// Behaviour at one electrode endpoint. Fields a solver cannot provide are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEstimate {
    pub s: f64,
    pub electrode: usize,
    pub exponent: Option<f64>,
    /// Edge coefficient, positive.
    pub coefficient: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub solver: &'static str,
    pub potentials: Vec<f64>,
    pub energy: f64,
    /// Current through each electrode, integrated from the density.
    pub fluxes: Vec<f64>,
    /// Conjugate-gradient iterations (0 for the oracle).
    pub iterations: usize,
    pub residual: f64,
    pub dofs: usize,
    pub profile: Vec<ProfileRow>,
    pub edges: Vec<EdgeEstimate>,
    pub mesh: Option<Mesh>,
}

pub trait ForwardSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &ForwardProblem) -> Result<ForwardSolution, ForwardError>;
}

/// Exact solution through a conformal chart onto the half-plane (constant
/// conductivity only).
pub struct OracleSolver;

/// Piecewise-linear FEM on the graded mesh of the problem; edge behaviour is
/// fitted from the recovered density.
pub struct FemSolver;

/// As [`FemSolver`], plus one singular enrichment function per endpoint whose
/// coefficient replaces the fitted edge coefficient.
pub struct EnrichedFemSolver;

pub fn solver_names() -> &'static [&'static str] {
    &["oracle", "fem", "fem-enriched"]
}

pub fn solver_by_name(name: &str) -> Result<Box<dyn ForwardSolver>, ForwardError> {
    match name {
        "oracle" => Ok(Box::new(OracleSolver)),
        "fem" => Ok(Box::new(FemSolver)),
        "fem-enriched" => Ok(Box::new(EnrichedFemSolver)),
        other => Err(ForwardError::UnknownSolver(other.to_owned())),
    }
}

/// Parameters clustered toward both ends of `[a, b]`.
fn clustered(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (1..n).map(move |k| a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / n as f64).cos()))
}

fn profile_parameters(domain: &DomainSpec, layout: &ElectrodeLayout, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let arcs = &layout.arcs;
    for (k, arc) in arcs.iter().enumerate() {
        out.extend(clustered(arc.start, arc.end, n));
        let next = match (arcs.get(k + 1), domain.boundary_length()) {
            (Some(a), _) => Some(a.start),
            (None, Some(len)) if domain.is_closed() => Some(arcs[0].start + len),
            _ => None,
        };
        if let Some(next) = next {
            let len = domain.boundary_length().unwrap_or(f64::INFINITY);
            out.extend(clustered(arc.end, next, n).map(|s| if s >= len { s - len } else { s }));
        }
    }
    if let (Some(first), Some(last), None) = (arcs.first(), arcs.last(), domain.boundary_length()) {
        // the real line: one electrode length beyond the outermost edges
        let reach = first.length().max(last.length());
        out.extend(clustered(first.start - reach, first.start, n));
        out.extend(clustered(last.end, last.end + reach, n));
    }
    out.sort_by(f64::total_cmp);
    out
}

impl ForwardSolver for OracleSolver {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn solve(&self, problem: &ForwardProblem) -> Result<ForwardSolution, ForwardError> {
        if problem.sigma.name() != "constant" {
            return Err(ForwardError::Unsupported {
                solver: "oracle",
                reason: "conductivity must be constant".into(),
            });
        }
        let a = problem.sigma.sigma([0.0, 0.0]);
        let chart = chart_away_from_electrodes(&problem.domain, problem.layout)?;
        // a constant conductivity scales potentials by 1/sigma
        let oracle = MappedOracle::new(chart, problem.layout.clone(), problem.currents.scaled(1.0 / a))?;
        let params = profile_parameters(&problem.domain, problem.layout, problem.profile_points);
        let mut profile = oracle.profile(&params);
        for row in &mut profile {
            row.density = row.density.map(|d| a * d);
        }
        let mut edges = Vec::new();
        for (k, arc) in problem.layout.arcs.iter().enumerate() {
            for s in [arc.start, arc.end] {
                let angle = problem.domain.interior_angle(s);
                let kind = if (angle - std::f64::consts::PI).abs() < 1e-14 {
                    BoundaryKind::Smooth
                } else {
                    BoundaryKind::Corner(angle)
                };
                edges.push(EdgeEstimate {
                    s,
                    electrode: k,
                    exponent: Some(predicted_exponent(kind)?),
                    coefficient: Some(a * oracle.edge_coefficient(s)?),
                });
            }
        }
        Ok(ForwardSolution {
            solver: "oracle",
            potentials: oracle.electrode_potentials()?,
            energy: a * oracle.energy()?,
            fluxes: (0..problem.layout.len())
                .map(|i| Ok(a * oracle.electrode_current(i)?))
                .collect::<Result<_, OracleError>>()?,
            iterations: 0,
            residual: 0.0,
            dofs: 0,
            profile,
            edges,
            mesh: None,
        })
    }
}

fn density_profile(density: &[DensitySample]) -> Vec<ProfileRow> {
    let mut rows: Vec<ProfileRow> = density
        .iter()
        .map(|d| ProfileRow {
            s: d.s,
            dist_to_edge: d.dist_to_edge,
            density: Some(d.value),
            tangential_derivative: None,
        })
        .collect();
    rows.sort_by(|a, b| a.s.total_cmp(&b.s));
    rows
}

fn fitted_edges(
    mesh: &Mesh,
    density: &[DensitySample],
    window_fraction: (f64, f64),
) -> Result<Vec<EdgeEstimate>, ForwardError> {
    let mut edges = Vec::new();
    for (k, arc) in mesh.layout.arcs.iter().enumerate() {
        let window = FitWindow::scaled(window_fraction, arc.length())?;
        for s in [arc.start, arc.end] {
            let samples = edge_samples(density, &mesh.layout, s, window)?;
            let fit = fit_power_law(&samples, window).ok();
            edges.push(EdgeEstimate {
                s,
                electrode: k,
                exponent: fit.map(|f| f.exponent),
                coefficient: fit.map(|f| f.coefficient),
            });
        }
    }
    Ok(edges)
}

fn fem_solution(
    name: &'static str,
    mesh: Mesh,
    sol: CemSolution,
    dofs: usize,
    edges: Vec<EdgeEstimate>,
) -> ForwardSolution {
    ForwardSolution {
        solver: name,
        potentials: sol.potentials,
        energy: sol.energy,
        fluxes: sol.fluxes,
        iterations: sol.iterations,
        residual: sol.residual,
        dofs,
        profile: density_profile(&sol.density),
        edges,
        mesh: Some(mesh),
    }
}

impl ForwardSolver for FemSolver {
    fn name(&self) -> &'static str {
        "fem"
    }

    fn solve(&self, problem: &ForwardProblem) -> Result<ForwardSolution, ForwardError> {
        let mesh = generate_graded_mesh(&problem.domain, problem.layout, &problem.grading)?;
        let system = assemble(&mesh, problem.sigma, None, problem.currents.values())?;
        let sol = solve(&mesh, &system, &problem.solver)?;
        let edges = fitted_edges(&mesh, &sol.density, problem.window_fraction)?;
        let dofs = system.n_dofs();
        Ok(fem_solution("fem", mesh, sol, dofs, edges))
    }
}

impl ForwardSolver for EnrichedFemSolver {
    fn name(&self) -> &'static str {
        "fem-enriched"
    }

    fn solve(&self, problem: &ForwardProblem) -> Result<ForwardSolution, ForwardError> {
        let mesh = generate_graded_mesh(&problem.domain, problem.layout, &problem.grading)?;
        let options = EnrichmentOptions {
            radius: None,
            solver: problem.solver,
        };
        let en = solve_enriched(&mesh, problem.sigma, None, problem.currents.values(), &options)?;
        let mut edges = fitted_edges(&mesh, &en.solution.density, problem.window_fraction)?;
        for (edge, estimate) in en.basis.edges.iter().zip(&en.edge_coefficients) {
            if let Some(e) = edges.iter_mut().find(|e| e.s == edge.s) {
                e.coefficient = Some(estimate.abs());
            }
        }
        let dofs = en.solution.dofs.len();
        Ok(fem_solution("fem-enriched", mesh, en.solution, dofs, edges))
    }
}
