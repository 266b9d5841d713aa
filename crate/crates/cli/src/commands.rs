use std::f64::consts::PI;
use std::fs::File;

use cemlab_core::asymptotics::{
    convergence_study, fit_power_law, oracle_edge_samples, predicted_exponent, write_study_csv, BoundaryKind,
    FitResult, FitWindow, StudyOptions, ORACLE_WINDOW,
};
use cemlab_core::fem::{generate_graded_mesh, ConductivityField, Grading};
use cemlab_core::geometry::{chart_for, CurrentPattern, DomainSpec, ElectrodeLayout};
use cemlab_core::hilbert_oracle::MappedOracle;
use cemlab_core::registry::{solver_by_name, ForwardProblem, ForwardSolution};
use serde_json::json;

use crate::config::{DomainKind, RunConfig};
use crate::error::CliError;
use crate::output::{density_csv, edges_csv, num, pass_fail, potentials_csv, OutDir, Report};

/// Tolerance on fitted FEM exponents in the pass/fail lines.
const FEM_EXPONENT_TOL: f64 = 0.05;
/// Tolerance on exponents fitted to the exact density.
const ORACLE_EXPONENT_TOL: f64 = 1e-3;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a OutDir,
    pub verbose: bool,
}

impl Context<'_> {
    fn progress(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }
}

struct Problem {
    domain: DomainSpec,
    layout: ElectrodeLayout,
    currents: CurrentPattern,
    sigma: Box<dyn ConductivityField>,
}

fn load_problem(config: &RunConfig) -> Result<Problem, CliError> {
    let domain = config.domain()?;
    let layout = config.layout(&domain)?;
    let currents = config.currents(&layout)?;
    let sigma = config.conductivity()?;
    Ok(Problem {
        domain,
        layout,
        currents,
        sigma,
    })
}

fn require_meshable(kind: DomainKind) -> Result<(), CliError> {
    if kind == DomainKind::HalfPlane {
        return Err(CliError::config(
            "domain.kind",
            "the half-plane cannot be meshed (use disc or wedge)",
        ));
    }
    Ok(())
}

fn constant_sigma(sigma: &dyn ConductivityField, why: &str) -> Result<(), CliError> {
    if sigma.name() != "constant" {
        return Err(CliError::config(
            "conductivity.kind",
            format!("{why} needs a constant conductivity"),
        ));
    }
    Ok(())
}

fn describe_domain(domain: &DomainSpec) -> String {
    match *domain {
        DomainSpec::UnitDisc => "disc".into(),
        DomainSpec::UpperHalfPlane => "half-plane".into(),
        DomainSpec::Wedge { angle, radius } => format!("wedge (angle {}, radius {})", num(angle), num(radius)),
    }
}

fn describe_grading(g: &Grading) -> String {
    format!(
        "h_max {} ratio {} levels {} slope {}",
        num(g.h_max),
        num(g.ratio),
        g.levels,
        num(g.slope)
    )
}

fn report_inputs(report: &mut Report, command: &str, p: &Problem) {
    report.line("command", command);
    report.line("domain", describe_domain(&p.domain));
    for (i, (arc, j)) in p.layout.arcs.iter().zip(p.currents.values()).enumerate() {
        report.line(
            &format!("electrode {i}"),
            format!("[{}, {}] current {}", num(arc.start), num(arc.end), num(*j)),
        );
    }
    report.line("conductivity", format!("{:?}", p.sigma));
}

fn kind_at(domain: &DomainSpec, s: f64) -> BoundaryKind {
    let angle = domain.interior_angle(s);
    if (angle - PI).abs() < 1e-14 {
        BoundaryKind::Smooth
    } else {
        BoundaryKind::Corner(angle)
    }
}

fn report_solution(report: &mut Report, p: &Problem, sol: &ForwardSolution) {
    report.line("solver", sol.solver);
    if sol.dofs > 0 {
        report.line("dofs", sol.dofs);
        report.line("cg iterations", sol.iterations);
        report.line("cg relative residual", num(sol.residual));
    }
    let u = sol.potentials.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ");
    report.line("potentials", u);
    report.line("energy", num(sol.energy));
    let work: f64 = p
        .currents
        .values()
        .iter()
        .zip(&sol.potentials)
        .map(|(j, u)| j * u)
        .sum();
    let identity = if sol.energy > 0.0 {
        (sol.energy - work).abs() / sol.energy
    } else {
        (sol.energy - work).abs()
    };
    report.line("energy identity residual", num(identity));
    let flux = p
        .currents
        .values()
        .iter()
        .zip(&sol.fluxes)
        .map(|(j, f)| (j - f).abs())
        .fold(0.0, f64::max);
    report.line("flux residual", num(flux));
}

fn report_edges(report: &mut Report, p: &Problem, sol: &ForwardSolution, tol: f64) -> Result<(), CliError> {
    for e in &sol.edges {
        let predicted = predicted_exponent(kind_at(&p.domain, e.s))?;
        let key = format!("edge s={} electrode {}", num(e.s), e.electrode);
        match (e.exponent, e.coefficient) {
            (Some(x), Some(a)) => {
                let dev = (x - predicted).abs();
                report.line(
                    &key,
                    format!(
                        "p {} A {} predicted p {} {} (|dp| {} <= {})",
                        num(x),
                        num(a),
                        num(predicted),
                        pass_fail(dev <= tol),
                        num(dev),
                        tol
                    ),
                );
            }
            _ => {
                report.line(&key, format!("no fit (predicted p {})", num(predicted)));
            }
        }
    }
    Ok(())
}

fn summary(sol: &ForwardSolution) -> serde_json::Value {
    json!({
        "solver": sol.solver,
        "U": sol.potentials,
        "energy": sol.energy,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "dofs": sol.dofs,
        "fluxes": sol.fluxes,
    })
}

fn write_json(ctx: &Context, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::numerical)?;
    text.push('\n');
    ctx.out.write("summary.json", &text)
}

fn write_solution(ctx: &Context, p: &Problem, sol: &ForwardSolution) -> Result<(), CliError> {
    ctx.out.write("density.csv", &density_csv(&sol.profile))?;
    ctx.out.write(
        "potentials.csv",
        &potentials_csv(&p.currents, &sol.potentials, &sol.fluxes),
    )?;
    ctx.out.write("edge_coefficients.csv", &edges_csv(&sol.edges))?;
    if let (Some(mesh), true) = (&sol.mesh, ctx.config.write_mesh()?) {
        let mut buf = Vec::new();
        mesh.write_text(&mut buf)?;
        ctx.out.write("mesh.txt", &String::from_utf8_lossy(&buf))?;
    }
    Ok(())
}

pub fn cmd_oracle(ctx: &Context) -> Result<(), CliError> {
    if ctx.config.domain_kind()? == DomainKind::Wedge {
        return Err(CliError::config(
            "domain.kind",
            "the oracle command takes disc or half-plane (wedges go through `corner`)",
        ));
    }
    let p = load_problem(ctx.config)?;
    constant_sigma(p.sigma.as_ref(), "the oracle")?;
    let mut problem = ForwardProblem::new(p.domain, &p.layout, &p.currents, p.sigma.as_ref());
    problem.profile_points = ctx.config.profile_points()?;
    ctx.progress("solving the half-plane coefficient system");
    let sol = solver_by_name("oracle")?.solve(&problem)?;
    write_solution(ctx, &p, &sol)?;
    write_json(ctx, &summary(&sol))?;
    let mut report = Report::default();
    report_inputs(&mut report, "oracle", &p);
    report_solution(&mut report, &p, &sol);
    report_edges(&mut report, &p, &sol, ORACLE_EXPONENT_TOL)?;
    ctx.out.write("report.txt", report.finish())
}

fn fem_problem<'a>(ctx: &Context, p: &'a Problem) -> Result<ForwardProblem<'a>, CliError> {
    let mut problem = ForwardProblem::new(p.domain, &p.layout, &p.currents, p.sigma.as_ref());
    problem.grading = ctx.config.grading()?;
    problem.solver = ctx.config.solver_options()?;
    problem.window_fraction = ctx.config.window_fraction()?;
    Ok(problem)
}

fn fem_solver_name(ctx: &Context) -> Result<String, CliError> {
    match ctx.config.solver_kind()? {
        k @ ("fem" | "fem-enriched") => Ok(k.to_owned()),
        other => Err(CliError::config(
            "solver.kind",
            format!("expected fem or fem-enriched, got `{other}`"),
        )),
    }
}

pub fn cmd_fem(ctx: &Context) -> Result<(), CliError> {
    require_meshable(ctx.config.domain_kind()?)?;
    let p = load_problem(ctx.config)?;
    let problem = fem_problem(ctx, &p)?;
    let name = fem_solver_name(ctx)?;
    ctx.progress(&format!("meshing and solving with {name}"));
    let sol = solver_by_name(&name)?.solve(&problem)?;
    write_solution(ctx, &p, &sol)?;
    write_json(ctx, &summary(&sol))?;
    let mut report = Report::default();
    report_inputs(&mut report, "fem", &p);
    report.line("grading", describe_grading(&problem.grading));
    report.line(
        "fit window",
        format!(
            "[{}, {}] x electrode length",
            num(problem.window_fraction.0),
            num(problem.window_fraction.1)
        ),
    );
    report_solution(&mut report, &p, &sol);
    report_edges(&mut report, &p, &sol, FEM_EXPONENT_TOL)?;
    ctx.out.write("report.txt", report.finish())
}

/// `(dist, value)` rows; a first row that is not numeric is taken as a header.
fn read_samples(ctx: &Context) -> Result<Vec<(f64, f64)>, CliError> {
    let path = ctx.config.fit_input()?;
    let file = File::open(&path).map_err(|e| CliError::config("fit.input", format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::config("fit.input", e))?;
        let parsed = (record.get(0), record.get(1));
        let pair = match parsed {
            (Some(d), Some(v)) => d.parse::<f64>().ok().zip(v.parse::<f64>().ok()),
            _ => None,
        };
        match pair {
            Some(pair) => samples.push(pair),
            None if i == 0 => {}
            None => {
                return Err(CliError::config(
                    "fit.input",
                    format!("row {} is not a pair of numbers", i + 1),
                ))
            }
        }
    }
    Ok(samples)
}

fn fit_line(fit: &FitResult) -> String {
    format!(
        "p {} A {} r_squared {} samples {}",
        num(fit.exponent),
        num(fit.coefficient),
        num(fit.r_squared),
        fit.n_samples
    )
}

pub fn cmd_fit(ctx: &Context) -> Result<(), CliError> {
    let fractions = ctx.config.window_fraction()?;
    let length = ctx.config.fit_length()?;
    let window = FitWindow::scaled(fractions, length).map_err(|e| CliError::config("fit.window", e))?;
    let samples = read_samples(ctx)?;
    let fit = fit_power_law(&samples, window)?;
    let mut csv = String::from("exponent,coefficient,r_squared,n_samples,d_min,d_max\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{}\n",
        num(fit.exponent),
        num(fit.coefficient),
        num(fit.r_squared),
        fit.n_samples,
        num(window.d_min),
        num(window.d_max)
    ));
    ctx.out.write("fit.csv", &csv)?;
    let mut report = Report::default();
    report.line("command", "fit");
    report.line("input", ctx.config.fit_input()?.display());
    report.line("samples read", samples.len());
    report.line("window", format!("[{}, {}]", num(window.d_min), num(window.d_max)));
    report.line("fit", fit_line(&fit));
    let smooth = predicted_exponent(BoundaryKind::Smooth)?;
    let dev = (fit.exponent - smooth).abs();
    report.line(
        "smooth-edge prediction",
        format!(
            "p {} {} (|dp| {} <= {})",
            num(smooth),
            pass_fail(dev <= FEM_EXPONENT_TOL),
            num(dev),
            FEM_EXPONENT_TOL
        ),
    );
    ctx.out.write("report.txt", report.finish())
}

pub fn cmd_convergence(ctx: &Context) -> Result<(), CliError> {
    require_meshable(ctx.config.domain_kind()?)?;
    let gradings = ctx.config.study_gradings()?;
    let p = load_problem(ctx.config)?;
    constant_sigma(p.sigma.as_ref(), "the convergence study (oracle reference)")?;
    let edge = ctx.config.fit_edge(&p.layout, p.layout.arcs[0].start)?;
    let options = StudyOptions {
        edge,
        window_fraction: ctx.config.window_fraction()?,
        away_fraction: ctx.config.study_away()?,
        enriched: ctx.config.study_enriched()?,
        solver: ctx.config.solver_options()?,
    };
    // the flux density does not depend on a constant conductivity
    let chart = chart_for(&p.domain, &p.layout).map_err(|e| CliError::config("electrodes", e))?;
    let reference = MappedOracle::new(chart, p.layout.clone(), p.currents.clone()).map_err(CliError::numerical)?;
    let mut meshes = Vec::new();
    for (i, g) in gradings.iter().enumerate() {
        ctx.progress(&format!("meshing {}/{}", i + 1, gradings.len()));
        meshes.push(generate_graded_mesh(&p.domain, &p.layout, g)?);
    }
    ctx.progress("solving");
    let rows = convergence_study(&meshes, p.sigma.as_ref(), &p.currents, &reference, &options)?;
    let mut buf = Vec::new();
    write_study_csv(&rows, &mut buf)?;
    ctx.out.write("convergence.csv", &String::from_utf8_lossy(&buf))?;

    let predicted = predicted_exponent(kind_at(&p.domain, edge))?;
    let mut report = Report::default();
    report_inputs(&mut report, "convergence", &p);
    for (i, g) in gradings.iter().enumerate() {
        report.line(&format!("mesh {i}"), describe_grading(g));
    }
    report.line("enriched", options.enriched);
    report.line("fitted edge", num(edge));
    report.line("predicted exponent", num(predicted));
    for (i, r) in rows.iter().enumerate() {
        let fit = r.fit.as_ref().map(fit_line).unwrap_or_else(|| "no fit".into());
        report.line(
            &format!("row {i}"),
            format!("dofs {} l2 {} {}", r.dofs, num(r.l2_error), fit),
        );
    }
    for w in rows.windows(2) {
        let rate = (w[0].l2_error / w[1].l2_error).ln() / (w[1].dofs as f64 / w[0].dofs as f64).ln();
        report.line(&format!("l2 rate {} -> {} dofs", w[0].dofs, w[1].dofs), num(rate));
    }
    let finest = rows.last().and_then(|r| r.fit);
    match finest {
        Some(f) => {
            let dev = (f.exponent - predicted).abs();
            report.line(
                "finest mesh exponent",
                format!(
                    "{} {} (|dp| {} <= {})",
                    num(f.exponent),
                    pass_fail(dev <= FEM_EXPONENT_TOL),
                    num(dev),
                    FEM_EXPONENT_TOL
                ),
            );
        }
        None => {
            report.line("finest mesh exponent", "no fit");
        }
    }
    ctx.out.write("report.txt", report.finish())
}

pub fn cmd_corner(ctx: &Context) -> Result<(), CliError> {
    if ctx.config.domain_kind()? != DomainKind::Wedge {
        return Err(CliError::config("domain.kind", "the corner command needs a wedge"));
    }
    let p = load_problem(ctx.config)?;
    let DomainSpec::Wedge { angle, radius } = p.domain else {
        unreachable!("checked above");
    };
    let len = p.domain.boundary_length().expect("wedges are bounded");
    let corner = p
        .layout
        .endpoints()
        .into_iter()
        .find(|&s| s == 0.0 || s == len)
        .ok_or_else(|| {
            CliError::config(
                "electrodes",
                format!("no electrode ends at the corner (s = 0 or s = {len})"),
            )
        })?;
    let predicted = predicted_exponent(BoundaryKind::Corner(angle))?;

    let problem = fem_problem(ctx, &p)?;
    let name = fem_solver_name(ctx)?;
    ctx.progress(&format!("meshing and solving with {name}"));
    let sol = solver_by_name(&name)?.solve(&problem)?;
    write_solution(ctx, &p, &sol)?;
    let fem = sol.edges.iter().find(|e| e.s == corner).copied();
    let fem_p = fem.and_then(|e| e.exponent);

    let mut report = Report::default();
    report_inputs(&mut report, "corner", &p);
    report.line("grading", describe_grading(&problem.grading));
    report_solution(&mut report, &p, &sol);
    report.line("corner", num(corner));
    report.line("corner angle", num(angle));
    report.line("predicted exponent", num(predicted));
    match fem.and_then(|e| e.exponent.zip(e.coefficient)) {
        Some((x, a)) => {
            let dev = (x - predicted).abs();
            report.line("fem fitted exponent", num(x));
            report.line("fem fitted coefficient", num(a));
            report.line(
                "fem check",
                format!(
                    "{} (|dp| {} <= {})",
                    pass_fail(dev <= FEM_EXPONENT_TOL),
                    num(dev),
                    FEM_EXPONENT_TOL
                ),
            );
        }
        None => {
            report.line("fem fitted exponent", "no fit");
        }
    }

    let mut oracle_p = None;
    if p.sigma.name() == "constant" {
        ctx.progress("oracle route through the wedge chart");
        let a = p.sigma.sigma([0.0, 0.0]);
        let chart = chart_for(&p.domain, &p.layout).map_err(|e| CliError::config("electrodes", e))?;
        let oracle =
            MappedOracle::new(chart, p.layout.clone(), p.currents.scaled(1.0 / a)).map_err(CliError::numerical)?;
        let window = FitWindow::new(ORACLE_WINDOW.0 * radius, ORACLE_WINDOW.1 * radius)?;
        let samples = oracle_edge_samples(&oracle, corner, window, 40).map_err(CliError::numerical)?;
        let fit = fit_power_law(&samples, window).ok();
        let exact = oracle.edge_coefficient(corner).map_err(CliError::numerical)? * a;
        report.line("oracle edge coefficient", num(exact));
        match fit {
            Some(f) => {
                let dev = (f.exponent - predicted).abs();
                oracle_p = Some(f.exponent);
                report.line("oracle fitted exponent", num(f.exponent));
                report.line("oracle fitted coefficient", num(f.coefficient * a));
                report.line(
                    "oracle check",
                    format!(
                        "{} (|dp| {} <= {})",
                        pass_fail(dev <= ORACLE_EXPONENT_TOL),
                        num(dev),
                        ORACLE_EXPONENT_TOL
                    ),
                );
            }
            None => {
                report.line("oracle fitted exponent", "no fit");
            }
        }
    } else {
        report.line("oracle route", "skipped (variable conductivity)");
    }

    let mut value = summary(&sol);
    value["corner"] = json!(corner);
    value["predicted_exponent"] = json!(predicted);
    value["fem_exponent"] = json!(fem_p);
    value["oracle_exponent"] = json!(oracle_p);
    write_json(ctx, &value)?;
    ctx.out.write("report.txt", report.finish())
}
