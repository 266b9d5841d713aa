//! Acceptance suite. Each test prints one `criterion N PASS|FAIL: ...` line to
//! stderr (uncaptured) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use cemlab_core::asymptotics::*;
use cemlab_core::fem::*;
use cemlab_core::geometry::*;
use cemlab_core::hilbert_oracle::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, ok: bool, details: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion} {verdict}: {details}");
}

/// The half-plane pair [-2,-1], [1,2] transported to the disc by
/// `w = (i - z) / (i + z)`.
fn disc_pair() -> ElectrodeLayout {
    let t = (4.0f64 / 3.0).atan();
    ElectrodeLayout::from_pairs(&[(PI / 2.0, PI - t), (PI + t, 1.5 * PI)])
}

fn pair_currents() -> CurrentPattern {
    CurrentPattern::new(vec![-1.0, 1.0]).unwrap()
}

/// Energy identity and flux balance of one FEM solve, as relative residuals.
fn structure(energy: f64, potentials: &[f64], fluxes: &[f64], currents: &[f64], source_work: f64) -> (f64, f64) {
    let work: f64 = currents.iter().zip(potentials).map(|(j, u)| j * u).sum::<f64>() + source_work;
    let identity = (energy - work).abs() / energy.max(f64::MIN_POSITIVE);
    let scale = currents.iter().map(|j| j.abs()).sum::<f64>().max(1.0);
    (identity, fluxes.iter().sum::<f64>().abs() / scale)
}

fn fem_solve(mesh: &Mesh, sigma: &dyn ConductivityField, currents: &CurrentPattern) -> CemSolution {
    let system = assemble(mesh, sigma, None, currents.values()).unwrap();
    let sol = solve(mesh, &system, &SolverOptions::default()).unwrap();
    let (identity, flux) = structure(
        sol.energy,
        &sol.potentials,
        &sol.fluxes,
        currents.values(),
        sol.source_work,
    );
    assert!(identity <= 1e-12 && flux <= 1e-12, "structure: {identity:e} {flux:e}");
    sol
}

fn fem_fit(sol: &CemSolution, layout: &ElectrodeLayout, edge: f64) -> FitResult {
    let arc = layout.arcs.iter().find(|a| a.start == edge || a.end == edge).unwrap();
    let window = FitWindow::scaled(FEM_WINDOW_FRACTION, arc.length()).unwrap();
    fit_power_law(&edge_samples(&sol.density, layout, edge, window).unwrap(), window).unwrap()
}

/// `n` electrodes with lengths and gaps drawn from `[lo, hi]`, and zero-sum
/// currents in `[-1, 1]`.
fn random_half_plane(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut x = rng.gen_range(-3.0..0.0);
    let mut pairs = Vec::new();
    for _ in 0..n {
        let a = x;
        let b = a + rng.gen_range(lo..hi);
        pairs.push((a, b));
        x = b + rng.gen_range(lo..hi);
    }
    let mut j: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    j.push(-j.iter().sum::<f64>());
    (pairs, j)
}

#[test]
fn criterion_1_oracle_constraints_on_random_layouts() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_current, mut worst_bc) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.gen_range(2..=6);
        let (pairs, j) = random_half_plane(&mut rng, n, 0.05, 2.0);
        let o = solve_coefficients(&HalfPlaneProblem::from_intervals(&pairs, &j).unwrap()).unwrap();
        let jmax = j.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (k, jk) in j.iter().enumerate() {
            worst_current = worst_current.max((o.electrode_current(k).unwrap() - jk).abs() / jmax);
        }
        // 1000 points over the electrodes, the gaps and one span beyond
        let (lo, hi) = (pairs[0].0, pairs[n - 1].1);
        let span = hi - lo;
        let (mut re_on_electrodes, mut im_on_gaps, mut density) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..1000 {
            let x = lo - span + 3.0 * span * (i as f64 + 0.5) / 1000.0;
            let f = o.eval_f(Complex64::new(x, 0.0)).unwrap();
            match o.branch().locate(x) {
                AxisLocation::Electrode(_) => {
                    re_on_electrodes = re_on_electrodes.max(f.re.abs());
                    density = density.max(f.im.abs());
                }
                AxisLocation::Gap(_) => im_on_gaps = im_on_gaps.max(f.im.abs()),
                AxisLocation::BranchPoint(_) => {}
            }
        }
        worst_bc = worst_bc.max(re_on_electrodes.max(im_on_gaps) / density);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst_current <= 1e-10 && worst_bc <= 1e-10 && elapsed < 10.0;
    report(
        1,
        ok,
        &format!("50 layouts, max current error {worst_current:.1e}, max BC residual {worst_bc:.1e}, {elapsed:.2} s"),
    );
    assert!(ok);
}

/// Complete elliptic integral of the first kind by the arithmetic-geometric mean.
fn elliptic_k(k: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, (1.0 - k * k).sqrt());
    while (a - b).abs() > 1e-16 * a {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    PI / (2.0 * a)
}

fn worst_fit(o: &MappedOracle, window: FitWindow) -> (f64, f64) {
    let (mut dp, mut da) = (0.0f64, 0.0f64);
    for e in o.layout().endpoints() {
        let fit = fit_power_law(&oracle_edge_samples(o, e, window, 40).unwrap(), window).unwrap();
        dp = dp.max((fit.exponent + 0.5).abs());
        da = da.max((fit.coefficient / o.edge_coefficient(e).unwrap() - 1.0).abs());
    }
    (dp, da)
}

#[test]
fn criterion_2_oracle_fits_at_every_endpoint() {
    let window = FitWindow::new(ORACLE_WINDOW.0, ORACLE_WINDOW.1).unwrap();
    let pair = MappedOracle::new(
        Box::new(IdentityChart),
        ElectrodeLayout::from_pairs(&[(-2.0, -1.0), (1.0, 2.0)]),
        pair_currents(),
    )
    .unwrap();
    let eighths = ElectrodeLayout::from_pairs(&[(PI / 8.0, 3.0 * PI / 8.0), (5.0 * PI / 8.0, 7.0 * PI / 8.0)]);
    let oracles = [
        pair,
        disc_oracle(&disc_pair(), &pair_currents()).unwrap(),
        disc_oracle(&eighths, &pair_currents()).unwrap(),
    ];
    let (mut dp, mut da) = (0.0f64, 0.0f64);
    for o in &oracles {
        let (p, a) = worst_fit(o, window);
        dp = dp.max(p);
        da = da.max(a);
    }
    // density 1 / (I sqrt(6 d)) near x = 1 with I = K(sqrt(3)/2) / 2
    let a1 = oracles[0].edge_coefficient(1.0).unwrap();
    let closed = 2.0 / (6f64.sqrt() * elliptic_k(3f64.sqrt() / 2.0));
    let reference = (a1 / closed - 1.0).abs() < 1e-12;
    let ok = dp <= 1e-3 && da <= 1e-3 && reference;
    report(
        2,
        ok,
        &format!(
            "12 endpoints on 3 layouts, max |p + 0.5| {dp:.1e}, max A error {:.4}%, A(1) = {a1:.17} (closed form {closed:.17})",
            100.0 * da
        ),
    );

    // random layouts: endpoints whose A nearly cancels are dominated by the
    // next-order term inside the window, so these are reported, not asserted
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut at_ratio, mut count) = (0.0f64, 0.0, 0);
    for _ in 0..10 {
        let n = rng.gen_range(2..=6);
        let (pairs, j) = random_half_plane(&mut rng, n, 0.2, 2.0);
        let layout = ElectrodeLayout::from_pairs(&pairs);
        let o = MappedOracle::new(Box::new(IdentityChart), layout, CurrentPattern::new(j).unwrap()).unwrap();
        let coefficients: Vec<f64> = o
            .layout()
            .endpoints()
            .iter()
            .map(|&e| o.edge_coefficient(e).unwrap())
            .collect();
        let amax = coefficients.iter().cloned().fold(0.0, f64::max);
        for (e, a) in o.layout().endpoints().into_iter().zip(coefficients) {
            let fit = fit_power_law(&oracle_edge_samples(&o, e, window, 40).unwrap(), window).unwrap();
            let err = (fit.coefficient / a - 1.0).abs();
            if err > worst {
                (worst, at_ratio) = (err, a / amax);
            }
            count += 1;
        }
    }
    let _ = writeln!(
        std::io::stderr(),
        "  note: {count} endpoints on 10 random layouts, worst A error {:.2}% at an endpoint with A / max A = {at_ratio:.1e}",
        100.0 * worst
    );
    assert!(ok);
}

#[test]
fn criterion_3_graded_disc_fem_reproduces_the_edge_law() {
    let layout = disc_pair();
    let currents = pair_currents();
    let start = Instant::now();
    let mesh = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &Grading::default()).unwrap();
    let sol = fem_solve(&mesh, &Constant(1.0), &currents);
    let elapsed = start.elapsed().as_secs_f64();
    let oracle = disc_oracle(&layout, &currents).unwrap();
    let (mut dp, mut da) = (0.0f64, 0.0f64);
    for e in layout.endpoints() {
        let fit = fem_fit(&sol, &layout, e);
        dp = dp.max((fit.exponent + 0.5).abs());
        da = da.max((fit.coefficient / oracle.edge_coefficient(e).unwrap() - 1.0).abs());
    }
    let ok = dp <= 0.05 && da <= 0.05 && mesh.n_triangles() <= 100_000 && elapsed < 60.0;
    report(
        3,
        ok,
        &format!(
            "{} triangles, max |p + 0.5| {dp:.4}, max A error {:.2}%, {elapsed:.2} s",
            mesh.n_triangles(),
            100.0 * da
        ),
    );

    // diagnostic: a layout where the free-slope intercept is biased by the
    // window itself, visible in the exact density's own fit
    let other = ElectrodeLayout::from_pairs(&[(PI / 8.0, 3.0 * PI / 8.0), (5.0 * PI / 8.0, 7.0 * PI / 8.0)]);
    let o = disc_oracle(&other, &currents).unwrap();
    let mesh = generate_graded_mesh(&DomainSpec::UnitDisc, &other, &Grading::default()).unwrap();
    let s = fem_solve(&mesh, &Constant(1.0), &currents);
    let e = PI / 8.0;
    let fem = fem_fit(&s, &other, e);
    let window = FitWindow::scaled(FEM_WINDOW_FRACTION, PI / 4.0).unwrap();
    let exact = fit_power_law(&oracle_edge_samples(&o, e, window, 32).unwrap(), window).unwrap();
    let _ = writeln!(
        std::io::stderr(),
        "  note: layout [pi/8, 3pi/8] at s = pi/8: FEM A {:.5}, exact density fitted on the same window {:.5}, edge coefficient {:.5}",
        fem.coefficient,
        exact.coefficient,
        o.edge_coefficient(e).unwrap()
    );
    assert!(ok);
}

#[test]
fn criterion_4_variable_conductivity_keeps_the_exponent() {
    let layout = disc_pair();
    let mesh = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &Grading::default()).unwrap();
    let sol = fem_solve(&mesh, &LinearX { a: 1.0, b: 0.5 }, &pair_currents());
    let dp = layout
        .endpoints()
        .iter()
        .map(|&e| (fem_fit(&sol, &layout, e).exponent + 0.5).abs())
        .fold(0.0, f64::max);
    let ok = dp <= 0.05;
    report(4, ok, &format!("sigma = 1 + 0.5 x, max |p + 0.5| {dp:.4}"));
    assert!(ok);
}

#[test]
fn criterion_5_corner_exponents() {
    let mut lines = Vec::new();
    let mut ok = true;
    for (phi, label) in [(PI / 2.0, "pi/2"), (1.5 * PI, "3pi/2"), (PI, "pi")] {
        let domain = DomainSpec::wedge(phi, 1.0).unwrap();
        let layout = ElectrodeLayout::from_pairs(&[(0.0, 0.5), (1.0 + 0.3 * phi, 1.0 + 0.7 * phi)]);
        let mesh = generate_graded_mesh(&domain, &layout, &Grading::default()).unwrap();
        let sol = fem_solve(&mesh, &Constant(1.0), &pair_currents());
        let p = fem_fit(&sol, &layout, 0.0).exponent;
        let predicted = predicted_exponent(BoundaryKind::Corner(phi)).unwrap();
        ok &= (p - predicted).abs() <= 0.05;
        lines.push(format!("phi = {label}: p {p:.4} (predicted {predicted:.4})"));
    }
    report(5, ok, &lines.join(", "));
    assert!(ok);
}

#[test]
fn criterion_6_angular_profile() {
    let o = MappedOracle::new(
        Box::new(IdentityChart),
        ElectrodeLayout::from_pairs(&[(-2.0, -1.0), (1.0, 2.0)]),
        pair_currents(),
    )
    .unwrap();
    let domain = DomainSpec::UpperHalfPlane;
    let phis: Vec<f64> = (0..=32).map(|j| PI * j as f64 / 32.0).collect();
    let mut ok = true;
    let mut worst = 0.0f64;
    for e in o.layout().endpoints() {
        let frame = edge_frame(&domain, o.layout(), e).unwrap();
        let signed = o.signed_edge_coefficient(e).unwrap();
        let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&r| {
                let probe = AngularProbe::sample(&domain, &frame, r, &phis, |p| o.gradient(p)).unwrap();
                angular_profile_error(&probe.normalized(signed), signed.abs()).unwrap()
            })
            .collect();
        ok &= errors[2] <= 1e-2 && errors.windows(2).all(|w| w[1] < w[0]);
        worst = worst.max(errors[2]);
    }
    report(
        6,
        ok,
        &format!("4 endpoints, max deviation at r = 1e-4 {worst:.1e}, decreasing in r"),
    );
    assert!(ok);
}

#[test]
fn criterion_7_discrete_structure() {
    let layout = disc_pair();
    let currents = pair_currents();
    let sources: [Option<Source>; 2] = [None, Some(&|p: [f64; 2]| (-4.0 * (p[0] * p[0] + p[1] * p[1])).exp())];
    let fields: [&dyn ConductivityField; 2] = [&Constant(1.0), &LinearX { a: 1.0, b: 0.5 }];
    let (mut identity, mut flux, mut solves) = (0.0f64, 0.0f64, 0);
    for grading in [Grading::default(), Grading::uniform(0.05)] {
        let mesh = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &grading).unwrap();
        for sigma in fields {
            for source in sources {
                let system = assemble(&mesh, sigma, source, currents.values()).unwrap();
                let sol = solve(&mesh, &system, &SolverOptions::default()).unwrap();
                let (i, f) = structure(
                    sol.energy,
                    &sol.potentials,
                    &sol.fluxes,
                    currents.values(),
                    sol.source_work,
                );
                identity = identity.max(i);
                flux = flux.max(f);
                solves += 1;
            }
        }
        let en = solve_enriched(
            &mesh,
            &Constant(1.0),
            None,
            currents.values(),
            &EnrichmentOptions::default(),
        )
        .unwrap();
        let s = &en.solution;
        let (i, f) = structure(s.energy, &s.potentials, &s.fluxes, currents.values(), s.source_work);
        identity = identity.max(i);
        flux = flux.max(f);
        solves += 1;
    }
    let mesh = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &Grading::default()).unwrap();
    let zero = fem_solve(&mesh, &Constant(1.0), &CurrentPattern::zeros(2));
    let exact_zero =
        zero.nodal.iter().chain(&zero.potentials).all(|&x| x == 0.0) && zero.density.iter().all(|d| d.value == 0.0);
    let ok = identity <= 1e-12 && flux <= 1e-12 && exact_zero;
    report(
        7,
        ok,
        &format!(
            "{solves} solves, max energy identity residual {identity:.1e}, max flux sum {flux:.1e}, J = 0 exact zero: {exact_zero}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_graded_and_enriched_beat_uniform() {
    let layout = disc_pair();
    let currents = pair_currents();
    let oracle = disc_oracle(&layout, &currents).unwrap();
    let worst_dp = |sol: &CemSolution| {
        layout
            .endpoints()
            .iter()
            .map(|&e| (fem_fit(sol, &layout, e).exponent + 0.5).abs())
            .fold(0.0, f64::max)
    };
    let graded_grading = Grading {
        h_max: 0.013,
        ..Grading::default()
    };
    let graded = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &graded_grading).unwrap();
    let uniform = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &Grading::uniform(0.011)).unwrap();
    let g = fem_solve(&graded, &Constant(1.0), &currents);
    let u = fem_solve(&uniform, &Constant(1.0), &currents);
    let (dofs_g, dofs_u) = (g.dofs.len(), u.dofs.len());
    let (dp_g, dp_u) = (worst_dp(&g), worst_dp(&u));

    let en = solve_enriched(
        &uniform,
        &Constant(1.0),
        None,
        currents.values(),
        &EnrichmentOptions::default(),
    )
    .unwrap();
    let s = &en.solution;
    let (i, f) = structure(s.energy, &s.potentials, &s.fluxes, currents.values(), s.source_work);
    assert!(i <= 1e-12 && f <= 1e-12);
    let exact = |x: f64| oracle.density(x);
    let plain_err = near_edge_error(&u.density, &layout, &exact, 0.1).unwrap();
    let enriched_err = near_edge_error(&s.density, &layout, &exact, 0.1).unwrap();

    let matched = (2.0e4..4.0e4).contains(&(dofs_g as f64))
        && (2.0e4..4.0e4).contains(&(dofs_u as f64))
        && (dofs_g as f64 / dofs_u as f64 - 1.0).abs() < 0.1;
    let ok = matched && dp_g <= 0.5 * dp_u && plain_err >= 2.0 * enriched_err;
    report(
        8,
        ok,
        &format!(
            "graded {dofs_g} DOFs |p + 0.5| {dp_g:.4} vs uniform {dofs_u} DOFs {dp_u:.4}; near-edge error plain {plain_err:.3e} vs enriched {enriched_err:.3e} (factor {:.2})",
            plain_err / enriched_err
        ),
    );
    assert!(ok);
}
