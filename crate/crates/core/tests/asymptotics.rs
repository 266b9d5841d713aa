use std::f64::consts::PI;

use approx::assert_relative_eq;
use cemlab_core::asymptotics::*;
use cemlab_core::fem::{generate_graded_mesh, Constant, Grading};
use cemlab_core::geometry::{CurrentPattern, DomainSpec, ElectrodeLayout, IdentityChart};
use cemlab_core::hilbert_oracle::{disc_oracle, MappedOracle};
use num_complex::Complex64;
use proptest::prelude::*;

fn two_electrode_half_plane(currents: [f64; 2]) -> MappedOracle {
    MappedOracle::new(
        Box::new(IdentityChart),
        ElectrodeLayout::from_pairs(&[(-2.0, -1.0), (1.0, 2.0)]),
        CurrentPattern::new(currents.to_vec()).unwrap(),
    )
    .unwrap()
}

fn wide() -> FitWindow {
    FitWindow::new(1e-7, 1.0).unwrap()
}

#[test]
fn exact_power_law_is_recovered() {
    let samples: Vec<(f64, f64)> = (2..=12)
        .map(|k| {
            let d = 10f64.powf(-(k as f64) / 2.0);
            (d, 3.0 * d.powf(-0.5))
        })
        .collect();
    let fit = fit_power_law(&samples, wide()).unwrap();
    assert!((fit.exponent + 0.5).abs() < 1e-12);
    assert!((fit.coefficient - 3.0).abs() < 1e-12);
    assert_eq!(fit.n_samples, 11);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn constant_remainder_is_subdominant_in_the_oracle_window() {
    let (lo, hi) = ORACLE_WINDOW;
    let window = FitWindow::new(lo, hi).unwrap();
    let samples: Vec<(f64, f64)> = (0..41)
        .map(|i| {
            let d = lo * (hi / lo).powf(i as f64 / 40.0);
            (d, 3.0 * d.powf(-0.5) + 1.0)
        })
        .collect();
    let fit = fit_power_law(&samples, window).unwrap();
    assert!((fit.exponent + 0.5).abs() < 1e-3, "p = {}", fit.exponent);
    // the intercept extrapolates from the window to d = 1, which turns the
    // small slope bias into about 0.85% on A
    assert!((fit.coefficient / 3.0 - 1.0).abs() < 1e-2, "A = {}", fit.coefficient);
}

#[test]
fn fit_errors() {
    let few: Vec<(f64, f64)> = (1..8).map(|k| (k as f64 * 0.1, 1.0)).collect();
    assert!(matches!(
        fit_power_law(&few, wide()),
        Err(AsymptoticsError::InsufficientSamples { found: 7, needed: 8 })
    ));
    let mut bad: Vec<(f64, f64)> = (1..10).map(|k| (k as f64 * 0.1, 1.0)).collect();
    bad[4].1 = 0.0;
    assert!(matches!(
        fit_power_law(&bad, wide()),
        Err(AsymptoticsError::NonPositiveValue { index: 4, .. })
    ));
    // samples outside the window do not count and are not checked
    bad[4].0 = 5.0;
    assert_eq!(fit_power_law(&bad, wide()).unwrap().n_samples, 8);
    assert!(FitWindow::new(1e-3, 1e-4).is_err());
    assert!(FitWindow::new(0.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn noiseless_power_laws_are_exact(p in -2.0f64..-1e-3, a in 1e-3f64..1e3) {
        let samples: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let d = 1e-6 * 10f64.powf(i as f64 * 0.25);
                (d, a * d.powf(p))
            })
            .collect();
        let fit = fit_power_law(&samples, wide()).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-12);
        prop_assert!((fit.coefficient / a - 1.0).abs() < 1e-12);
    }
}

#[test]
fn predicted_exponents() {
    assert_eq!(predicted_exponent(BoundaryKind::Smooth).unwrap(), -0.5);
    assert_eq!(
        predicted_exponent(BoundaryKind::Corner(PI)).unwrap(),
        predicted_exponent(BoundaryKind::Smooth).unwrap()
    );
    assert!(predicted_exponent(BoundaryKind::Corner(PI / 2.0)).unwrap().abs() < 1e-15);
    assert!((predicted_exponent(BoundaryKind::Corner(1.5 * PI)).unwrap() + 2.0 / 3.0).abs() < 1e-15);
    for bad in [0.0, -1.0, 2.0 * PI, 7.0, f64::NAN] {
        assert!(matches!(
            predicted_exponent(BoundaryKind::Corner(bad)),
            Err(AsymptoticsError::InvalidAngle(_))
        ));
    }
    let grid: Vec<f64> = (1..200)
        .map(|k| predicted_exponent(BoundaryKind::Corner(2.0 * PI * k as f64 / 200.0)).unwrap())
        .collect();
    assert!(grid.windows(2).all(|w| w[1] < w[0]));
    assert!(grid.iter().all(|&p| p > -0.75));
}

#[test]
fn oracle_density_fit_near_the_inner_endpoint() {
    let oracle = two_electrode_half_plane([-1.0, 1.0]);
    let window = FitWindow::new(ORACLE_WINDOW.0, ORACLE_WINDOW.1).unwrap();
    let samples = oracle_edge_samples(&oracle, 1.0, window, 40).unwrap();
    let fit = fit_power_law(&samples, window).unwrap();
    assert!((fit.exponent + 0.5).abs() < 1e-3);
    let a = oracle.edge_coefficient(1.0).unwrap();
    assert_relative_eq!(a, 0.37861843565772741, max_relative = 1e-12);
    assert!(
        (fit.coefficient / a - 1.0).abs() < 1e-3,
        "A fit {} vs {a}",
        fit.coefficient
    );
}

fn exact_probe(a: f64, r: f64, phis: &[f64]) -> AngularProbe {
    let scale = a / r.sqrt();
    AngularProbe {
        center: Complex64::new(1.0, 0.0),
        radius: r,
        samples: phis
            .iter()
            .map(|&phi| ProbeSample {
                phi,
                tangential: scale * (0.5 * phi).sin(),
                normal: scale * (0.5 * phi).cos(),
            })
            .collect(),
    }
}

#[test]
fn exact_profile_has_zero_deviation() {
    let phis: Vec<f64> = (0..=16).map(|j| PI * j as f64 / 16.0).collect();
    let probe = exact_probe(0.7, 1e-3, &phis);
    assert!(angular_profile_error(&probe, 0.7).unwrap() < 1e-15);
    // phi = pi points along the insulated side: pure tangential derivative
    let last = probe.samples.last().unwrap();
    assert!(last.normal.abs() < 1e-12 * last.tangential);
    assert!(matches!(
        angular_profile_error(&probe, 0.0),
        Err(AsymptoticsError::NonPositiveCoefficient(_))
    ));
}

fn oracle_probe_error(oracle: &MappedOracle, edge: f64, r: f64) -> f64 {
    let domain = oracle.domain();
    let frame = edge_frame(&domain, oracle.layout(), edge).unwrap();
    let phis: Vec<f64> = (0..=32).map(|j| PI * j as f64 / 32.0).collect();
    let probe = AngularProbe::sample(&domain, &frame, r, &phis, |p| oracle.gradient(p)).unwrap();
    let signed = oracle.signed_edge_coefficient(edge).unwrap();
    angular_profile_error(&probe.normalized(signed), signed.abs()).unwrap()
}

#[test]
fn oracle_gradient_follows_the_angular_profile() {
    let oracle = two_electrode_half_plane([-1.0, 1.0]);
    for edge in [-2.0, -1.0, 1.0, 2.0] {
        let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&r| oracle_probe_error(&oracle, edge, r))
            .collect();
        assert!(errors[2] <= 1e-2, "edge {edge}: {errors:?}");
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "edge {edge}: {errors:?}");
    }
}

#[test]
fn probe_outside_the_domain_is_rejected() {
    let layout = ElectrodeLayout::from_pairs(&[(PI / 8.0, 3.0 * PI / 8.0), (5.0 * PI / 8.0, 7.0 * PI / 8.0)]);
    let oracle = disc_oracle(&layout, &CurrentPattern::new(vec![1.0, -1.0]).unwrap()).unwrap();
    let frame = edge_frame(&DomainSpec::UnitDisc, &layout, PI / 8.0).unwrap();
    // the tangent line leaves the disc
    let err = AngularProbe::sample(&DomainSpec::UnitDisc, &frame, 0.1, &[0.0], |p| oracle.gradient(p)).unwrap_err();
    assert!(matches!(err, AsymptoticsError::ProbeOutsideDomain(_)));
    assert!(
        AngularProbe::sample(&DomainSpec::UnitDisc, &frame, 0.1, &[0.5, 1.5, 2.5], |p| oracle
            .gradient(p))
        .is_ok()
    );
}

#[test]
fn edge_frames_point_into_the_electrode() {
    let layout = ElectrodeLayout::from_pairs(&[(-2.0, -1.0), (1.0, 2.0)]);
    let start = edge_frame(&DomainSpec::UpperHalfPlane, &layout, 1.0).unwrap();
    assert_eq!(start.tangent, Complex64::new(1.0, 0.0));
    assert_eq!(start.normal, Complex64::new(0.0, -1.0));
    let end = edge_frame(&DomainSpec::UpperHalfPlane, &layout, -1.0).unwrap();
    assert_eq!(end.tangent, Complex64::new(-1.0, 0.0));
    assert!(end.point(0.1, 0.5 * PI).im > 0.0);
    assert!(edge_frame(&DomainSpec::UpperHalfPlane, &layout, 0.0).is_err());
}

fn disc_setup() -> (ElectrodeLayout, MappedOracle) {
    let layout = ElectrodeLayout::from_pairs(&[(PI / 8.0, 3.0 * PI / 8.0), (5.0 * PI / 8.0, 7.0 * PI / 8.0)]);
    let oracle = disc_oracle(&layout, &CurrentPattern::new(vec![1.0, -1.0]).unwrap()).unwrap();
    (layout, oracle)
}

#[test]
fn study_needs_three_meshes() {
    let (layout, oracle) = disc_setup();
    let mesh = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &Grading::uniform(0.2)).unwrap();
    let err = convergence_study(
        &[mesh.clone(), mesh],
        &Constant(1.0),
        oracle.currents(),
        &oracle,
        &StudyOptions::new(PI / 8.0),
    )
    .unwrap_err();
    assert!(matches!(err, AsymptoticsError::TooFewMeshes(2)));
    assert_eq!(err.to_string(), "need at least 3 meshes, got 2");
}

#[test]
fn study_rows_are_sorted_and_zero_currents_give_zero_errors() {
    let (layout, oracle) = disc_setup();
    let meshes: Vec<_> = [0.03, 0.08, 0.05]
        .iter()
        .map(|&h| generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &Grading::uniform(h)).unwrap())
        .collect();
    let rows = convergence_study(
        &meshes,
        &Constant(1.0),
        oracle.currents(),
        &oracle,
        &StudyOptions::new(PI / 8.0),
    )
    .unwrap();
    assert!(rows.windows(2).all(|w| w[0].dofs < w[1].dofs));
    // coarse uniform meshes resolve the density poorly; only the trend is checked
    assert!(rows.iter().all(|r| r.l2_error > 0.0), "{rows:?}");
    assert!(rows.windows(2).all(|w| w[1].l2_error < w[0].l2_error), "{rows:?}");
    assert!(rows[2].l2_error < 0.2, "{rows:?}");
    // uniform meshes are too coarse at the edge: the fit drifts from -1/2
    let coarse = rows[0].fit.unwrap();
    assert!((coarse.exponent + 0.5).abs() > 0.1, "p = {}", coarse.exponent);

    let zero = disc_oracle(&layout, &CurrentPattern::zeros(2)).unwrap();
    let rows = convergence_study(
        &meshes,
        &Constant(1.0),
        zero.currents(),
        &zero,
        &StudyOptions::new(PI / 8.0),
    )
    .unwrap();
    assert!(rows.iter().all(|r| r.l2_error == 0.0 && r.fit.is_none()));

    let mut csv = Vec::new();
    write_study_csv(&rows, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dofs,l2_error,exponent,coefficient,r_squared"));
    assert!(lines.next().unwrap().ends_with("0.0000000000000000e0,,,"));
}

#[test]
fn near_edge_error_vanishes_on_exact_samples() {
    let (layout, oracle) = disc_setup();
    let mesh = generate_graded_mesh(&DomainSpec::UnitDisc, &layout, &Grading::uniform(0.05)).unwrap();
    let system = cemlab_core::fem::assemble(&mesh, &Constant(1.0), None, &[1.0, -1.0]).unwrap();
    let mut sol = cemlab_core::fem::solve(&mesh, &system, &Default::default()).unwrap();
    let exact = |s: f64| oracle.density(s);
    let err = near_edge_error(&sol.density, &layout, &exact, 0.1).unwrap();
    assert!(err > 0.0);
    for d in &mut sol.density {
        if d.dist_to_edge > 0.0 {
            d.value = oracle.density(d.s).unwrap();
        }
    }
    assert!(near_edge_error(&sol.density, &layout, &exact, 0.1).unwrap() < 1e-15);
}
