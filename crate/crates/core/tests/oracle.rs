use std::f64::consts::PI;

use approx::assert_relative_eq;
use cemlab_core::geometry::{
    chart_for, mobius_disc_to_halfplane, CurrentPattern, DomainSpec, ElectrodeLayout, GeometryError,
};
use cemlab_core::hilbert_oracle::*;
use cemlab_core::quadrature::gauss_jacobi_half_adaptive;
use cemlab_core::quadrature::legendre;
use num_complex::Complex64;

// Complete elliptic integral K(m = 3/4) / 2 = int_1^2 dx / sqrt((x^2-1)(4-x^2)).
const I_REF: f64 = 1.0782578237498216;

fn two_electrode(j: [f64; 2]) -> OracleSolution {
    solve_coefficients(&HalfPlaneProblem::from_intervals(&[(-2.0, -1.0), (1.0, 2.0)], &j).unwrap()).unwrap()
}

#[test]
fn branch_product_is_imaginary_on_electrodes_and_real_on_gaps() {
    let layout = ElectrodeLayout::from_pairs(&[(-3.0, -1.5), (0.0, 0.5), (2.0, 4.0)]);
    let r = BranchProduct::new(&layout);
    for &x in &[-2.0, 0.25, 3.0] {
        let v = r.eval(Complex64::new(x, 0.0));
        assert!(v.re.abs() < 1e-15 * v.norm(), "{x}: {v}");
    }
    for &x in &[-5.0, -1.0, 1.0, 5.0] {
        let v = r.eval(Complex64::new(x, 0.0));
        assert!(v.im.abs() < 1e-15 * v.norm(), "{x}: {v}");
    }
    // ~ z^N far away
    let z = Complex64::new(3e4, 2e4);
    let ratio = r.eval(z) / z.powi(3);
    assert_relative_eq!(ratio.re, 1.0, epsilon = 1e-3);
    assert!(ratio.im.abs() < 1e-3);
}

#[test]
fn two_electrode_reference_values() {
    let sol = two_electrode([-1.0, 1.0]);
    let c = sol.coefficients();
    assert_relative_eq!(c[0], -1.0 / I_REF, max_relative = 1e-13);
    assert!(c[1].abs() < 1e-15);
    assert_relative_eq!(
        sol.neumann_density(1.5).unwrap(),
        0.62705170219074436,
        max_relative = 1e-13
    );
    assert_relative_eq!(
        sol.neumann_density(2f64.sqrt()).unwrap(),
        0.65578636724143177,
        max_relative = 1e-13
    );
    assert_relative_eq!(
        sol.neumann_density(-1.5).unwrap(),
        -0.62705170219074436,
        max_relative = 1e-13
    );
    assert_relative_eq!(
        sol.tangential_derivative(0.5).unwrap(),
        0.55300762105881503,
        max_relative = 1e-13
    );
    assert_relative_eq!(
        sol.edge_coefficient(1.0).unwrap(),
        0.37861843565772741,
        max_relative = 1e-13
    );
    assert_relative_eq!(
        sol.edge_coefficient(2.0).unwrap(),
        0.26772366333582158,
        max_relative = 1e-13
    );
    let u = sol.electrode_potentials().unwrap();
    assert_relative_eq!(u[1], 0.78170096134805575, max_relative = 1e-12);
    assert_relative_eq!(u[0], -u[1], max_relative = 1e-14);
    assert_relative_eq!(sol.energy().unwrap(), 1.5634019226961115, max_relative = 1e-12);
}

#[test]
fn odd_polynomial_carries_net_current_to_infinity() {
    // P(z) = (2/pi) z gives +1 on both electrodes
    let v = gauss_jacobi_half_adaptive(1.0, 2.0, 64, 1e-15, |x| x / ((x + 1.0) * (x + 2.0)).sqrt()).unwrap();
    assert_relative_eq!(v, std::f64::consts::FRAC_PI_2, max_relative = 1e-14);
}

#[test]
fn zero_and_reversed_currents() {
    let zero = two_electrode([0.0, 0.0]);
    assert!(zero.coefficients().iter().all(|&c| c == 0.0));
    assert_eq!(zero.eval_f(Complex64::new(0.3, 0.7)).unwrap(), Complex64::new(0.0, 0.0));
    assert_eq!(zero.neumann_density(1.5).unwrap(), 0.0);
    assert_eq!(zero.tangential_derivative(0.0).unwrap(), 0.0);
    assert_eq!(zero.edge_coefficient(1.0).unwrap(), 0.0);
    assert_eq!(zero.electrode_potentials().unwrap(), vec![0.0, 0.0]);
    let a = two_electrode([-1.0, 1.0]).coefficients();
    let b = two_electrode([1.0, -1.0]).coefficients();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(*x, -*y);
    }
}

#[test]
fn symmetry_axis_and_decay() {
    let sol = two_electrode([-1.0, 1.0]);
    // u is odd in x, so u_y vanishes on the axis and F is real there
    for y in [0.1, 1.0, 7.0] {
        let f = sol.eval_f(Complex64::new(0.0, y)).unwrap();
        assert!(f.im.abs() < 1e-16, "{f}");
    }
    let c0 = 1.0 / I_REF;
    for r in [1e3, 1e4] {
        for k in 0..8 {
            let z = Complex64::from_polar(r, std::f64::consts::PI * (k as f64 + 0.5) / 8.0);
            let f = sol.eval_f(z).unwrap();
            assert!(f.norm() <= 1.01 * c0 / (r * r), "{r}: {}", f.norm());
        }
    }
}

#[test]
fn rejects_bad_inputs() {
    assert!(matches!(
        HalfPlaneProblem::from_intervals(&[(0.0, 1.0)], &[0.0]),
        Err(OracleError::TooFewElectrodes(1))
    ));
    assert!(matches!(
        HalfPlaneProblem::from_intervals(&[(0.0, 1.0), (2.0, 3.0)], &[1.0, -0.5]),
        Err(OracleError::Geometry(GeometryError::CurrentImbalance(_)))
    ));
    let sol = two_electrode([-1.0, 1.0]);
    assert!(matches!(sol.neumann_density(0.0), Err(OracleError::NotOnElectrode(_))));
    assert!(matches!(sol.tangential_derivative(1.5), Err(OracleError::NotOnGap(_))));
    assert!(matches!(sol.edge_coefficient(1.5), Err(OracleError::NotAnEndpoint(_))));
    assert!(matches!(
        sol.eval_f(Complex64::new(1.0, 0.0)),
        Err(OracleError::BranchPointEvaluation(_))
    ));
}

#[test]
fn potentials_are_linear_in_currents() {
    let layout = [(-3.0, -2.0), (-0.5, 0.25), (1.0, 1.5), (3.0, 5.0)];
    let j1 = [1.0, -0.25, -1.5, 0.75];
    let j2 = [0.5, 0.5, -2.0, 1.0];
    let s = |j: &[f64]| solve_coefficients(&HalfPlaneProblem::from_intervals(&layout, j).unwrap()).unwrap();
    let (a, b) = (s(&j1), s(&j2));
    let sum: Vec<f64> = j1.iter().zip(&j2).map(|(x, y)| 2.0 * x - y).collect();
    let c = s(&sum);
    for k in 0..4 {
        let lhs = c.scaled_coefficients().0[k];
        let rhs = 2.0 * a.scaled_coefficients().0[k] - b.scaled_coefficients().0[k];
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }
    for k in 0..4 {
        assert!((c.electrode_current(k).unwrap() - sum[k]).abs() < 1e-12);
    }
}

fn disc_pair(j: [f64; 2]) -> MappedOracle {
    let layout = ElectrodeLayout::from_pairs(&[(PI / 8.0, 3.0 * PI / 8.0), (5.0 * PI / 8.0, 7.0 * PI / 8.0)]);
    disc_oracle(&layout, &CurrentPattern::new(j.to_vec()).unwrap()).unwrap()
}

/// Integral of the density over an arc, substituting s = a + (b-a) sin^2(t)
/// to absorb square-root endpoint singularities, with geometric panels
/// toward t = 0 for stronger ones at the start.
fn arc_integral(o: &MappedOracle, a: f64, b: f64) -> f64 {
    let g = |t: f64| {
        let s = a + (b - a) * t.sin().powi(2);
        o.density(s).unwrap() * (b - a) * (2.0 * t).sin()
    };
    let mut sum = 0.0;
    let m = 32;
    for k in 1..m {
        let (lo, hi) = (k as f64 * PI / 2.0 / m as f64, (k + 1) as f64 * PI / 2.0 / m as f64);
        sum += legendre(lo, hi, 16, g);
    }
    let mut hi = PI / 2.0 / m as f64;
    loop {
        let lo = 0.5 * hi;
        if lo < 1e-6 {
            break;
        }
        sum += legendre(lo, hi, 16, g);
        hi = lo;
    }
    // remaining piece treated as c t^beta
    let beta = (g(hi) / g(0.5 * hi)).log2();
    sum + g(hi) * hi / (1.0 + beta)
}

#[test]
fn disc_densities_integrate_to_currents() {
    let o = disc_pair([1.0, -1.0]);
    assert_relative_eq!(arc_integral(&o, PI / 8.0, 3.0 * PI / 8.0), 1.0, epsilon = 1e-9);
    assert_relative_eq!(arc_integral(&o, 5.0 * PI / 8.0, 7.0 * PI / 8.0), -1.0, epsilon = 1e-9);
    assert_relative_eq!(o.electrode_current(0).unwrap(), 1.0, epsilon = 1e-12);
    let u = o.electrode_potentials().unwrap();
    assert!(u[0] > 0.0 && (u[0] + u[1]).abs() < 1e-14);
    // symmetric about the y axis: density at s and pi - s are opposite
    for s in [0.5, 0.9, 1.1] {
        assert_relative_eq!(o.density(s).unwrap(), -o.density(PI - s).unwrap(), max_relative = 1e-10);
    }
}

#[test]
fn zero_currents_give_zero_solution() {
    let o = disc_pair([0.0, 0.0]);
    assert_eq!(o.density(1.0).unwrap(), 0.0);
    assert_eq!(o.gradient(Complex64::new(0.2, 0.1)).unwrap(), [0.0, 0.0]);
    assert_eq!(o.electrode_potentials().unwrap(), vec![0.0, 0.0]);
}

#[test]
fn electrode_through_infinity_is_rejected() {
    let layout = ElectrodeLayout::from_pairs(&[(0.5, 1.0), (3.0, 3.5)]);
    let err = disc_oracle(&layout, &CurrentPattern::new(vec![1.0, -1.0]).unwrap()).unwrap_err();
    assert!(matches!(err, OracleError::ElectrodeThroughInfinity(1)));
}

#[test]
fn disc_edge_coefficient_is_half_plane_coefficient_times_root_of_map_derivative() {
    let o = disc_pair([1.0, -1.0]);
    let s = PI / 8.0;
    let w = Complex64::from_polar(1.0, s);
    let (_, dz) = mobius_disc_to_halfplane(w).unwrap();
    let z_e = o.chart().boundary_to_real(s).unwrap();
    let a_hp = o.half_plane().edge_coefficient(z_e).unwrap();
    assert_relative_eq!(
        o.edge_coefficient(s).unwrap(),
        a_hp * dz.norm().sqrt(),
        max_relative = 1e-14
    );
    // compare with density * sqrt(dist) very close to the edge
    let d = 1e-9;
    assert_relative_eq!(
        o.density(s + d).unwrap().abs() * d.sqrt(),
        o.edge_coefficient(s).unwrap(),
        max_relative = 1e-6
    );
}

#[test]
fn mapped_gradient_matches_boundary_data() {
    let o = disc_pair([1.0, -1.0]);
    // on the electrode the gradient is normal: density = grad . outward normal
    let s = 1.0;
    let n = Complex64::from_polar(1.0, s);
    let g = o.gradient(n * (1.0 - 1e-9)).unwrap();
    let normal = g[0] * n.re + g[1] * n.im;
    assert_relative_eq!(normal, o.density(s).unwrap(), max_relative = 1e-6);
    let s = 0.1;
    let t = Complex64::from_polar(1.0, s) * Complex64::i();
    let g = o.gradient(Complex64::from_polar(1.0 - 1e-9, s)).unwrap();
    assert_relative_eq!(
        g[0] * t.re + g[1] * t.im,
        o.tangential_derivative(s).unwrap(),
        max_relative = 1e-6
    );
}

#[test]
fn wedge_oracle_conserves_current_and_matches_corner_exponent() {
    let phi = 1.5 * PI;
    let domain = DomainSpec::wedge(phi, 1.0).unwrap();
    let layout = ElectrodeLayout::from_pairs(&[(0.0, 0.5), (2.0, 3.0)]);
    let chart = chart_for(&domain, &layout).unwrap();
    let o = MappedOracle::new(chart, layout, CurrentPattern::new(vec![1.0, -1.0]).unwrap()).unwrap();
    assert_relative_eq!(arc_integral(&o, 0.0, 0.5), 1.0, epsilon = 1e-7);
    // at the corner the density behaves like dist^{pi/(2 phi) - 1} = dist^{-2/3}
    let a = o.signed_edge_coefficient(0.0).unwrap();
    for d in [1e-8, 1e-9] {
        let ratio = o.density(d).unwrap() / d.powf(PI / (2.0 * phi) - 1.0);
        assert_relative_eq!(ratio, a, max_relative = 1e-4);
    }
}

#[test]
fn straight_wedge_corner_is_a_regular_edge() {
    let domain = DomainSpec::wedge(PI, 1.0).unwrap();
    let layout = ElectrodeLayout::from_pairs(&[(0.0, 0.5), (2.0, 3.0)]);
    let chart = chart_for(&domain, &layout).unwrap();
    let o = MappedOracle::new(chart, layout, CurrentPattern::new(vec![1.0, -1.0]).unwrap()).unwrap();
    let a = o.signed_edge_coefficient(0.0).unwrap();
    assert!(a.is_finite());
    for d in [1e-8, 1e-9] {
        assert_relative_eq!(o.density(d).unwrap() * d.sqrt(), a, max_relative = 1e-3);
    }
}
