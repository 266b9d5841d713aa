//! Semi-analytic solution of the electrode problem on the upper half-plane.
//!
//! With zero contact impedance the holomorphic gradient `F = u_x - i u_y` has
//! vanishing real part on electrodes and vanishing imaginary part on the
//! insulated parts of the real axis. Writing `F = P / R` with
//! `R(z) = prod_k sqrt(z - a_k) sqrt(z - b_k)` turns this into a linear
//! problem for the coefficients of the polynomial `P`.
//!
//! Signs: the boundary density is the outward normal derivative
//! `-u_y = Im F(x + i0)`, so a positive current enters the domain and raises
//! the potential of its electrode.

mod mapped;

pub use mapped::{disc_oracle, MappedOracle};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{validate_layout, CurrentPattern, DomainSpec, ElectrodeLayout, GeometryError};
use crate::quadrature::{gauss_jacobi_half_adaptive, QuadratureError, DEFAULT_JACOBI_NODES};

const QUAD_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("at least two electrodes are required, got {0}")]
    TooFewElectrodes(usize),
    #[error("{currents} currents for {electrodes} electrodes")]
    CurrentCount { electrodes: usize, currents: usize },
    #[error("coefficient system is singular (relative residual {0:e})")]
    SingularSystem(f64),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(#[from] QuadratureError),
    #[error("evaluation at branch point {0}")]
    BranchPointEvaluation(f64),
    #[error("point {0} is below the real axis")]
    LowerHalfPlane(Complex64),
    #[error("{0} is not inside an electrode")]
    NotOnElectrode(f64),
    #[error("{0} is not inside an insulated gap")]
    NotOnGap(f64),
    #[error("{0} is not an electrode endpoint")]
    NotAnEndpoint(f64),
    #[error("electrode {0} contains the point sent to infinity")]
    ElectrodeThroughInfinity(usize),
}

/// Electrode intervals on the real axis with their injected currents.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlaneProblem {
    layout: ElectrodeLayout,
    currents: CurrentPattern,
}

impl HalfPlaneProblem {
    pub fn new(layout: ElectrodeLayout, currents: CurrentPattern) -> Result<Self, OracleError> {
        validate_layout(&layout, &DomainSpec::UpperHalfPlane)?;
        if layout.len() < 2 {
            return Err(OracleError::TooFewElectrodes(layout.len()));
        }
        if currents.len() != layout.len() {
            return Err(OracleError::CurrentCount {
                electrodes: layout.len(),
                currents: currents.len(),
            });
        }
        Ok(HalfPlaneProblem { layout, currents })
    }

    pub fn from_intervals(intervals: &[(f64, f64)], currents: &[f64]) -> Result<Self, OracleError> {
        Self::new(
            ElectrodeLayout::from_pairs(intervals),
            CurrentPattern::new(currents.to_vec())?,
        )
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn currents(&self) -> &CurrentPattern {
        &self.currents
    }

    pub fn n(&self) -> usize {
        self.layout.len()
    }
}

/// `R(z)`: product of per-electrode square roots, each positive to the right
/// of its interval. Purely imaginary on electrodes, real on gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchProduct {
    points: Vec<f64>,
}

/// Where a real point sits relative to the electrodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisLocation {
    Electrode(usize),
    /// Gap following the given number of electrodes (0 = left of all).
    Gap(usize),
    BranchPoint(usize),
}

impl BranchProduct {
    pub fn new(layout: &ElectrodeLayout) -> Self {
        BranchProduct {
            points: layout.endpoints(),
        }
    }

    /// Sorted branch points `a_0 < b_0 < a_1 < ...`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn pairs(&self) -> usize {
        self.points.len() / 2
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let z = upper_limit(z);
        self.points
            .chunks_exact(2)
            .map(|ab| (z - ab[0]).sqrt() * (z - ab[1]).sqrt())
            .product()
    }

    pub fn locate(&self, x: f64) -> AxisLocation {
        if let Some(k) = self.points.iter().position(|&p| p == x) {
            return AxisLocation::BranchPoint(k);
        }
        let below = self.points.partition_point(|&p| p < x);
        if below % 2 == 1 {
            AxisLocation::Electrode(below / 2)
        } else {
            AxisLocation::Gap(below / 2)
        }
    }

    /// Sign of `R` on the gap after `k` electrodes, or of `R / i` on electrode `k`.
    fn sign_right_of(&self, k: usize) -> f64 {
        let right = self.pairs() - k;
        if right.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Product of `sqrt|x - p|` over branch points except those in `skip`.
    fn abs_root_product(&self, x: f64, skip: &[usize]) -> f64 {
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, &p)| (x - p).abs())
            .product::<f64>()
            .sqrt()
    }
}

fn upper_limit(z: Complex64) -> Complex64 {
    // -0.0 would select the lower branch of the square roots
    if z.im == 0.0 {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}

/// Solved oracle: `P` is stored in the scaled variable `t = (z - center) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    problem: HalfPlaneProblem,
    branch: BranchProduct,
    center: f64,
    scale: f64,
    coeffs: Vec<f64>,
}

/// Solves for the coefficients of `P`. Rows impose the electrode currents;
/// the last row is replaced by the vanishing of the leading coefficient,
/// which is zero net flux through infinity.
pub fn solve_coefficients(problem: &HalfPlaneProblem) -> Result<OracleSolution, OracleError> {
    let n = problem.n();
    let branch = BranchProduct::new(&problem.layout);
    let pts = branch.points();
    let center = 0.5 * (pts[0] + pts[pts.len() - 1]);
    let scale = 0.5 * (pts[pts.len() - 1] - pts[0]);

    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n.saturating_sub(1) {
        let (a, b) = (pts[2 * j], pts[2 * j + 1]);
        let s = branch.sign_right_of(j + 1);
        for k in 0..n {
            let v = gauss_jacobi_half_adaptive(a, b, DEFAULT_JACOBI_NODES, QUAD_TOL, |x| {
                ((x - center) / scale).powi(k as i32) / branch.abs_root_product(x, &[2 * j, 2 * j + 1])
            })?;
            m[(j, k)] = -s * v;
        }
    }
    m[(n - 1, n - 1)] = 1.0;
    let mut rhs = DVector::from_column_slice(problem.currents.values());
    rhs[n - 1] = 0.0;

    let coeffs = m
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(OracleError::SingularSystem(f64::INFINITY))?;
    let residual = (&m * &coeffs - &rhs).norm();
    let size = m.norm() * coeffs.norm() + rhs.norm();
    if !(residual <= 1e-12 * size) {
        return Err(OracleError::SingularSystem(residual / size));
    }
    Ok(OracleSolution {
        problem: problem.clone(),
        branch,
        center,
        scale,
        coeffs: coeffs.iter().copied().collect(),
    })
}

impl OracleSolution {
    pub fn problem(&self) -> &HalfPlaneProblem {
        &self.problem
    }

    pub fn branch(&self) -> &BranchProduct {
        &self.branch
    }

    /// Coefficients of `P` in powers of `(z - center) / scale`.
    pub fn scaled_coefficients(&self) -> (&[f64], f64, f64) {
        (&self.coeffs, self.center, self.scale)
    }

    /// Coefficients of `P` in powers of `z`.
    pub fn coefficients(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        // expand sum_k c_k ((z - center)/scale)^k
        let mut binom = vec![1.0];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                let mut next = vec![1.0; k + 1];
                for i in 1..k {
                    next[i] = binom[i - 1] + binom[i];
                }
                binom = next;
            }
            let factor = c / self.scale.powi(k as i32);
            for (i, &b) in binom.iter().enumerate() {
                out[i] += factor * b * (-self.center).powi((k - i) as i32);
            }
        }
        out
    }

    pub fn poly(&self, z: Complex64) -> Complex64 {
        let t = (z - self.center) / self.scale;
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * t + c)
    }

    fn poly_real(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Holomorphic gradient `F = u_x - i u_y` at `z` with `Im z >= 0`; real
    /// points are evaluated as limits from above.
    pub fn eval_f(&self, z: Complex64) -> Result<Complex64, OracleError> {
        if z.im < 0.0 {
            return Err(OracleError::LowerHalfPlane(z));
        }
        if z.im == 0.0 {
            if let AxisLocation::BranchPoint(k) = self.branch.locate(z.re) {
                return Err(OracleError::BranchPointEvaluation(self.branch.points[k]));
            }
        }
        Ok(self.poly(z) / self.branch.eval(z))
    }

    /// `(u_x, u_y)`.
    pub fn gradient(&self, z: Complex64) -> Result<[f64; 2], OracleError> {
        let f = self.eval_f(z)?;
        Ok([f.re, -f.im])
    }

    /// Outward normal derivative of `u` inside an electrode.
    pub fn neumann_density(&self, x: f64) -> Result<f64, OracleError> {
        let AxisLocation::Electrode(j) = self.branch.locate(x) else {
            return Err(OracleError::NotOnElectrode(x));
        };
        let (a, b) = (self.branch.points[2 * j], self.branch.points[2 * j + 1]);
        let w = ((x - a) * (b - x)).sqrt();
        let q = self.branch.abs_root_product(x, &[2 * j, 2 * j + 1]);
        Ok(-self.branch.sign_right_of(j + 1) * self.poly_real(x) / (w * q))
    }

    /// `u_x` on an insulated part of the axis.
    pub fn tangential_derivative(&self, x: f64) -> Result<f64, OracleError> {
        let AxisLocation::Gap(k) = self.branch.locate(x) else {
            return Err(OracleError::NotOnGap(x));
        };
        let r = self.branch.sign_right_of(k) * self.branch.abs_root_product(x, &[]);
        Ok(self.poly_real(x) / r)
    }

    fn endpoint_index(&self, e: f64) -> Result<usize, OracleError> {
        self.branch
            .points
            .iter()
            .position(|&p| p == e)
            .ok_or(OracleError::NotAnEndpoint(e))
    }

    /// Signed coefficient `A_s` with `density(x) ~ A_s |x - e|^{-1/2}` on the
    /// electrode side of `e`; on the gap side `u_x` pointing into the electrode
    /// has the same leading term.
    pub fn signed_edge_coefficient(&self, e: f64) -> Result<f64, OracleError> {
        let k = self.endpoint_index(e)?;
        let j = k / 2;
        let others = self.branch.abs_root_product(e, &[k]);
        Ok(-self.branch.sign_right_of(j + 1) * self.poly_real(e) / others)
    }

    /// `A = |P(e)| / sqrt(prod_{p != e} |e - p|)`.
    pub fn edge_coefficient(&self, e: f64) -> Result<f64, OracleError> {
        Ok(self.signed_edge_coefficient(e)?.abs())
    }

    /// Electrode potentials normalized to zero sum, from integrating `u_x`
    /// across each gap.
    pub fn electrode_potentials(&self) -> Result<Vec<f64>, OracleError> {
        let n = self.problem.n();
        let pts = &self.branch.points;
        let mut u = vec![0.0; n];
        for j in 0..n - 1 {
            let (a, b) = (pts[2 * j + 1], pts[2 * j + 2]);
            let sign = self.branch.sign_right_of(j + 1);
            let jump = gauss_jacobi_half_adaptive(a, b, DEFAULT_JACOBI_NODES, QUAD_TOL, |x| {
                self.poly_real(x) / (sign * self.branch.abs_root_product(x, &[2 * j + 1, 2 * j + 2]))
            })?;
            u[j + 1] = u[j] + jump;
        }
        let mean = u.iter().sum::<f64>() / n as f64;
        u.iter_mut().for_each(|v| *v -= mean);
        Ok(u)
    }

    /// Dirichlet energy `sum_i J_i U_i`.
    pub fn energy(&self) -> Result<f64, OracleError> {
        let u = self.electrode_potentials()?;
        Ok(self.problem.currents.values().iter().zip(&u).map(|(j, u)| j * u).sum())
    }

    /// Integral of the density over electrode `j` by the endpoint-weighted rule.
    pub fn electrode_current(&self, j: usize) -> Result<f64, OracleError> {
        let (a, b) = (self.branch.points[2 * j], self.branch.points[2 * j + 1]);
        let s = self.branch.sign_right_of(j + 1);
        Ok(gauss_jacobi_half_adaptive(a, b, DEFAULT_JACOBI_NODES, QUAD_TOL, |x| {
            -s * self.poly_real(x) / self.branch.abs_root_product(x, &[2 * j, 2 * j + 1])
        })?)
    }

    /// Boundary profile rows `(x, dist_to_edge, density, tangential_derivative)`
    /// at the given points; branch points are skipped.
    pub fn profile(&self, xs: &[f64]) -> Vec<ProfileRow> {
        xs.iter()
            .filter_map(|&x| {
                let dist = self
                    .branch
                    .points
                    .iter()
                    .map(|p| (x - p).abs())
                    .fold(f64::INFINITY, f64::min);
                match self.branch.locate(x) {
                    AxisLocation::Electrode(_) => Some(ProfileRow {
                        s: x,
                        dist_to_edge: dist,
                        density: self.neumann_density(x).ok(),
                        tangential_derivative: None,
                    }),
                    AxisLocation::Gap(_) => Some(ProfileRow {
                        s: x,
                        dist_to_edge: dist,
                        density: None,
                        tangential_derivative: self.tangential_derivative(x).ok(),
                    }),
                    AxisLocation::BranchPoint(_) => None,
                }
            })
            .collect()
    }
}

/// One row of a boundary profile; undefined fields are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub s: f64,
    pub dist_to_edge: f64,
    pub density: Option<f64>,
    pub tangential_derivative: Option<f64>,
}
