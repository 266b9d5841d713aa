//! Oracle on bounded domains through an explicit map onto the half-plane.
//!
//! Boundary densities pick up the factor `|Z'|` (flux is conformally
//! invariant), potentials are unchanged, and the holomorphic gradient pulls
//! back as `F(Z(p)) Z'(p)`.

use num_complex::Complex64;

use super::{solve_coefficients, HalfPlaneProblem, OracleError, OracleSolution, ProfileRow};
use crate::geometry::{validate_layout, Arc, CurrentPattern, DiscChart, DomainSpec, ElectrodeLayout, HalfPlaneChart};

#[derive(Debug)]
pub struct MappedOracle {
    chart: Box<dyn HalfPlaneChart>,
    layout: ElectrodeLayout,
    currents: CurrentPattern,
    /// Physical electrode index -> half-plane electrode index.
    to_half_plane: Vec<usize>,
    hp: OracleSolution,
}

/// Oracle on the unit disc; the boundary point `s = pi` goes to infinity.
pub fn disc_oracle(layout: &ElectrodeLayout, currents: &CurrentPattern) -> Result<MappedOracle, OracleError> {
    MappedOracle::new(Box::new(DiscChart), layout.clone(), currents.clone())
}

impl MappedOracle {
    pub fn new(
        chart: Box<dyn HalfPlaneChart>,
        layout: ElectrodeLayout,
        currents: CurrentPattern,
    ) -> Result<Self, OracleError> {
        let domain = chart.domain();
        validate_layout(&layout, &domain)?;
        if let Some(s_inf) = chart.infinity_param() {
            if let Some(i) = layout.arcs.iter().position(|a| a.contains(s_inf)) {
                return Err(OracleError::ElectrodeThroughInfinity(i));
            }
        }
        let mut images = Vec::with_capacity(layout.len());
        for (i, arc) in layout.arcs.iter().enumerate() {
            images.push((chart.boundary_to_real(arc.start)?, chart.boundary_to_real(arc.end)?, i));
        }
        images.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut to_half_plane = vec![0; layout.len()];
        for (k, &(_, _, i)) in images.iter().enumerate() {
            to_half_plane[i] = k;
        }
        let intervals: Vec<(f64, f64)> = images.iter().map(|&(a, b, _)| (a, b)).collect();
        if currents.len() != layout.len() {
            return Err(OracleError::CurrentCount {
                electrodes: layout.len(),
                currents: currents.len(),
            });
        }
        let hp_currents: Vec<f64> = images.iter().map(|&(_, _, i)| currents.values()[i]).collect();
        let problem = HalfPlaneProblem::new(
            ElectrodeLayout::from_pairs(&intervals),
            CurrentPattern::new(hp_currents)?,
        )?;
        let hp = solve_coefficients(&problem)?;
        Ok(MappedOracle {
            chart,
            layout,
            currents,
            to_half_plane,
            hp,
        })
    }

    pub fn domain(&self) -> DomainSpec {
        self.chart.domain()
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn currents(&self) -> &CurrentPattern {
        &self.currents
    }

    pub fn chart(&self) -> &dyn HalfPlaneChart {
        self.chart.as_ref()
    }

    pub fn half_plane(&self) -> &OracleSolution {
        &self.hp
    }

    fn boundary_factor(&self, s: f64) -> Result<(f64, f64), OracleError> {
        let p = self.domain().boundary_point(s)?;
        let (_, dz) = self.chart.map(p)?;
        Ok((self.chart.boundary_to_real(s)?, dz.norm()))
    }

    /// Outward normal derivative at boundary parameter `s` inside an electrode.
    pub fn density(&self, s: f64) -> Result<f64, OracleError> {
        if self.layout.electrode_at(s).is_none() {
            return Err(OracleError::NotOnElectrode(s));
        }
        let (x, factor) = self.boundary_factor(s)?;
        Ok(self.hp.neumann_density(x)? * factor)
    }

    /// Derivative of `u` along the positively oriented boundary, off the electrodes.
    pub fn tangential_derivative(&self, s: f64) -> Result<f64, OracleError> {
        if self.layout.electrode_at(s).is_some() {
            return Err(OracleError::NotOnGap(s));
        }
        let (x, factor) = self.boundary_factor(s)?;
        Ok(self.hp.tangential_derivative(x)? * factor)
    }

    /// `u_x - i u_y` at a point of the closed domain.
    pub fn holomorphic_gradient(&self, p: Complex64) -> Result<Complex64, OracleError> {
        let (mut z, dz) = self.chart.map(p)?;
        if z.im < 0.0 && z.im > -1e-12 * (1.0 + z.norm()) {
            z.im = 0.0;
        }
        Ok(self.hp.eval_f(z)? * dz)
    }

    pub fn gradient(&self, p: Complex64) -> Result<[f64; 2], OracleError> {
        let f = self.holomorphic_gradient(p)?;
        Ok([f.re, -f.im])
    }

    /// Potentials in physical electrode order, zero sum.
    pub fn electrode_potentials(&self) -> Result<Vec<f64>, OracleError> {
        let u = self.hp.electrode_potentials()?;
        Ok(self.to_half_plane.iter().map(|&k| u[k]).collect())
    }

    pub fn energy(&self) -> Result<f64, OracleError> {
        self.hp.energy()
    }

    pub fn electrode_current(&self, i: usize) -> Result<f64, OracleError> {
        self.hp.electrode_current(self.to_half_plane[i])
    }

    fn endpoint_image(&self, s: f64) -> Result<f64, OracleError> {
        for (i, arc) in self.layout.arcs.iter().enumerate() {
            let k = self.to_half_plane[i];
            if s == arc.start {
                return Ok(self.hp.branch().points()[2 * k]);
            }
            if s == arc.end {
                return Ok(self.hp.branch().points()[2 * k + 1]);
            }
        }
        Err(OracleError::NotAnEndpoint(s))
    }

    /// Signed coefficient with `density ~ A_s dist^{lambda - 1}` near the
    /// endpoint `s`, where `lambda = pi / (2 * interior angle)`.
    pub fn signed_edge_coefficient(&self, s: f64) -> Result<f64, OracleError> {
        let z_e = self.endpoint_image(s)?;
        let scale = self.chart.edge_scale(s)?;
        Ok(self.hp.signed_edge_coefficient(z_e)? * 2.0 * scale.lambda * scale.k.sqrt())
    }

    pub fn edge_coefficient(&self, s: f64) -> Result<f64, OracleError> {
        Ok(self.signed_edge_coefficient(s)?.abs())
    }

    /// Boundary profile at the given parameters; endpoints and the point at
    /// infinity are skipped.
    pub fn profile(&self, ss: &[f64]) -> Vec<ProfileRow> {
        let domain = self.domain();
        ss.iter()
            .filter_map(|&s| {
                let dist = self.layout.dist_to_nearest_edge(&domain, s).ok()?;
                if dist == 0.0 || Some(s) == self.chart.infinity_param() {
                    return None;
                }
                let on_electrode = self.layout.electrode_at(s).is_some();
                Some(ProfileRow {
                    s,
                    dist_to_edge: dist,
                    density: if on_electrode { self.density(s).ok() } else { None },
                    tangential_derivative: if on_electrode {
                        None
                    } else {
                        self.tangential_derivative(s).ok()
                    },
                })
            })
            .collect()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.layout.arcs
    }
}
