//! Domains, electrode layouts and boundary parametrizations.
//!
//! Every bounded domain is parametrized by arc length `s`, counter-clockwise
//! (domain on the left). The unit disc uses `s -> (cos s, sin s)`. The wedge
//! of angle `phi` and radius `R` starts at the corner, runs out along the
//! first side, around the arc and back along the second side, for a total
//! length of `2R + R*phi`. The upper half-plane uses `s = x`.

pub mod conformal;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use thiserror::Error;

pub use conformal::{
    chart_away_from_electrodes, chart_for, corner_fold, corner_unfold, mobius_disc_to_halfplane,
    mobius_halfplane_to_disc, DiscChart, EdgeScale, HalfPlaneChart, IdentityChart, RotatedDiscChart, WedgeChart,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("electrode arcs {0} and {1} overlap")]
    OverlappingArcs(usize, usize),
    #[error("electrode arc {0} has non-positive length")]
    EmptyArc(usize),
    #[error("electrode arc {0} lies outside the boundary parameter range")]
    OutOfRange(usize),
    #[error("electrode arc {0} is out of order")]
    Unordered(usize),
    #[error("boundary parameter {0} is outside the boundary parameter range")]
    ParameterOutOfRange(f64),
    #[error("the Mobius map has a pole at w = -1")]
    PoleAtMinusOne,
    #[error("the corner unfolding is singular at the origin")]
    OriginSingularity,
    #[error("invalid wedge: angle {angle} must lie in (0, 2pi) and radius {radius} must be positive")]
    InvalidWedge { angle: f64, radius: f64 },
    #[error("currents must sum to zero (sum = {0:e})")]
    CurrentImbalance(f64),
    #[error("current pattern must not be empty")]
    NoCurrents,
    #[error("{0} is not an electrode endpoint")]
    NotAnEndpoint(f64),
}

/// The computational domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    UnitDisc,
    /// Oracle-only; never meshed.
    UpperHalfPlane,
    Wedge {
        angle: f64,
        radius: f64,
    },
}

impl DomainSpec {
    pub fn wedge(angle: f64, radius: f64) -> Result<Self, GeometryError> {
        let d = DomainSpec::Wedge { angle, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match *self {
            DomainSpec::Wedge { angle, radius } => {
                if !(angle > 0.0 && angle < TAU && radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::InvalidWedge { angle, radius });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Total boundary length, `None` for the (unbounded) half-plane.
    pub fn boundary_length(&self) -> Option<f64> {
        match *self {
            DomainSpec::UnitDisc => Some(TAU),
            DomainSpec::UpperHalfPlane => None,
            DomainSpec::Wedge { angle, radius } => Some(2.0 * radius + radius * angle),
        }
    }

    /// True when the boundary parameter wraps around (closed curve).
    pub fn is_closed(&self) -> bool {
        !matches!(self, DomainSpec::UpperHalfPlane)
    }

    fn check_param(&self, s: f64) -> Result<(), GeometryError> {
        let ok = match self.boundary_length() {
            Some(len) => (0.0..=len).contains(&s),
            None => s.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::ParameterOutOfRange(s))
        }
    }

    pub fn boundary_point(&self, s: f64) -> Result<Complex64, GeometryError> {
        self.check_param(s)?;
        Ok(match *self {
            DomainSpec::UnitDisc => Complex64::from_polar(1.0, s),
            DomainSpec::UpperHalfPlane => Complex64::new(s, 0.0),
            DomainSpec::Wedge { angle, radius } => {
                if s <= radius {
                    Complex64::new(s, 0.0)
                } else if s <= radius + radius * angle {
                    Complex64::from_polar(radius, (s - radius) / radius)
                } else {
                    let t = 2.0 * radius + radius * angle - s;
                    Complex64::from_polar(t, angle)
                }
            }
        })
    }

    /// Unit tangent in the direction of increasing `s`.
    pub fn boundary_tangent(&self, s: f64) -> Result<Complex64, GeometryError> {
        self.check_param(s)?;
        Ok(match *self {
            DomainSpec::UnitDisc => Complex64::new(-s.sin(), s.cos()),
            DomainSpec::UpperHalfPlane => Complex64::new(1.0, 0.0),
            DomainSpec::Wedge { angle, radius } => {
                if s < radius {
                    Complex64::new(1.0, 0.0)
                } else if s < radius + radius * angle {
                    let t = (s - radius) / radius;
                    Complex64::new(-t.sin(), t.cos())
                } else {
                    -Complex64::from_polar(1.0, angle)
                }
            }
        })
    }

    /// Interior angle of the boundary at `s` (pi at smooth points).
    pub fn interior_angle(&self, s: f64) -> f64 {
        match *self {
            DomainSpec::Wedge { angle, radius } => {
                let len = 2.0 * radius + radius * angle;
                let tol = 1e-12 * radius;
                if s.abs() <= tol || (s - len).abs() <= tol {
                    angle
                } else if (s - radius).abs() <= tol || (s - radius - radius * angle).abs() <= tol {
                    PI / 2.0
                } else {
                    PI
                }
            }
            _ => PI,
        }
    }

    /// Parameters where the boundary is not smooth.
    pub fn corner_params(&self) -> Vec<f64> {
        match *self {
            DomainSpec::Wedge { angle, radius } => vec![0.0, radius, radius + radius * angle],
            _ => Vec::new(),
        }
    }

    /// Arc-length parameter of the boundary point nearest to `p`.
    pub fn project_to_boundary(&self, p: Complex64) -> f64 {
        match *self {
            DomainSpec::UnitDisc => {
                let t = p.im.atan2(p.re);
                if t < 0.0 {
                    t + TAU
                } else {
                    t
                }
            }
            DomainSpec::UpperHalfPlane => p.re,
            DomainSpec::Wedge { angle, radius } => {
                let side1 = p.re.clamp(0.0, radius);
                let d1 = (p - Complex64::new(side1, 0.0)).norm();
                let dir2 = Complex64::from_polar(1.0, angle);
                let t2 = (p.re * dir2.re + p.im * dir2.im).clamp(0.0, radius);
                let d2 = (p - dir2 * t2).norm();
                let theta_c = wedge_arg(p, angle).clamp(0.0, angle);
                let d3 = (p - Complex64::from_polar(radius, theta_c)).norm();
                if d1 <= d2 && d1 <= d3 {
                    side1
                } else if d3 <= d2 {
                    radius + radius * theta_c
                } else {
                    2.0 * radius + radius * angle - t2
                }
            }
        }
    }

    /// Euclidean distance from `p` to the boundary (bounded domains).
    pub fn distance_to_boundary(&self, p: Complex64) -> f64 {
        match *self {
            DomainSpec::UnitDisc => (1.0 - p.norm()).abs(),
            DomainSpec::UpperHalfPlane => p.im.abs(),
            DomainSpec::Wedge { .. } => {
                let s = self.project_to_boundary(p);
                (p - self.boundary_point(s).expect("projected parameter in range")).norm()
            }
        }
    }

    /// Point-in-domain test (closed domain, small tolerance).
    pub fn contains(&self, p: Complex64) -> bool {
        const EPS: f64 = 1e-12;
        match *self {
            DomainSpec::UnitDisc => p.norm() <= 1.0 + EPS,
            DomainSpec::UpperHalfPlane => p.im >= -EPS,
            DomainSpec::Wedge { angle, radius } => {
                let r = p.norm();
                if r <= EPS {
                    return true;
                }
                if r > radius * (1.0 + EPS) {
                    return false;
                }
                let theta = wedge_arg(p, angle);
                theta >= -EPS && theta <= angle + EPS
            }
        }
    }
}

/// Argument of `p` on the branch whose cut bisects the wedge exterior.
pub(crate) fn wedge_arg(p: Complex64, angle: f64) -> f64 {
    let cut = (angle + TAU) / 2.0;
    let mut theta = p.im.atan2(p.re);
    if theta < cut - TAU {
        theta += TAU;
    }
    if theta >= cut {
        theta -= TAU;
    }
    theta
}

/// One closed boundary arc `[start, end]` in arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
}

impl Arc {
    pub fn new(start: f64, end: f64) -> Self {
        Arc { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.start && s <= self.end
    }

    pub fn contains_strictly(&self, s: f64) -> bool {
        s > self.start && s < self.end
    }
}

/// Disjoint, increasingly ordered electrode arcs on a domain boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeLayout {
    pub arcs: Vec<Arc>,
}

impl ElectrodeLayout {
    pub fn new(arcs: Vec<Arc>) -> Self {
        ElectrodeLayout { arcs }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        ElectrodeLayout {
            arcs: pairs.iter().map(|&(a, b)| Arc::new(a, b)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// All `2N` endpoints in order: `start_0, end_0, start_1, ...`.
    pub fn endpoints(&self) -> Vec<f64> {
        self.arcs.iter().flat_map(|a| [a.start, a.end]).collect()
    }

    /// Index of the electrode containing `s` (closed arcs).
    pub fn electrode_at(&self, s: f64) -> Option<usize> {
        self.arcs.iter().position(|a| a.contains(s))
    }

    /// Arc-length distance from `s` to the nearest electrode endpoint. On
    /// closed boundaries the distance is measured around the curve.
    pub fn dist_to_nearest_edge(&self, domain: &DomainSpec, s: f64) -> Result<f64, GeometryError> {
        domain.check_param(s)?;
        let period = if domain.is_closed() {
            domain.boundary_length()
        } else {
            None
        };
        let d = self
            .endpoints()
            .into_iter()
            .map(|e| {
                let d = (s - e).abs();
                match period {
                    Some(p) => d.min(p - d),
                    None => d,
                }
            })
            .fold(f64::INFINITY, f64::min);
        Ok(d)
    }
}

/// Checks the layout invariants on the given domain.
pub fn validate_layout(layout: &ElectrodeLayout, domain: &DomainSpec) -> Result<(), GeometryError> {
    domain.validate()?;
    let len = domain.boundary_length();
    for (i, arc) in layout.arcs.iter().enumerate() {
        if !(arc.start.is_finite() && arc.end.is_finite()) {
            return Err(GeometryError::OutOfRange(i));
        }
        if arc.end <= arc.start {
            return Err(GeometryError::EmptyArc(i));
        }
        if let Some(len) = len {
            if arc.start < 0.0 || arc.end > len {
                return Err(GeometryError::OutOfRange(i));
            }
        }
    }
    for i in 1..layout.arcs.len() {
        let (prev, cur) = (layout.arcs[i - 1], layout.arcs[i]);
        if cur.start < prev.start {
            if cur.end >= prev.start {
                return Err(GeometryError::OverlappingArcs(i - 1, i));
            }
            return Err(GeometryError::Unordered(i));
        }
        if cur.start <= prev.end {
            return Err(GeometryError::OverlappingArcs(i - 1, i));
        }
    }
    // closed curves: the last arc must not wrap onto the first
    if let (Some(len), true, Some(first), Some(last)) =
        (len, domain.is_closed(), layout.arcs.first(), layout.arcs.last())
    {
        if layout.arcs.len() > 1 && last.end - len >= first.start {
            return Err(GeometryError::OverlappingArcs(0, layout.arcs.len() - 1));
        }
    }
    Ok(())
}

/// Injected electrode currents (positive = current entering the domain).
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentPattern(Vec<f64>);

impl CurrentPattern {
    pub const BALANCE_TOL: f64 = 1e-14;

    pub fn new(currents: Vec<f64>) -> Result<Self, GeometryError> {
        if currents.is_empty() {
            return Err(GeometryError::NoCurrents);
        }
        let sum: f64 = currents.iter().sum();
        let scale = currents.iter().map(|j| j.abs()).sum::<f64>().max(1.0);
        if !sum.is_finite() || sum.abs() > Self::BALANCE_TOL * scale {
            return Err(GeometryError::CurrentImbalance(sum));
        }
        Ok(CurrentPattern(currents))
    }

    pub fn zeros(n: usize) -> Self {
        CurrentPattern(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&j| j == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CurrentPattern(self.0.iter().map(|j| j * factor).collect())
    }
}
