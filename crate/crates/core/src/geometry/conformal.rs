//! Explicit conformal maps onto the upper half-plane.
//!
//! A [`HalfPlaneChart`] sends a bounded domain conformally onto the upper
//! half-plane, mapping one insulated boundary point to infinity and keeping
//! the boundary orientation (increasing `s` goes to increasing `x`).

use std::f64::consts::PI;
use std::fmt::Debug;

use num_complex::Complex64;

use super::{wedge_arg, DomainSpec, ElectrodeLayout, GeometryError};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `z = i(1-w)/(1+w)` and `dz/dw = -2i/(1+w)^2`.
pub fn mobius_disc_to_halfplane(w: Complex64) -> Result<(Complex64, Complex64), GeometryError> {
    let d = Complex64::new(1.0, 0.0) + w;
    if d.norm() == 0.0 {
        return Err(GeometryError::PoleAtMinusOne);
    }
    let z = I * (Complex64::new(1.0, 0.0) - w) / d;
    let dz = -2.0 * I / (d * d);
    Ok((z, dz))
}

/// Inverse of [`mobius_disc_to_halfplane`]: `w = (i - z)/(i + z)`.
pub fn mobius_halfplane_to_disc(z: Complex64) -> Result<Complex64, GeometryError> {
    let d = I + z;
    if d.norm() == 0.0 {
        return Err(GeometryError::PoleAtMinusOne);
    }
    Ok((I - z) / d)
}

/// Unfolds the wedge `0 <= arg z <= phi` onto the upper half-plane via
/// `z^(pi/phi)`; returns the image and `d(image)/dz`. The branch cut bisects
/// the wedge exterior.
pub fn corner_unfold(z: Complex64, phi: f64) -> Result<(Complex64, Complex64), GeometryError> {
    if !(phi > 0.0 && phi < 2.0 * PI) {
        return Err(GeometryError::InvalidWedge {
            angle: phi,
            radius: 1.0,
        });
    }
    let exponent = PI / phi;
    if exponent == 1.0 {
        return Ok((z, Complex64::new(1.0, 0.0)));
    }
    if z.norm() == 0.0 {
        return Err(GeometryError::OriginSingularity);
    }
    let theta = wedge_arg(z, phi);
    let zt = Complex64::from_polar(z.norm().powf(exponent), theta * exponent);
    Ok((zt, exponent * zt / z))
}

/// Inverse of [`corner_unfold`]: `zt^(phi/pi)` with `arg zt` taken in `[0, pi]`.
pub fn corner_fold(zt: Complex64, phi: f64) -> Result<Complex64, GeometryError> {
    let exponent = phi / PI;
    if exponent == 1.0 {
        return Ok(zt);
    }
    if zt.norm() == 0.0 {
        return Err(GeometryError::OriginSingularity);
    }
    let mut arg = zt.im.atan2(zt.re);
    if arg < -PI / 2.0 {
        arg += 2.0 * PI;
    }
    Ok(Complex64::from_polar(zt.norm().powf(exponent), arg * exponent))
}

/// Local behaviour of a chart at a boundary point: `|Z(p) - z_e| ~ k r^(2 lambda)`
/// with `lambda = pi / (2 * interior angle)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeScale {
    pub z_e: f64,
    pub lambda: f64,
    pub k: f64,
}

pub trait HalfPlaneChart: Send + Sync + Debug {
    fn domain(&self) -> DomainSpec;

    /// `Z(p)` and `dZ/dp` at a point of the closed domain.
    fn map(&self, p: Complex64) -> Result<(Complex64, Complex64), GeometryError>;

    /// Real image of the boundary point with parameter `s`.
    fn boundary_to_real(&self, s: f64) -> Result<f64, GeometryError>;

    /// Boundary parameter sent to infinity, if any.
    fn infinity_param(&self) -> Option<f64>;

    fn edge_scale(&self, s: f64) -> Result<EdgeScale, GeometryError> {
        let domain = self.domain();
        let z_e = self.boundary_to_real(s)?;
        let angle = domain.interior_angle(s);
        let lambda = PI / (2.0 * angle);
        let p = domain.boundary_point(s)?;
        if (angle - PI).abs() < 1e-14 {
            let (_, dz) = self.map(p)?;
            return Ok(EdgeScale {
                z_e,
                lambda,
                k: dz.norm(),
            });
        }
        let tangent = domain.boundary_tangent(s)?;
        let dir = tangent * Complex64::from_polar(1.0, angle / 2.0);
        let scale = match domain {
            DomainSpec::Wedge { radius, .. } => radius,
            _ => 1.0,
        };
        let rho = 1e-7 * scale;
        let (z, _) = self.map(p + dir * rho)?;
        Ok(EdgeScale {
            z_e,
            lambda,
            k: (z - z_e).norm() / rho.powf(2.0 * lambda),
        })
    }
}

/// The upper half-plane itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityChart;

impl HalfPlaneChart for IdentityChart {
    fn domain(&self) -> DomainSpec {
        DomainSpec::UpperHalfPlane
    }

    fn map(&self, p: Complex64) -> Result<(Complex64, Complex64), GeometryError> {
        Ok((p, Complex64::new(1.0, 0.0)))
    }

    fn boundary_to_real(&self, s: f64) -> Result<f64, GeometryError> {
        Ok(s)
    }

    fn infinity_param(&self) -> Option<f64> {
        None
    }
}

/// Unit disc through the fixed Mobius map; `w = -1` (s = pi) goes to infinity.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiscChart;

impl HalfPlaneChart for DiscChart {
    fn domain(&self) -> DomainSpec {
        DomainSpec::UnitDisc
    }

    fn map(&self, p: Complex64) -> Result<(Complex64, Complex64), GeometryError> {
        mobius_disc_to_halfplane(p)
    }

    fn boundary_to_real(&self, s: f64) -> Result<f64, GeometryError> {
        if !(0.0..=2.0 * PI).contains(&s) {
            return Err(GeometryError::ParameterOutOfRange(s));
        }
        if s == PI {
            return Err(GeometryError::PoleAtMinusOne);
        }
        Ok((0.5 * s).tan())
    }

    fn infinity_param(&self) -> Option<f64> {
        Some(PI)
    }
}

/// Unit disc rotated first so that the boundary point `s_infinity` goes to
/// infinity instead of `w = -1`.
#[derive(Debug, Clone, Copy)]
pub struct RotatedDiscChart {
    s_infinity: f64,
    rotation: Complex64,
}

impl RotatedDiscChart {
    pub fn new(s_infinity: f64) -> Result<Self, GeometryError> {
        if !(0.0..2.0 * PI).contains(&s_infinity) {
            return Err(GeometryError::ParameterOutOfRange(s_infinity));
        }
        Ok(RotatedDiscChart {
            s_infinity,
            rotation: Complex64::from_polar(1.0, PI - s_infinity),
        })
    }
}

impl HalfPlaneChart for RotatedDiscChart {
    fn domain(&self) -> DomainSpec {
        DomainSpec::UnitDisc
    }

    fn map(&self, p: Complex64) -> Result<(Complex64, Complex64), GeometryError> {
        let (z, dz) = mobius_disc_to_halfplane(p * self.rotation)?;
        Ok((z, dz * self.rotation))
    }

    fn boundary_to_real(&self, s: f64) -> Result<f64, GeometryError> {
        if !(0.0..=2.0 * PI).contains(&s) {
            return Err(GeometryError::ParameterOutOfRange(s));
        }
        let t = (s + PI - self.s_infinity).rem_euclid(2.0 * PI);
        if t == PI {
            return Err(GeometryError::PoleAtMinusOne);
        }
        Ok((0.5 * t).tan())
    }

    fn infinity_param(&self) -> Option<f64> {
        Some(self.s_infinity)
    }
}

/// Circular sector: corner unfolding, then the Joukowski map of the upper
/// half-disc, then a real Mobius map sending the chosen insulated boundary
/// point to infinity. The corner itself lands at `Z = 0`.
#[derive(Debug, Clone, Copy)]
pub struct WedgeChart {
    angle: f64,
    radius: f64,
    s_infinity: f64,
    w_infinity: f64,
}

impl WedgeChart {
    pub fn new(angle: f64, radius: f64, s_infinity: f64) -> Result<Self, GeometryError> {
        let domain = DomainSpec::wedge(angle, radius)?;
        let len = domain.boundary_length().expect("bounded");
        if !(s_infinity > 0.0 && s_infinity < len) {
            return Err(GeometryError::ParameterOutOfRange(s_infinity));
        }
        let mut chart = WedgeChart {
            angle,
            radius,
            s_infinity,
            w_infinity: 0.0,
        };
        chart.w_infinity = chart.joukowski_boundary(s_infinity);
        Ok(chart)
    }

    /// Real Joukowski image of the boundary point `s` (infinite at the corner).
    fn joukowski_boundary(&self, s: f64) -> f64 {
        let (r, phi) = (self.radius, self.angle);
        let len = 2.0 * r + r * phi;
        let e = PI / phi;
        if s <= r {
            let z = (s / r).powf(e);
            -0.5 * (z + 1.0 / z)
        } else if s <= r + r * phi {
            -((s - r) / r * e).cos()
        } else {
            let z = ((len - s) / r).powf(e);
            0.5 * (z + 1.0 / z)
        }
    }

    pub fn s_infinity(&self) -> f64 {
        self.s_infinity
    }
}

impl HalfPlaneChart for WedgeChart {
    fn domain(&self) -> DomainSpec {
        DomainSpec::Wedge {
            angle: self.angle,
            radius: self.radius,
        }
    }

    fn map(&self, p: Complex64) -> Result<(Complex64, Complex64), GeometryError> {
        let (zeta, dzeta) = corner_unfold(p / self.radius, self.angle)?;
        let dzeta = dzeta / self.radius;
        // -1 / (w - w_inf) with w = -(zeta + 1/zeta)/2, cleared of 1/zeta so
        // the corner itself (zeta = 0) is a regular point
        let q = zeta * zeta + 2.0 * self.w_infinity * zeta + 1.0;
        if q.norm() == 0.0 {
            return Err(GeometryError::PoleAtMinusOne);
        }
        let z = 2.0 * zeta / q;
        let dz = 2.0 * (1.0 - zeta * zeta) / (q * q) * dzeta;
        Ok((z, dz))
    }

    fn boundary_to_real(&self, s: f64) -> Result<f64, GeometryError> {
        let len = 2.0 * self.radius + self.radius * self.angle;
        if !(0.0..=len).contains(&s) {
            return Err(GeometryError::ParameterOutOfRange(s));
        }
        let w = self.joukowski_boundary(s);
        if w.is_infinite() {
            return Ok(0.0);
        }
        let shifted = w - self.w_infinity;
        if shifted == 0.0 {
            return Err(GeometryError::PoleAtMinusOne);
        }
        Ok(-1.0 / shifted)
    }

    fn infinity_param(&self) -> Option<f64> {
        Some(self.s_infinity)
    }
}

/// Builds the chart used for `domain`. For wedges the point at infinity is
/// placed in the middle of the longest insulated gap.
pub fn chart_for(domain: &DomainSpec, layout: &ElectrodeLayout) -> Result<Box<dyn HalfPlaneChart>, GeometryError> {
    match *domain {
        DomainSpec::UpperHalfPlane => Ok(Box::new(IdentityChart)),
        DomainSpec::UnitDisc => Ok(Box::new(DiscChart)),
        DomainSpec::Wedge { angle, radius } => {
            let len = domain.boundary_length().expect("bounded");
            let s_inf = longest_gap_midpoint(layout, len, &domain.corner_params());
            Ok(Box::new(WedgeChart::new(angle, radius, s_inf)?))
        }
    }
}

/// Like [`chart_for`], but the disc is rotated so that its point at infinity
/// sits in the longest gap; no electrode then passes through infinity.
pub fn chart_away_from_electrodes(
    domain: &DomainSpec,
    layout: &ElectrodeLayout,
) -> Result<Box<dyn HalfPlaneChart>, GeometryError> {
    match domain {
        DomainSpec::UnitDisc => Ok(Box::new(RotatedDiscChart::new(longest_gap_midpoint(
            layout,
            2.0 * PI,
            &[],
        ))?)),
        _ => chart_for(domain, layout),
    }
}

/// Midpoint of the longest insulated stretch of a closed boundary, avoiding
/// the listed corner parameters.
fn longest_gap_midpoint(layout: &ElectrodeLayout, len: f64, corners: &[f64]) -> f64 {
    let mut gaps = Vec::new();
    let n = layout.arcs.len();
    if n == 0 {
        gaps.push((0.0, len));
    }
    for k in 0..n {
        let start = layout.arcs[k].end;
        let end = if k + 1 < n {
            layout.arcs[k + 1].start
        } else {
            layout.arcs[0].start + len
        };
        gaps.push((start, end));
    }
    let (a, b) = gaps
        .into_iter()
        .fold((0.0, 0.0), |best, g| if g.1 - g.0 > best.1 - best.0 { g } else { best });
    let mut mid = 0.5 * (a + b);
    // nudge off a corner, which the chart cannot send to infinity
    let width = b - a;
    for _ in 0..8 {
        let wrapped = mid.rem_euclid(len);
        if corners
            .iter()
            .any(|&c| (wrapped - c).abs() < 1e-3 * width || (wrapped - c - len).abs() < 1e-3 * width)
        {
            mid = a + (mid - a) * 0.8 + 0.1 * width;
        } else {
            break;
        }
    }
    mid.rem_euclid(len)
}
