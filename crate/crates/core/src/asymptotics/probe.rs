use num_complex::Complex64;

use super::AsymptoticsError;
use crate::geometry::{DomainSpec, ElectrodeLayout, GeometryError};

/// Local frame at an electrode endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFrame {
    pub center: Complex64,
    /// Unit tangent pointing into the electrode.
    pub tangent: Complex64,
    /// Outward unit normal.
    pub normal: Complex64,
}

impl EdgeFrame {
    /// Point at distance `r` whose direction makes angle `phi` with the
    /// tangent, turning toward the interior.
    pub fn point(&self, r: f64, phi: f64) -> Complex64 {
        self.center + r * (phi.cos() * self.tangent - phi.sin() * self.normal)
    }
}

/// Frame at the endpoint `s` of an electrode on a smooth part of the boundary.
pub fn edge_frame(domain: &DomainSpec, layout: &ElectrodeLayout, s: f64) -> Result<EdgeFrame, GeometryError> {
    let arc = layout
        .arcs
        .iter()
        .find(|a| a.start == s || a.end == s)
        .ok_or(GeometryError::NotAnEndpoint(s))?;
    let forward = domain.boundary_tangent(s)?;
    Ok(EdgeFrame {
        center: domain.boundary_point(s)?,
        tangent: if arc.start == s { forward } else { -forward },
        normal: Complex64::new(0.0, -1.0) * forward,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    /// Angle from the tangent into the electrode.
    pub phi: f64,
    /// Gradient component along the frame tangent.
    pub tangential: f64,
    /// Gradient component along the outward normal.
    pub normal: f64,
}

/// Gradient samples on a half circle of radius `radius` around an endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularProbe {
    pub center: Complex64,
    pub radius: f64,
    pub samples: Vec<ProbeSample>,
}

impl AngularProbe {
    /// Samples `gradient` (as `[d/dx, d/dy]`) at the angles `phis`.
    pub fn sample<E>(
        domain: &DomainSpec,
        frame: &EdgeFrame,
        radius: f64,
        phis: &[f64],
        mut gradient: impl FnMut(Complex64) -> Result<[f64; 2], E>,
    ) -> Result<Self, AsymptoticsError>
    where
        AsymptoticsError: From<E>,
    {
        let mut samples = Vec::with_capacity(phis.len());
        for &phi in phis {
            let p = frame.point(radius, phi);
            if !domain.contains(p) {
                return Err(AsymptoticsError::ProbeOutsideDomain(p));
            }
            let [gx, gy] = gradient(p)?;
            samples.push(ProbeSample {
                phi,
                tangential: gx * frame.tangent.re + gy * frame.tangent.im,
                normal: gx * frame.normal.re + gy * frame.normal.im,
            });
        }
        Ok(AngularProbe {
            center: frame.center,
            radius,
            samples,
        })
    }

    /// Flips every sample when the signed edge coefficient is negative, so
    /// that the profile can be compared with a positive coefficient.
    pub fn normalized(mut self, signed_coefficient: f64) -> Self {
        if signed_coefficient < 0.0 {
            for s in &mut self.samples {
                s.tangential = -s.tangential;
                s.normal = -s.normal;
            }
        }
        self
    }
}

/// Largest deviation of the samples from `A r^(-1/2) (sin(phi/2), cos(phi/2))`,
/// relative to `A r^(-1/2)`.
pub fn angular_profile_error(probe: &AngularProbe, a: f64) -> Result<f64, AsymptoticsError> {
    if !(a > 0.0) {
        return Err(AsymptoticsError::NonPositiveCoefficient(a));
    }
    let scale = a / probe.radius.sqrt();
    Ok(probe
        .samples
        .iter()
        .map(|s| {
            let (sin, cos) = (0.5 * s.phi).sin_cos();
            (s.tangential - scale * sin).hypot(s.normal - scale * cos) / scale
        })
        .fold(0.0, f64::max))
}
