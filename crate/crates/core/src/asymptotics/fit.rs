use std::f64::consts::{PI, TAU};

use super::{AsymptoticsError, MIN_FIT_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub d_min: f64,
    pub d_max: f64,
}

impl FitWindow {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self, AsymptoticsError> {
        if !(d_min > 0.0 && d_max > d_min && d_max.is_finite()) {
            return Err(AsymptoticsError::InvalidWindow(d_min, d_max));
        }
        Ok(FitWindow { d_min, d_max })
    }

    /// Window scaled by a length, e.g. fractions of an electrode length.
    pub fn scaled(fractions: (f64, f64), length: f64) -> Result<Self, AsymptoticsError> {
        Self::new(fractions.0 * length, fractions.1 * length)
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.d_min && d <= self.d_max
    }
}

/// `value ~ coefficient * dist^exponent` fitted in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub exponent: f64,
    pub coefficient: f64,
    pub window: FitWindow,
    pub r_squared: f64,
    pub n_samples: usize,
}

/// Ordinary least squares of `ln value` on `ln dist` over the samples whose
/// distance lies in the window. Samples outside the window are ignored;
/// every sample inside must be positive.
pub fn fit_power_law(samples: &[(f64, f64)], window: FitWindow) -> Result<FitResult, AsymptoticsError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (index, &(dist, value)) in samples.iter().enumerate() {
        if !window.contains(dist) {
            continue;
        }
        if !(dist > 0.0 && value > 0.0) {
            return Err(AsymptoticsError::NonPositiveValue { index, dist, value });
        }
        xs.push(dist.ln());
        ys.push(value.ln());
    }
    let n = xs.len();
    if n < MIN_FIT_SAMPLES {
        return Err(AsymptoticsError::InsufficientSamples {
            found: n,
            needed: MIN_FIT_SAMPLES,
        });
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(AsymptoticsError::InsufficientSamples {
            found: 1,
            needed: MIN_FIT_SAMPLES,
        });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FitResult {
        exponent: slope,
        coefficient: intercept.exp(),
        window,
        r_squared,
        n_samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Smooth,
    /// Interior angle of the boundary at the edge.
    Corner(f64),
}

/// Leading exponent of the boundary density at an electrode edge.
pub fn predicted_exponent(kind: BoundaryKind) -> Result<f64, AsymptoticsError> {
    match kind {
        BoundaryKind::Smooth => Ok(-0.5),
        BoundaryKind::Corner(phi) if phi > 0.0 && phi < TAU => Ok(PI / (2.0 * phi) - 1.0),
        BoundaryKind::Corner(phi) => Err(AsymptoticsError::InvalidAngle(phi)),
    }
}
