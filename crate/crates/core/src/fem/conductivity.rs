//! Scalar conductivity fields, selectable by name.

use std::fmt::Debug;

use super::FemError;

pub trait ConductivityField: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn sigma(&self, p: [f64; 2]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl ConductivityField for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn sigma(&self, _: [f64; 2]) -> f64 {
        self.0
    }
}

/// `a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearX {
    pub a: f64,
    pub b: f64,
}

impl ConductivityField for LinearX {
    fn name(&self) -> &'static str {
        "linear_x"
    }

    fn sigma(&self, p: [f64; 2]) -> f64 {
        self.a + self.b * p[0]
    }
}

/// `base * (1 + amplitude * exp(-|p - center|^2 / width^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub base: f64,
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
}

impl ConductivityField for GaussianBump {
    fn name(&self) -> &'static str {
        "bump"
    }

    fn sigma(&self, p: [f64; 2]) -> f64 {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        self.base * (1.0 + self.amplitude * (-(dx * dx + dy * dy) / (self.width * self.width)).exp())
    }
}

/// Named fields, all multiplied by `scale`: `constant`, `linear_x`
/// (`1 + 0.5 x`) and `bump` (unit-height Gaussian of width 0.3 at the origin).
pub fn conductivity_by_name(name: &str, scale: f64) -> Result<Box<dyn ConductivityField>, FemError> {
    match name {
        "constant" => Ok(Box::new(Constant(scale))),
        "linear_x" => Ok(Box::new(LinearX {
            a: scale,
            b: 0.5 * scale,
        })),
        "bump" => Ok(Box::new(GaussianBump {
            base: scale,
            center: [0.0, 0.0],
            width: 0.3,
            amplitude: 1.0,
        })),
        other => Err(FemError::UnknownConductivity(other.to_owned())),
    }
}
