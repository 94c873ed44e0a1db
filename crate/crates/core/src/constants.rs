use crate::error::{Error, Result};

/// Physical constants, injected into every computation (never global).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Newton's constant, m^3 kg^-1 s^-2.
    pub g: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Reference nucleon mass, kg.
    pub m0: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            g: 6.67430e-11,
            hbar: 1.054571817e-34,
            m0: 1.67262192e-27,
        }
    }
}

impl PhysicalConstants {
    pub fn new(g: f64, hbar: f64, m0: f64) -> Result<Self> {
        let c = PhysicalConstants { g, hbar, m0 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("G", self.g), ("hbar", self.hbar), ("m0", self.m0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}
