//! Closed-form collapse-rate formulas.

use std::f64::consts::PI;

use crate::catness::RateConvention;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Bulk matter: density, interatomic spacing and nuclear size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatterSpec {
    /// kg/m^3.
    pub rho: f64,
    /// m.
    pub lattice_constant: f64,
    /// m.
    pub sigma_nuc: f64,
}

impl Default for MatterSpec {
    fn default() -> Self {
        MatterSpec {
            rho: 1000.0,
            lattice_constant: 1e-10,
            sigma_nuc: 1e-14,
        }
    }
}

impl MatterSpec {
    pub fn new(rho: f64, lattice_constant: f64, sigma_nuc: f64) -> Result<Self> {
        let s = MatterSpec {
            rho,
            lattice_constant,
            sigma_nuc,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.check_positive()?;
        if self.lattice_constant <= 2.0 * self.sigma_nuc {
            return Err(Error::OverlappingNuclei {
                lattice_constant: self.lattice_constant,
                nucleus_size: self.sigma_nuc,
            });
        }
        Ok(())
    }

    fn check_positive(&self) -> Result<()> {
        for (name, v) in [
            ("rho", self.rho),
            ("lattice constant", self.lattice_constant),
            ("sigma_nuc", self.sigma_nuc),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Mass per lattice cell, `rho a^3`.
    pub fn cell_mass(&self) -> f64 {
        self.rho * self.lattice_constant.powi(3)
    }
}

/// How the nuclear mass density is obtained from the bulk density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityReading {
    /// `rho (a / sigma_nuc)^3`: the cell mass concentrated in one nucleus.
    AOverSigma,
    /// `rho (R / sigma_nuc)^3` with the radius `R` of the macroscopic body.
    ROverSigma { radius: f64 },
}

/// A value produced by an order-of-magnitude balance rather than an exact
/// derivation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Heuristic {
    pub value: f64,
    pub heuristic: bool,
}

impl Heuristic {
    fn new(value: f64) -> Self {
        Heuristic {
            value,
            heuristic: true,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be > 0, got {v}"
        )))
    }
}

/// `omega_G = sqrt(4 pi G rho / 3)`, 1/s.
pub fn newton_frequency(rho: f64, consts: &PhysicalConstants) -> Result<f64> {
    positive("density", rho)?;
    Ok((4.0 * PI * consts.g * rho / 3.0).sqrt())
}

pub fn nuclear_density(spec: &MatterSpec, reading: DensityReading) -> Result<f64> {
    spec.check_positive()?;
    let len = match reading {
        DensityReading::AOverSigma => spec.lattice_constant,
        DensityReading::ROverSigma { radius } => {
            positive("radius", radius)?;
            radius
        }
    };
    Ok(spec.rho * (len / spec.sigma_nuc).powi(3))
}

/// Newton frequency of nuclear matter.
pub fn nuclear_frequency(
    spec: &MatterSpec,
    reading: DensityReading,
    consts: &PhysicalConstants,
) -> Result<f64> {
    newton_frequency(nuclear_density(spec, reading)?, consts)
}

/// `(omega_nucl / omega_G)^2`.
pub fn amplification(spec: &MatterSpec, reading: DensityReading) -> Result<f64> {
    Ok(nuclear_density(spec, reading)? / spec.rho)
}

/// Leading-order c.o.m. rate for a displacement small against the
/// relevant structure size (body radius, or nuclear size at nuclear
/// resolution).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallDisplacementRate {
    /// 1/s.
    pub rate: f64,
    pub kappa: f64,
    /// Always true: the quadratic law holds only while `dx` is small.
    pub leading_order: bool,
}

/// `kappa M omega^2 dx^2 / hbar`.
pub fn com_rate_small_displacement(
    mass: f64,
    omega: f64,
    dx: f64,
    conv: RateConvention,
    consts: &PhysicalConstants,
) -> Result<SmallDisplacementRate> {
    positive("mass", mass)?;
    positive("omega", omega)?;
    if !(dx >= 0.0 && dx.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dx must be >= 0, got {dx}"
        )));
    }
    Ok(SmallDisplacementRate {
        rate: conv.kappa() * mass * omega * omega * dx * dx / consts.hbar,
        kappa: conv.kappa(),
        leading_order: true,
    })
}

/// `sqrt(hbar / (M omega))`, where spreading balances collapse.
pub fn equilibrium_width(mass: f64, omega: f64, consts: &PhysicalConstants) -> Result<Heuristic> {
    positive("mass", mass)?;
    positive("omega", omega)?;
    Ok(Heuristic::new((consts.hbar / (mass * omega)).sqrt()))
}

/// Collapse rate at the equilibrium width; equal to `omega`.
pub fn equilibrium_rate(omega: f64) -> Result<Heuristic> {
    positive("omega", omega)?;
    Ok(Heuristic::new(omega))
}

/// Unitary spreading rate `hbar / (M dx^2)` of a packet of width `dx`.
pub fn spreading_rate(mass: f64, dx: f64, consts: &PhysicalConstants) -> f64 {
    consts.hbar / (mass * dx * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn newton_frequency_examples() {
        assert_relative_eq!(
            newton_frequency(1000.0, &c()).unwrap(),
            5.2873e-4,
            max_relative = 1e-4
        );
        let w = newton_frequency(250.0, &c()).unwrap();
        assert_relative_eq!(
            newton_frequency(1000.0, &c()).unwrap(),
            2.0 * w,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            newton_frequency(1e15, &c()).unwrap(),
            528.73,
            max_relative = 1e-4
        );
        assert!(newton_frequency(0.0, &c()).is_err());
    }

    #[test]
    fn nuclear_examples() {
        let s = MatterSpec::default();
        let w = nuclear_frequency(&s, DensityReading::AOverSigma, &c()).unwrap();
        assert_relative_eq!(w, 528.73, max_relative = 1e-4);
        assert_relative_eq!(
            amplification(&s, DensityReading::AOverSigma).unwrap(),
            1e12,
            max_relative = 1e-12
        );
        let filled = MatterSpec {
            sigma_nuc: s.lattice_constant,
            ..s
        };
        assert_eq!(
            nuclear_frequency(&filled, DensityReading::AOverSigma, &c()).unwrap(),
            newton_frequency(s.rho, &c()).unwrap()
        );
        assert!(filled.validate().is_err());
        let literal =
            nuclear_frequency(&s, DensityReading::ROverSigma { radius: 1e-2 }, &c()).unwrap();
        assert!(literal > w);
    }

    #[test]
    fn small_displacement_examples() {
        let r =
            com_rate_small_displacement(1e-3, 528.7, 1e-15, RateConvention::HALF, &c()).unwrap();
        assert_relative_eq!(r.rate, 1.325e6, max_relative = 1e-3);
        assert!(r.leading_order);
        let z = com_rate_small_displacement(1e-3, 528.7, 0.0, RateConvention::HALF, &c()).unwrap();
        assert_eq!(z.rate, 0.0);
        let d =
            com_rate_small_displacement(1e-3, 528.7, 2e-15, RateConvention::HALF, &c()).unwrap();
        assert_relative_eq!(d.rate, 4.0 * r.rate, max_relative = 1e-15);
    }

    #[test]
    fn equilibrium_examples() {
        let w = equilibrium_width(1e-3, 5.2873e-4, &c()).unwrap();
        assert!(w.heuristic);
        assert_relative_eq!(w.value, 1.412e-14, max_relative = 1e-3);
        let q = equilibrium_width(4e-3, 5.2873e-4, &c()).unwrap();
        assert_relative_eq!(q.value, 0.5 * w.value, max_relative = 1e-15);
        assert_relative_eq!(
            equilibrium_width(1.0, 528.7, &c()).unwrap().value,
            4.47e-19,
            max_relative = 1e-3
        );
        let tau = 1.0 / equilibrium_rate(5.2873e-4).unwrap().value;
        assert_relative_eq!(tau, 1891.0, max_relative = 1e-3);
        assert_relative_eq!(
            1.0 / equilibrium_rate(528.7).unwrap().value,
            1.9e-3,
            max_relative = 1e-2
        );
    }

    #[test]
    fn balance_identity() {
        for (m, w) in [(1e-3, 5.2873e-4), (1.0, 528.7), (3e-7, 0.1)] {
            let dx = equilibrium_width(m, w, &c()).unwrap().value;
            let collapse = com_rate_small_displacement(m, w, dx, RateConvention::ONE, &c())
                .unwrap()
                .rate;
            assert_relative_eq!(collapse, w, max_relative = 1e-14);
            assert_relative_eq!(spreading_rate(m, dx, &c()), collapse, max_relative = 1e-14);
        }
    }

    #[test]
    fn equilibrium_rate_carries_no_hbar() {
        let base = c();
        let scaled = PhysicalConstants {
            hbar: 10.0 * base.hbar,
            ..base
        };
        let w = newton_frequency(1000.0, &base).unwrap();
        let w10 = newton_frequency(1000.0, &scaled).unwrap();
        assert_eq!(
            equilibrium_rate(w).unwrap().value.to_bits(),
            equilibrium_rate(w10).unwrap().value.to_bits()
        );
        let a = equilibrium_width(1e-3, w, &base).unwrap().value;
        let b = equilibrium_width(1e-3, w, &scaled).unwrap().value;
        assert_relative_eq!(b / a, 10f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn agrees_with_ball_catness() {
        use crate::catness::{catness_g, collapse_rate};
        use crate::densities::{MassDensity, Resolution};
        use crate::vec3::Vec3;
        let (m, r) = (1.0, 1.0);
        let rho = 3.0 * m / (4.0 * PI * r * r * r);
        let w = newton_frequency(rho, &c()).unwrap();
        let res = Resolution::gaussian(1e-12).unwrap();
        let f = MassDensity::uniform_ball(m, r, Vec3::ZERO).unwrap();
        for d in [1e-4, 1e-3] {
            let l = catness_g(&f, &f.translated(Vec3::x(d)), &res, &c()).unwrap();
            for conv in [RateConvention::ONE, RateConvention::HALF] {
                let a = com_rate_small_displacement(m, w, d, conv, &c())
                    .unwrap()
                    .rate;
                assert_relative_eq!(a, collapse_rate(&l, conv, &c()), max_relative = 1e-2);
            }
        }
    }
}
