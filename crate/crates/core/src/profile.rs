//! Spherically symmetric mass profiles.
//!
//! Every analytic shape in the crate is a uniform ball of radius `radius`
//! (a point when `radius == 0`) convolved with an isotropic Gaussian of
//! per-axis standard deviation `smear`. A Gaussian blob is a smeared point,
//! a coarse-grained ball is a smeared ball.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::vec3::Vec3;

/// Gaussian tails are cut at this many standard deviations (exp(-72)).
pub const GAUSSIAN_TAIL: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialProfile {
    pub mass: f64,
    pub radius: f64,
    pub smear: f64,
}

impl RadialProfile {
    pub fn ball(mass: f64, radius: f64) -> Self {
        RadialProfile {
            mass,
            radius,
            smear: 0.0,
        }
    }

    pub fn blob(mass: f64, width: f64) -> Self {
        RadialProfile {
            mass,
            radius: 0.0,
            smear: width,
        }
    }

    pub fn smoothed_ball(mass: f64, radius: f64, smear: f64) -> Self {
        RadialProfile {
            mass,
            radius,
            smear,
        }
    }

    pub fn is_point_core(&self) -> bool {
        self.radius == 0.0
    }

    pub fn is_sharp(&self) -> bool {
        self.smear == 0.0
    }

    /// Convolve with a further Gaussian of width `sigma`.
    pub fn smeared(&self, sigma: f64) -> Self {
        RadialProfile {
            smear: self.smear.hypot(sigma),
            ..*self
        }
    }

    pub fn with_mass(&self, mass: f64) -> Self {
        RadialProfile { mass, ..*self }
    }

    /// Radius beyond which the density is negligible.
    pub fn extent(&self) -> f64 {
        self.radius + GAUSSIAN_TAIL * self.smear
    }

    /// Radius enclosing well over 99.9% of the mass.
    pub fn coverage_extent(&self) -> f64 {
        self.radius + 4.5 * self.smear
    }

    /// Mass density of the unsmeared core, kg/m^3.
    pub fn core_density(&self) -> f64 {
        3.0 * self.mass / (4.0 * PI * self.radius.powi(3))
    }

    /// Mass density at distance `r` from the center, kg/m^3.
    pub fn density(&self, r: f64) -> f64 {
        match (self.radius > 0.0, self.smear > 0.0) {
            (true, false) => {
                if r <= self.radius {
                    self.core_density()
                } else {
                    0.0
                }
            }
            (false, true) => {
                let s2 = self.smear * self.smear;
                self.mass * (-r * r / (2.0 * s2)).exp() / (2.0 * PI * s2).powf(1.5)
            }
            (true, true) => {
                self.core_density() * smoothed_ball_fraction(self.radius, self.smear, r)
            }
            (false, false) => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// Radial Fourier transform, `int rho(r) exp(-i k.r) d^3r`.
    pub fn fourier(&self, k: f64) -> f64 {
        let mut v = self.mass;
        if self.radius > 0.0 {
            v *= ball_form_factor(k * self.radius);
        }
        if self.smear > 0.0 {
            v *= (-0.5 * k * k * self.smear * self.smear).exp();
        }
        v
    }

    /// Panel breakpoints in radius for quadrature over the profile.
    pub fn radial_breaks(&self) -> Vec<f64> {
        let (r, s) = (self.radius, self.smear);
        let mut v = vec![0.0];
        if s == 0.0 {
            v.push(r);
        } else if r == 0.0 {
            v.extend([s, 2.0 * s, 4.0 * s, 7.0 * s, 13.0 * s]);
        } else {
            for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 13.0] {
                let x = r + k * s;
                if x > 0.0 {
                    v.push(x);
                }
            }
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }

    /// Draw a point from the normalized profile, relative to its center.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let mut p = Vec3::ZERO;
        if self.radius > 0.0 {
            let dir = unit_vector(rng);
            let u: f64 = rng.random();
            p = dir * (self.radius * u.cbrt());
        }
        if self.smear > 0.0 {
            p += gaussian_vector(rng, self.smear);
        }
        p
    }
}

/// `3 (sin x - x cos x) / x^3`, the form factor of a uniform ball.
pub fn ball_form_factor(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let y = x * x;
        1.0 - y / 10.0 + y * y / 280.0 - y * y * y / 15120.0 + y * y * y * y / 1330560.0
    } else {
        3.0 * (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// Probability that a Gaussian-displaced point at distance `r` from the
/// center of a ball of radius `radius` falls inside it.
pub fn smoothed_ball_fraction(radius: f64, smear: f64, r: f64) -> f64 {
    let s = smear;
    let norm = |v: f64| (-v * v / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
    if r < 1e-6 * s {
        return libm::erf(radius / (std::f64::consts::SQRT_2 * s)) - 2.0 * radius * norm(radius);
    }
    let a = (radius - r) / (std::f64::consts::SQRT_2 * s);
    let b = (radius + r) / (std::f64::consts::SQRT_2 * s);
    let v =
        0.5 * (libm::erf(a) + libm::erf(b)) + (s * s / r) * (norm(radius + r) - norm(radius - r));
    v.max(0.0)
}

pub fn unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, width: f64) -> Vec3 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vec3::new(x, y, z) * width
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::GaussLegendre;
    use approx::assert_relative_eq;

    fn radial_mass(p: &RadialProfile) -> f64 {
        let gl = GaussLegendre::new(40);
        let mut b = p.radial_breaks();
        b.push(p.extent().max(*b.last().unwrap()));
        b.dedup();
        gl.integrate_panels(&b, |r| 4.0 * PI * r * r * p.density(r))
    }

    #[test]
    fn densities_integrate_to_mass() {
        for p in [
            RadialProfile::ball(2.0, 0.7),
            RadialProfile::blob(3.0, 0.2),
            RadialProfile::smoothed_ball(1.5, 1.0, 0.05),
            RadialProfile::smoothed_ball(1.5, 0.1, 0.3),
        ] {
            assert_relative_eq!(radial_mass(&p), p.mass, max_relative = 1e-9);
        }
    }

    #[test]
    fn form_factor_branches_agree() {
        let x: f64 = 0.1;
        let direct = 3.0 * (x.sin() - x * x.cos()) / (x * x * x);
        assert_relative_eq!(ball_form_factor(0.0999999999), direct, max_relative = 1e-11);
    }

    #[test]
    fn smoothed_fraction_limits() {
        // deep inside a ball much larger than the smear, the fraction is 1
        assert_relative_eq!(
            smoothed_ball_fraction(1.0, 1e-3, 0.2),
            1.0,
            max_relative = 1e-12
        );
        assert!(smoothed_ball_fraction(1.0, 1e-3, 1.5) < 1e-100);
        // half way at the surface
        assert_relative_eq!(
            smoothed_ball_fraction(1.0, 1e-4, 1.0),
            0.5,
            max_relative = 1e-3
        );
        // continuity of the r -> 0 branch
        let a = smoothed_ball_fraction(0.5, 0.3, 0.0);
        let b = smoothed_ball_fraction(0.5, 0.3, 1e-5);
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }
}
