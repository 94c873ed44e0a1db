//! Closed-form Newton interaction energies.

use std::f64::consts::PI;

use crate::constants::PhysicalConstants;

/// Dimensionless self-overlap polynomial of two equal uniform balls.
///
/// `U(d) = -G M^2 / R * ball_overlap_poly(d / R)` for `d <= 2R`. The
/// coefficients come from integrating the interior/exterior ball potential
/// over the second ball; they are checked against the quadrature oracle in
/// the tests below and in the acceptance suite.
pub fn ball_overlap_poly(u: f64) -> f64 {
    let u2 = u * u;
    6.0 / 5.0 - 0.5 * u2 + 3.0 / 16.0 * u2 * u - u2 * u2 * u / 160.0
}

/// `P(u2) - P(u1)` without cancellation, given `du = u2 - u1`.
pub fn ball_overlap_poly_diff(u1: f64, u2: f64, du: f64) -> f64 {
    let h1 = u1 + u2;
    let h2 = u2 * h1 + u1 * u1;
    let h3 = u2 * h2 + u1 * u1 * u1;
    let h4 = u2 * h3 + u1.powi(4);
    du * (-0.5 * h1 + 3.0 / 16.0 * h2 - h4 / 160.0)
}

/// Newton interaction energy of two uniform balls of equal mass `m` and
/// radius `r` at center distance `d`.
pub fn ball_ball_energy(m: f64, r: f64, d: f64, consts: &PhysicalConstants) -> f64 {
    let u = d / r;
    if u >= 2.0 {
        -consts.g * m * m / d
    } else {
        -consts.g * m * m / r * ball_overlap_poly(u)
    }
}

/// `erf(r / c) / r` with its finite limit at `r = 0`.
pub fn erf_over_r(r: f64, c: f64) -> f64 {
    let x = r / c;
    if x < 1e-4 {
        2.0 / (c * PI.sqrt()) * (1.0 - x * x / 3.0)
    } else {
        libm::erf(x) / r
    }
}

/// Newton interaction energy of two Gaussian blobs (per-axis widths `w1`,
/// `w2`; either may be zero for a point) at center distance `d`.
pub fn gaussian_gaussian_energy(
    m1: f64,
    m2: f64,
    w1: f64,
    w2: f64,
    d: f64,
    consts: &PhysicalConstants,
) -> f64 {
    let s = w1.hypot(w2);
    if s == 0.0 {
        return -consts.g * m1 * m2 / d;
    }
    // 2 w_eff with w_eff^2 = (w1^2 + w2^2) / 2
    let c = std::f64::consts::SQRT_2 * s;
    -consts.g * m1 * m2 * erf_over_r(d, c)
}

/// Potential energy of a point mass `m` at distance `r` from the center of a
/// uniform ball of mass `big_m` and radius `radius`.
pub fn ball_point_energy(
    big_m: f64,
    radius: f64,
    m: f64,
    r: f64,
    consts: &PhysicalConstants,
) -> f64 {
    if r >= radius {
        -consts.g * big_m * m / r
    } else {
        -consts.g * big_m * m * (3.0 * radius * radius - r * r) / (2.0 * radius.powi(3))
    }
}

/// Volume of the intersection of two balls at center distance `d`.
pub fn lens_volume(ra: f64, rb: f64, d: f64) -> f64 {
    if d >= ra + rb {
        return 0.0;
    }
    if d <= (ra - rb).abs() {
        let r = ra.min(rb);
        return 4.0 / 3.0 * PI * r * r * r;
    }
    let s = ra + rb - d;
    PI * s * s * (d * d + 2.0 * d * (ra + rb) - 3.0 * (ra - rb) * (ra - rb)) / (12.0 * d)
}
