//! Pair functionals of two radial profiles.
//!
//! Two kernels are supported: the Newton energy `-G int int f g / |r - s|`
//! and the plain overlap `int f g`. Closed forms are used where they exist;
//! everything else goes through the radial Fourier representation
//!
//! ```text
//! newton(r)  = -(2G/pi)     int_0^inf fa(k) fb(k) sinc(k r) dk
//! overlap(r) =  1/(2 pi^2)  int_0^inf fa(k) fb(k) sinc(k r) k^2 dk
//! ```
//!
//! `pair_shift` returns `value(|sep + shift|) - value(|sep|)` evaluated
//! without subtracting two nearly equal numbers, which is what catness sums
//! need for displacements many orders of magnitude below the shape size.

use std::f64::consts::PI;

use super::closed_form::{
    ball_overlap_poly, ball_overlap_poly_diff, ball_point_energy, erf_over_r, lens_volume,
};
use super::Method;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::profile::{RadialProfile, GAUSSIAN_TAIL};
use crate::quad::{GaussLegendre, NeumaierSum};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Newton,
    Overlap,
}

const SPECTRAL_ORDER: usize = 12;
const MAX_PANELS: usize = 20_000_000;

/// Below this smear-to-radius ratio a smoothed ball is treated as sharp in
/// Newton energies; the change is of relative order `(smear / radius)^2`.
const SHARPEN_RATIO: f64 = 1e-7;

fn newton_profile(p: &RadialProfile) -> RadialProfile {
    if p.radius > 0.0 && p.smear > 0.0 && p.smear < SHARPEN_RATIO * p.radius {
        RadialProfile::ball(p.mass, p.radius)
    } else {
        *p
    }
}

/// Center distance beyond which the two profiles do not overlap.
fn disjoint_distance(a: &RadialProfile, b: &RadialProfile) -> f64 {
    a.radius + b.radius + GAUSSIAN_TAIL * a.smear.hypot(b.smear)
}

fn both_points(a: &RadialProfile, b: &RadialProfile) -> bool {
    a.is_point_core() && b.is_point_core()
}

fn equal_sharp_balls(a: &RadialProfile, b: &RadialProfile) -> bool {
    a.is_sharp() && b.is_sharp() && a.radius > 0.0 && a.radius == b.radius
}

/// Pair value at center distance `r`.
pub fn pair_value(
    kernel: Kernel,
    a: &RadialProfile,
    b: &RadialProfile,
    r: f64,
    consts: &PhysicalConstants,
) -> Result<(f64, Method)> {
    let (a, b) = match kernel {
        Kernel::Newton => (&newton_profile(a), &newton_profile(b)),
        Kernel::Overlap => (a, b),
    };
    let mm = a.mass * b.mass;
    let s = a.smear.hypot(b.smear);
    match kernel {
        Kernel::Newton => {
            if r > 0.0 && r >= disjoint_distance(a, b) {
                return Ok((-consts.g * mm / r, Method::ClosedForm));
            }
            if both_points(a, b) {
                if s == 0.0 {
                    return Err(Error::DegenerateGeometry(
                        "coincident point masses have infinite energy".into(),
                    ));
                }
                let c = std::f64::consts::SQRT_2 * s;
                return Ok((-consts.g * mm * erf_over_r(r, c), Method::ClosedForm));
            }
            if equal_sharp_balls(a, b) {
                let v = -consts.g * mm / a.radius * ball_overlap_poly(r / a.radius);
                return Ok((v, Method::ClosedForm));
            }
            if a.is_sharp() && b.is_sharp() && (a.is_point_core() || b.is_point_core()) {
                let (ball, pt) = if a.is_point_core() { (b, a) } else { (a, b) };
                let v = ball_point_energy(ball.mass, ball.radius, pt.mass, r, consts);
                return Ok((v, Method::ClosedForm));
            }
            let v = spectral(kernel, a, b, r, |k| sinc(k * r))?;
            Ok((-2.0 * consts.g / PI * v, Method::SemiAnalytic))
        }
        Kernel::Overlap => {
            if r >= disjoint_distance(a, b) && !(s == 0.0 && both_points(a, b)) {
                return Ok((0.0, Method::ClosedForm));
            }
            if both_points(a, b) {
                if s == 0.0 {
                    return Err(Error::DegenerateGeometry(
                        "overlap of point masses is undefined".into(),
                    ));
                }
                let v = mm * (-r * r / (2.0 * s * s)).exp() / (2.0 * PI * s * s).powf(1.5);
                return Ok((v, Method::ClosedForm));
            }
            if a.is_sharp() && b.is_sharp() {
                if a.is_point_core() || b.is_point_core() {
                    return Err(Error::DegenerateGeometry(
                        "overlap with an unsmeared point mass is undefined".into(),
                    ));
                }
                let v = a.core_density() * b.core_density() * lens_volume(a.radius, b.radius, r);
                return Ok((v, Method::ClosedForm));
            }
            let v = spectral(kernel, a, b, r, |k| sinc(k * r))?;
            Ok((v / (2.0 * PI * PI), Method::SemiAnalytic))
        }
    }
}

/// `value(|sep + shift|) - value(|sep|)`.
pub fn pair_shift(
    kernel: Kernel,
    a: &RadialProfile,
    b: &RadialProfile,
    sep: Vec3,
    shift: Vec3,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let moved = sep + shift;
    let r1 = sep.norm();
    let r2 = moved.norm();
    // r2^2 - r1^2 and r2 - r1, both free of cancellation
    let rr = shift.dot(sep * 2.0 + shift);
    let dr = if r1 + r2 > 0.0 { rr / (r1 + r2) } else { 0.0 };
    if rr == 0.0 && dr == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = match kernel {
        Kernel::Newton => (&newton_profile(a), &newton_profile(b)),
        Kernel::Overlap => (a, b),
    };
    let mm = a.mass * b.mass;
    let s = a.smear.hypot(b.smear);
    let far = disjoint_distance(a, b);
    if r1.max(r2) >= far && dr.abs() > 1e-3 * r1.max(r2) {
        // one end outside the overlap range and no cancellation to fear
        let (v2, _) = pair_value(kernel, a, b, r2, consts)?;
        let (v1, _) = pair_value(kernel, a, b, r1, consts)?;
        return Ok(v2 - v1);
    }

    match kernel {
        Kernel::Newton => {
            if r1 > 0.0 && r2 > 0.0 && r1.min(r2) >= far {
                return Ok(consts.g * mm * dr / (r1 * r2));
            }
            if both_points(a, b) {
                if s == 0.0 {
                    return Err(Error::DegenerateGeometry(
                        "point masses without resolution".into(),
                    ));
                }
                let c = std::f64::consts::SQRT_2 * s;
                return Ok(-consts.g * mm * erf_over_r_diff(r1, r2, dr, rr, c));
            }
            if equal_sharp_balls(a, b) && r1.max(r2) <= 2.0 * a.radius {
                let rad = a.radius;
                let d = ball_overlap_poly_diff(r1 / rad, r2 / rad, dr / rad);
                return Ok(-consts.g * mm / rad * d);
            }
            if a.is_sharp() && b.is_sharp() && (a.is_point_core() || b.is_point_core()) {
                let ball = if a.is_point_core() { b } else { a };
                if r1.max(r2) <= ball.radius {
                    return Ok(consts.g * mm * rr / (2.0 * ball.radius.powi(3)));
                }
            }
            if a.is_sharp() && b.is_sharp() {
                let (v2, _) = pair_value(kernel, a, b, r2, consts)?;
                let (v1, _) = pair_value(kernel, a, b, r1, consts)?;
                return Ok(v2 - v1);
            }
            let v = spectral(kernel, a, b, r1.max(r2), |k| sinc_diff(k, r1, r2, dr, rr))?;
            Ok(-2.0 * consts.g / PI * v)
        }
        Kernel::Overlap => {
            if r1.min(r2) >= far && s > 0.0 {
                return Ok(0.0);
            }
            if both_points(a, b) && s > 0.0 {
                let amp = mm / (2.0 * PI * s * s).powf(1.5);
                let e1 = (-r1 * r1 / (2.0 * s * s)).exp();
                return Ok(amp * e1 * (-rr / (2.0 * s * s)).exp_m1());
            }
            if a.is_sharp() && b.is_sharp() {
                let (v2, _) = pair_value(kernel, a, b, r2, consts)?;
                let (v1, _) = pair_value(kernel, a, b, r1, consts)?;
                return Ok(v2 - v1);
            }
            let v = spectral(kernel, a, b, r1.max(r2), |k| sinc_diff(k, r1, r2, dr, rr))?;
            Ok(v / (2.0 * PI * PI))
        }
    }
}

/// `int_0^K fa(k) fb(k) w(k) radial(k) dk` where `w = 1` (Newton) or `k^2`
/// (overlap). `radial` receives `k`.
fn spectral<F: Fn(f64) -> f64>(
    kernel: Kernel,
    a: &RadialProfile,
    b: &RadialProfile,
    r_max: f64,
    radial: F,
) -> Result<f64> {
    let s = a.smear.hypot(b.smear);
    let k_max = if s > 0.0 {
        // exp(-k^2 s^2 / 2) < exp(-45)
        90f64.sqrt() / s
    } else {
        let rmin = [a.radius, b.radius]
            .into_iter()
            .filter(|r| *r > 0.0)
            .fold(f64::INFINITY, f64::min);
        if kernel == Kernel::Overlap || !rmin.is_finite() {
            return Err(Error::NumericalFailure(
                "spectral integral needs a smeared or finite-size profile".into(),
            ));
        }
        4.0e4 / rmin
    };
    let span = a.radius + b.radius + r_max;
    let mut h = k_max / 64.0;
    if span > 0.0 {
        h = h.min(PI / (2.0 * span));
    }
    let panels = (k_max / h).ceil() as usize;
    if panels > MAX_PANELS {
        return Err(Error::NumericalFailure(format!(
            "spectral integral needs {panels} panels; scale separation too large"
        )));
    }
    let h = k_max / panels as f64;
    let gl = GaussLegendre::cached(SPECTRAL_ORDER);
    let mut acc = NeumaierSum::default();
    for i in 0..panels {
        let lo = i as f64 * h;
        let v = gl.integrate(lo, lo + h, |k| {
            let w = if kernel == Kernel::Overlap {
                k * k
            } else {
                1.0
            };
            a.fourier(k) * b.fourier(k) * w * radial(k)
        });
        acc.add(v);
    }
    Ok(acc.sum())
}

pub fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    }
}

/// `1 - sin(y)/y` without cancellation.
pub fn one_minus_sinc(y: f64) -> f64 {
    let y2 = y * y;
    if y.abs() < 0.2 {
        y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0 * (1.0 - y2 / 72.0 * (1.0 - y2 / 110.0))))
    } else {
        1.0 - y.sin() / y
    }
}

/// `sinc(k r2) - sinc(k r1)` given `dr = r2 - r1` and `rr = r2^2 - r1^2`.
fn sinc_diff(k: f64, r1: f64, r2: f64, dr: f64, rr: f64) -> f64 {
    let y1 = k * r1;
    let y2 = k * r2;
    if y1.max(y2) < 0.2 {
        // sinc(y) = sum c_n Y^n with Y = y^2
        const C: [f64; 6] = [
            -1.0 / 6.0,
            1.0 / 120.0,
            -1.0 / 5040.0,
            1.0 / 362880.0,
            -1.0 / 39916800.0,
            1.0 / 6227020800.0,
        ];
        let (big1, big2) = (y1 * y1, y2 * y2);
        let dy = k * k * rr;
        return dy * homogeneous_series(&C, big1, big2);
    }
    if r1 == 0.0 {
        return -one_minus_sinc(y2);
    }
    if r2 == 0.0 {
        return one_minus_sinc(y1);
    }
    let dy = k * dr;
    2.0 * (0.5 * (y1 + y2)).cos() * (0.5 * dy).sin() / y2 - y1.sin() * dy / (y1 * y2)
}

/// `sum_n c_n (Y2^(n+1) - Y1^(n+1)) / (Y2 - Y1)` evaluated through the
/// complete homogeneous polynomials in (Y1, Y2).
fn homogeneous_series(coeffs: &[f64], y1: f64, y2: f64) -> f64 {
    let mut h = 1.0; // h_0
    let mut y1_pow = 1.0;
    let mut acc = 0.0;
    for (n, c) in coeffs.iter().enumerate() {
        if n > 0 {
            y1_pow *= y1;
            h = y2 * h + y1_pow;
        }
        acc += c * h;
    }
    acc
}

/// `erf(r2/c)/r2 - erf(r1/c)/r1`.
fn erf_over_r_diff(r1: f64, r2: f64, dr: f64, rr: f64, c: f64) -> f64 {
    let x1 = r1 / c;
    let x2 = r2 / c;
    if x1.max(x2) < 0.2 {
        // erf(x)/x = 2/sqrt(pi) sum (-1)^n x^{2n} / (n! (2n+1))
        const C: [f64; 7] = [
            -1.0 / 3.0,
            1.0 / 10.0,
            -1.0 / 42.0,
            1.0 / 216.0,
            -1.0 / 1320.0,
            1.0 / 9360.0,
            -1.0 / 75600.0,
        ];
        let dy = rr / (c * c);
        return 2.0 / (c * PI.sqrt()) * dy * homogeneous_series(&C, x1 * x1, x2 * x2);
    }
    if r1 == 0.0 || r2 == 0.0 {
        return erf_over_r(r2, c) - erf_over_r(r1, c);
    }
    let dx = dr / c;
    let derf = if dx.abs() < 1e-3 * x1.max(x2) {
        let xm = 0.5 * (x1 + x2);
        2.0 / PI.sqrt() * dx / 6.0 * ((-x1 * x1).exp() + 4.0 * (-xm * xm).exp() + (-x2 * x2).exp())
    } else if x1.min(x2) > 3.0 {
        libm::erfc(x1) - libm::erfc(x2)
    } else {
        libm::erf(x2) - libm::erf(x1)
    };
    derf / r2 - libm::erf(x1) * dr / (r1 * r2)
}

/// Squared Newton catness of a profile and its copy displaced by `d`:
/// `2 (U(d) - U(0))`.
pub fn self_shift_catness(a: &RadialProfile, d: Vec3, consts: &PhysicalConstants) -> Result<f64> {
    Ok(2.0 * pair_shift(Kernel::Newton, a, a, Vec3::ZERO, d, consts)?)
}
