//! Brute-force reference energies for analytic densities.
//!
//! `ProductGauss` integrates the outer density in spherical coordinates
//! around its own center and, at each outer point, the potential of the
//! inner density in spherical coordinates around that point. The polar and
//! azimuthal integrals of the inner part are done exactly, which leaves
//! `phi(p) = (4 pi / p) int rho(q) q min(p, q) dq`. Every integral is split
//! at the kinks of its integrand and evaluated by Gauss-Legendre panels at
//! three orders to test convergence.
//!
//! `MonteCarloImportance` draws both points from the normalized densities
//! and averages `1 / |r - s|`.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{EnergyResult, Method};
use crate::constants::PhysicalConstants;
use crate::densities::MassDensity;
use crate::error::{Error, Result};
use crate::profile::RadialProfile;
use crate::quad::{GaussLegendre, NeumaierSum};
use crate::rng::{mean_and_stderr, stream};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureScheme {
    ProductGauss,
    MonteCarloImportance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub scheme: QuadratureScheme,
    /// Gauss points per panel (product rule) or samples (Monte Carlo).
    pub points: usize,
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn product_gauss(points: usize) -> Result<Self> {
        Self::new(QuadratureScheme::ProductGauss, points, 0)
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Result<Self> {
        Self::new(QuadratureScheme::MonteCarloImportance, samples, seed)
    }

    pub fn new(scheme: QuadratureScheme, points: usize, seed: u64) -> Result<Self> {
        if points < 8 {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least 8 points, got {points}"
            )));
        }
        Ok(QuadratureSpec {
            scheme,
            points,
            seed,
        })
    }
}

/// Reference energy of two analytic densities.
pub fn interaction_energy_quadrature(
    f: &MassDensity,
    g: &MassDensity,
    spec: &QuadratureSpec,
    consts: &PhysicalConstants,
) -> Result<EnergyResult> {
    if spec.points < 8 {
        return Err(Error::InvalidParameter(
            "quadrature needs at least 8 points".into(),
        ));
    }
    f.validate()?;
    g.validate()?;
    let (a, b) = match (f.components(), g.components()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Unsupported(
                "the quadrature oracle takes analytic densities only".into(),
            ))
        }
    };
    let (value, err) = match spec.scheme {
        QuadratureScheme::ProductGauss => {
            let mut acc = NeumaierSum::default();
            let mut err = 0.0;
            for (pa, ca) in &a {
                for (pb, cb) in &b {
                    let (v, e) = product_gauss_pair(pa, pb, (*ca - *cb).norm(), spec.points)?;
                    acc.add(v);
                    err += e;
                }
            }
            (acc.sum(), err)
        }
        QuadratureScheme::MonteCarloImportance => monte_carlo(&a, &b, spec)?,
    };
    Ok(EnergyResult {
        value: -consts.g * value,
        method: Method::QuadratureOracle,
        error_estimate: consts.g * err,
    })
}

/// `int int a b / |r - s|` by product Gauss at orders n/2, n, 2n.
fn product_gauss_pair(
    a: &RadialProfile,
    b: &RadialProfile,
    d: f64,
    n: usize,
) -> Result<(f64, f64)> {
    let (a, b) = if b.is_point_core() && b.is_sharp() {
        (b, a)
    } else {
        (a, b)
    };
    if b.is_point_core() && b.is_sharp() {
        if d == 0.0 {
            return Err(Error::DegenerateGeometry("coincident point masses".into()));
        }
        return Ok((a.mass * b.mass / d, 0.0));
    }
    let coarse = pair_at_order(a, b, d, n / 2);
    let mid = pair_at_order(a, b, d, n);
    let fine = pair_at_order(a, b, d, 2 * n);
    let e1 = (mid - coarse).abs();
    let e2 = (fine - mid).abs();
    let floor = 1e-13 * fine.abs();
    // a lucky coarse pair can make e1 tiny; only a large, growing gap fails
    if e2 > e1 && e2 > 1e-8 * fine.abs() {
        return Err(Error::NumericalFailure(format!(
            "product Gauss not converging: successive differences {e1:e}, {e2:e}"
        )));
    }
    Ok((fine, e2.max(floor)))
}

fn pair_at_order(a: &RadialProfile, b: &RadialProfile, d: f64, n: usize) -> f64 {
    let gl = GaussLegendre::cached(n);
    if a.is_point_core() && a.is_sharp() {
        return a.mass * potential(b, d, &gl);
    }
    let mut rho_breaks = a.radial_breaks();
    push_extent(&mut rho_breaks, a);
    let b_breaks = kinks(b);
    gl.integrate_panels(&rho_breaks, |rho| {
        let dens = a.density(rho);
        if dens == 0.0 || rho == 0.0 {
            return 0.0;
        }
        let inner = if d == 0.0 {
            2.0 * potential(b, rho, &gl)
        } else {
            // split the polar integral where p(mu) crosses a kink of b
            let mut mus = vec![-1.0, 1.0];
            for &q in &b_breaks {
                let mu = (rho * rho + d * d - q * q) / (2.0 * rho * d);
                if mu > -1.0 && mu < 1.0 {
                    mus.push(mu);
                }
            }
            mus.sort_by(|x, y| x.partial_cmp(y).unwrap());
            gl.integrate_panels(&mus, |mu| {
                let p2 = rho * rho + d * d - 2.0 * rho * d * mu;
                potential(b, p2.max(0.0).sqrt(), &gl)
            })
        };
        2.0 * PI * dens * rho * rho * inner
    })
}

fn push_extent(breaks: &mut Vec<f64>, p: &RadialProfile) {
    let e = if p.is_sharp() { p.radius } else { p.extent() };
    if e > *breaks.last().unwrap() {
        breaks.push(e);
    }
}

fn kinks(b: &RadialProfile) -> Vec<f64> {
    let mut v = b.radial_breaks();
    push_extent(&mut v, b);
    v.retain(|x| *x > 0.0);
    v
}

/// `int b(s) / |s - x| ds` at distance `p` from the center of `b`.
fn potential(b: &RadialProfile, p: f64, gl: &GaussLegendre) -> f64 {
    let mut qs = b.radial_breaks();
    push_extent(&mut qs, b);
    let top = *qs.last().unwrap();
    if p > 0.0 && p < top && !qs.contains(&p) {
        qs.push(p);
        qs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    }
    if p == 0.0 {
        return 4.0 * PI * gl.integrate_panels(&qs, |q| b.density(q) * q);
    }
    4.0 * PI / p * gl.integrate_panels(&qs, |q| b.density(q) * q * q.min(p))
}

fn monte_carlo(
    a: &[(RadialProfile, Vec3)],
    b: &[(RadialProfile, Vec3)],
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let ma: f64 = a.iter().map(|c| c.0.mass).sum();
    let mb: f64 = b.iter().map(|c| c.0.mass).sum();
    let pick = |set: &[(RadialProfile, Vec3)], total: f64, u: f64| -> usize {
        let mut acc = 0.0;
        for (i, c) in set.iter().enumerate() {
            acc += c.0.mass / total;
            if u < acc {
                return i;
            }
        }
        set.len() - 1
    };
    let values: Vec<f64> = (0..spec.points as u64)
        .into_par_iter()
        .map(|i| {
            use rand::Rng;
            let mut rng = stream(spec.seed, i);
            let ia = pick(a, ma, rng.random());
            let ib = pick(b, mb, rng.random());
            let r = a[ia].1 + a[ia].0.sample(&mut rng);
            let s = b[ib].1 + b[ib].0.sample(&mut rng);
            1.0 / (r - s).norm()
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "Monte Carlo hit a singular sample".into(),
        ));
    }
    let (mean, se) = mean_and_stderr(&values);
    Ok((ma * mb * mean, ma * mb * se))
}
