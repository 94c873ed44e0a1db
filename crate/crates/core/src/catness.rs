//! Squared catness distances and collapse lifetimes.

use std::fmt;

use crate::constants::PhysicalConstants;
use crate::densities::{
    coarse_grain, rasterize, sampling_geometry, smooth_grid, Grid, KernelProfile, MassDensity,
    Resolution,
};
use crate::error::{Error, Result};
use crate::newton::grid::{grid_catness, grid_overlap_distance, GridOptions};
use crate::newton::{common_grids, interaction_energy, pair_shift, pair_value, Kernel, Method};
use crate::profile::RadialProfile;
use crate::quad::NeumaierSum;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    DP,
    CSL,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::DP => "dp",
            Model::CSL => "csl",
        })
    }
}

/// A squared catness `l^2` in joules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatnessValue {
    pub value: f64,
    pub model: Model,
    pub resolution: Resolution,
    pub method: Method,
    pub error_estimate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CSLParams {
    /// 1/s.
    pub lambda: f64,
    /// m.
    pub sigma: f64,
    /// kg.
    pub m0: f64,
}

impl Default for CSLParams {
    fn default() -> Self {
        CSLParams {
            lambda: 1e-17,
            sigma: 1e-7,
            m0: PhysicalConstants::default().m0,
        }
    }
}

impl CSLParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("m0", self.m0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "CSL {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `hbar lambda sigma^3 / m0^2`.
    pub fn prefactor(&self, consts: &PhysicalConstants) -> f64 {
        consts.hbar * self.lambda * self.sigma.powi(3) / (self.m0 * self.m0)
    }
}

/// Prefactor `kappa` in `rate = kappa l^2 / hbar`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConvention {
    kappa: f64,
}

impl RateConvention {
    pub const ONE: RateConvention = RateConvention { kappa: 1.0 };
    pub const HALF: RateConvention = RateConvention { kappa: 0.5 };

    pub fn new(kappa: f64) -> Result<Self> {
        if kappa == 1.0 || kappa == 0.5 {
            Ok(RateConvention { kappa })
        } else {
            Err(Error::InvalidParameter(format!(
                "kappa must be 1 or 1/2, got {kappa}"
            )))
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl Default for RateConvention {
    fn default() -> Self {
        RateConvention::HALF
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lifetime {
    Finite(f64),
    Infinite,
}

impl Lifetime {
    pub fn seconds(&self) -> f64 {
        match self {
            Lifetime::Finite(t) => *t,
            Lifetime::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Lifetime::Infinite)
    }
}

impl fmt::Display for Lifetime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lifetime::Finite(t) => write!(f, "{t:.16e}"),
            Lifetime::Infinite => f.write_str("inf"),
        }
    }
}

/// `tau = hbar / (kappa l^2)`.
pub fn lifetime(l2: &CatnessValue, conv: RateConvention, consts: &PhysicalConstants) -> Lifetime {
    if l2.value <= 0.0 {
        Lifetime::Infinite
    } else {
        Lifetime::Finite(consts.hbar / (conv.kappa() * l2.value))
    }
}

/// `kappa l^2 / hbar`, 1/s.
pub fn collapse_rate(l2: &CatnessValue, conv: RateConvention, consts: &PhysicalConstants) -> f64 {
    conv.kappa() * l2.value / consts.hbar
}

type Parts = Vec<(RadialProfile, Vec3)>;

/// Analytic constituents of both densities when they pair up one to one
/// with equal profiles.
fn paired_parts(f: &MassDensity, g: &MassDensity) -> Option<(Parts, Parts)> {
    let a = f.components()?;
    let b = g.components()?;
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
        return None;
    }
    Some((a, b))
}

/// `sum_ij 2 K(a_i - b_j) - K(a_i - a_j) - K(b_i - b_j)`, written as pair
/// shifts so that nearby configurations do not cancel. With the Newton
/// kernel this is the DP catness; with the overlap kernel it is
/// `-int (f - g)^2`.
pub(crate) fn paired_shift_sum(
    kernel: Kernel,
    profiles: &[RadialProfile],
    a: &[Vec3],
    b: &[Vec3],
    consts: &PhysicalConstants,
) -> Result<(f64, f64)> {
    let n = a.len();
    let mut diag = NeumaierSum::default();
    let mut off = NeumaierSum::default();
    let mut abs = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (pi, pj) = (&profiles[i], &profiles[j]);
            let t1 = pair_shift(kernel, pi, pj, a[i] - a[j], a[j] - b[j], consts)?;
            let t2 = pair_shift(kernel, pi, pj, b[i] - b[j], a[i] - b[i], consts)?;
            abs += t1.abs() + t2.abs();
            if i == j {
                diag.add(t1);
                diag.add(t2);
            } else {
                off.add(t1);
                off.add(t2);
            }
        }
    }
    Ok((diag.sum() + off.sum(), abs))
}

fn has_spectral_pairs(profiles: &[RadialProfile]) -> bool {
    profiles.iter().any(|p| p.radius > 0.0 && p.smear > 0.0)
        || profiles.windows(2).any(|w| w[0].radius != w[1].radius)
}

/// Squared DP catness of two analytic densities that are already smeared.
fn analytic_dp(
    f: &MassDensity,
    g: &MassDensity,
    consts: &PhysicalConstants,
) -> Result<(f64, f64, Method)> {
    if let Some((a, b)) = paired_parts(f, g) {
        let profiles: Vec<RadialProfile> = a.iter().map(|x| x.0).collect();
        let pa: Vec<Vec3> = a.iter().map(|x| x.1).collect();
        let pb: Vec<Vec3> = b.iter().map(|x| x.1).collect();
        let (s, abs) = paired_shift_sum(Kernel::Newton, &profiles, &pa, &pb, consts)?;
        let method = if has_spectral_pairs(&profiles) {
            Method::SemiAnalytic
        } else {
            Method::ClosedForm
        };
        let err = abs
            * if method == Method::ClosedForm {
                8.0 * f64::EPSILON
            } else {
                1e-9
            };
        return Ok((s.max(0.0), err, method));
    }
    let fg = interaction_energy(f, g, consts)?;
    let ff = interaction_energy(f, f, consts)?;
    let gg = interaction_energy(g, g, consts)?;
    let v = 2.0 * fg.value - ff.value - gg.value;
    let err = 2.0 * fg.error_estimate + ff.error_estimate + gg.error_estimate;
    Ok((
        v.max(0.0),
        err,
        fg.method.combine(ff.method).combine(gg.method),
    ))
}

/// Both densities smeared by `res` on one grid.
fn smoothed_common_grids(
    f: &MassDensity,
    g: &MassDensity,
    res: &Resolution,
) -> Result<(Grid, Grid)> {
    let (a, b) = if f.is_grid() || g.is_grid() {
        common_grids(f, g)?
    } else {
        let geom = sampling_geometry(&[f, g], res.sigma)?;
        (
            rasterize(f, geom.origin, geom.voxel_edge, geom.dims)?.grid,
            rasterize(g, geom.origin, geom.voxel_edge, geom.dims)?.grid,
        )
    };
    Ok((smooth_grid(&a, res)?, smooth_grid(&b, res)?))
}

/// DP catness `2U(f~, g~) - U(f~, f~) - U(g~, g~)` of the densities
/// coarse-grained at `res`.
pub fn catness_g(
    f: &MassDensity,
    g: &MassDensity,
    res: &Resolution,
    consts: &PhysicalConstants,
) -> Result<CatnessValue> {
    f.validate()?;
    g.validate()?;
    consts.validate()?;
    let done = |value: f64, error_estimate: f64, method: Method| CatnessValue {
        value,
        model: Model::DP,
        resolution: *res,
        method,
        error_estimate,
    };
    if f == g {
        return Ok(done(0.0, 0.0, Method::ClosedForm));
    }
    let analytic = !f.is_grid() && !g.is_grid();
    if analytic {
        let (fs, gs) = (coarse_grain(f, res)?, coarse_grain(g, res)?);
        if !fs.is_grid() && !gs.is_grid() {
            let (v, e, m) = analytic_dp(&fs, &gs, consts)?;
            return Ok(done(v, e, m));
        }
    }
    let (a, b) = smoothed_common_grids(f, g, res)?;
    let (v, e) = grid_catness(&a, &b, consts, &GridOptions::default())?;
    Ok(done(v, e, Method::GridFFT))
}

/// CSL catness `(hbar lambda sigma^3 / m0^2) int (f~ - g~)^2` with Gaussian
/// smearing at the CSL length.
pub fn catness_csl(
    f: &MassDensity,
    g: &MassDensity,
    p: &CSLParams,
    consts: &PhysicalConstants,
) -> Result<CatnessValue> {
    f.validate()?;
    g.validate()?;
    p.validate()?;
    let res = Resolution::new(p.sigma, KernelProfile::Gaussian)?;
    let pre = p.prefactor(consts);
    let done = |value: f64, error_estimate: f64, method: Method| CatnessValue {
        value,
        model: Model::CSL,
        resolution: res,
        method,
        error_estimate,
    };
    if f == g {
        return Ok(done(0.0, 0.0, Method::ClosedForm));
    }
    if !f.is_grid() && !g.is_grid() {
        let fs = coarse_grain(f, &res)?;
        let gs = coarse_grain(g, &res)?;
        let (v, err, method) = analytic_overlap_distance(&fs, &gs)?;
        return Ok(done(pre * v, pre * err, method));
    }
    let (a, b) = smoothed_common_grids(f, g, &res)?;
    let v = grid_overlap_distance(&a, &b)?;
    Ok(done(pre * v, 0.0, Method::GridFFT))
}

/// `int (f - g)^2` for smeared analytic densities.
fn analytic_overlap_distance(f: &MassDensity, g: &MassDensity) -> Result<(f64, f64, Method)> {
    let consts = PhysicalConstants::default();
    if let Some((a, b)) = paired_parts(f, g) {
        let profiles: Vec<RadialProfile> = a.iter().map(|x| x.0).collect();
        let pa: Vec<Vec3> = a.iter().map(|x| x.1).collect();
        let pb: Vec<Vec3> = b.iter().map(|x| x.1).collect();
        let (s, abs) = paired_shift_sum(Kernel::Overlap, &profiles, &pa, &pb, &consts)?;
        let method = if has_spectral_pairs(&profiles) {
            Method::SemiAnalytic
        } else {
            Method::ClosedForm
        };
        return Ok(((-s).max(0.0), 1e-9 * abs, method));
    }
    let (a, b) = (f.components().unwrap(), g.components().unwrap());
    let overlap = |x: &Parts, y: &Parts| -> Result<(f64, Method)> {
        let mut acc = NeumaierSum::default();
        let mut m = Method::ClosedForm;
        for (p, c) in x {
            for (q, d) in y {
                let (v, mm) = pair_value(Kernel::Overlap, p, q, (*c - *d).norm(), &consts)?;
                acc.add(v);
                m = m.combine(mm);
            }
        }
        Ok((acc.sum(), m))
    };
    let (ff, m1) = overlap(&a, &a)?;
    let (gg, m2) = overlap(&b, &b)?;
    let (fg, m3) = overlap(&a, &b)?;
    let v = ff + gg - 2.0 * fg;
    Ok((v.max(0.0), 1e-9 * (ff + gg), m1.combine(m2).combine(m3)))
}
