//! Collapse rates of granular bodies with fluctuating nuclear positions.
//!
//! The c.o.m.-marginal rate averages the catness of a sampled configuration
//! and its rigidly shifted copy over the sampled internal coordinates. The
//! nuclei are taken as already resolved at their own size, so no further
//! coarse-graining is applied here.

use rayon::prelude::*;

use crate::catness::{catness_g, paired_shift_sum, CatnessValue, Model, RateConvention};
use crate::constants::PhysicalConstants;
use crate::densities::{
    coarse_grain, GranularLattice, KernelProfile, MassDensity, NucleusProfile, Resolution,
};
use crate::error::{Error, Result};
use crate::newton::{pair_shift, Kernel, Method};
use crate::profile::{gaussian_vector, RadialProfile};
use crate::quad::NeumaierSum;
use crate::rng::{mean_and_stderr, stream};
use crate::vec3::Vec3;

/// Nuclear positions as a c.o.m. plus `N - 1` relative coordinates; the
/// last nucleus sits at `-sum(q)` relative to the c.o.m.
#[derive(Clone, Debug, PartialEq)]
pub struct NuclearConfiguration {
    pub com: Vec3,
    pub relative: Vec<Vec3>,
    pub nucleus_mass: f64,
    pub profile: NucleusProfile,
}

impl NuclearConfiguration {
    /// Split absolute positions of equal-mass nuclei into c.o.m. and
    /// relative coordinates.
    pub fn from_positions(
        positions: &[Vec3],
        nucleus_mass: f64,
        profile: NucleusProfile,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::DegenerateGeometry(
                "configuration has no nuclei".into(),
            ));
        }
        let com = mean(positions);
        let relative = positions[..positions.len() - 1]
            .iter()
            .map(|p| *p - com)
            .collect();
        let c = NuclearConfiguration {
            com,
            relative,
            nucleus_mass,
            profile,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_lattice(l: &GranularLattice) -> Result<Self> {
        let p: Vec<Vec3> = l.positions().collect();
        Self::from_positions(&p, l.nucleus_mass, l.profile)
    }

    pub fn len(&self) -> usize {
        self.relative.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn positions(&self) -> Vec<Vec3> {
        let mut last = Vec3::ZERO;
        let mut out = Vec::with_capacity(self.len());
        for q in &self.relative {
            last -= *q;
            out.push(self.com + *q);
        }
        out.push(self.com + last);
        out
    }

    pub fn translated(&self, d: Vec3) -> Self {
        NuclearConfiguration {
            com: self.com + d,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nucleus_mass > 0.0 && self.nucleus_mass.is_finite()) {
            return Err(Error::InvalidParameter("nucleus mass must be > 0".into()));
        }
        if !self.com.is_finite() || !self.relative.iter().all(|q| q.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite nuclear coordinates".into(),
            ));
        }
        self.to_density().validate()
    }

    fn to_density(&self) -> MassDensity {
        MassDensity::GranularLattice(GranularLattice {
            sites: self.positions(),
            nucleus_mass: self.nucleus_mass,
            profile: self.profile,
            com_offset: Vec3::ZERO,
        })
    }
}

fn mean(v: &[Vec3]) -> Vec3 {
    let mut s = Vec3::ZERO;
    for p in v {
        s += *p;
    }
    s * (1.0 / v.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpreadKind {
    None,
    IsotropicGaussian,
}

/// Distribution of each nucleus around its lattice site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpreadModel {
    pub kind: SpreadKind,
    /// Per-axis standard deviation, m.
    pub width: f64,
}

impl SpreadModel {
    pub const NONE: SpreadModel = SpreadModel {
        kind: SpreadKind::None,
        width: 0.0,
    };

    pub fn gaussian(width: f64) -> Result<Self> {
        let s = SpreadModel {
            kind: SpreadKind::IsotropicGaussian,
            width,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width >= 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spread width must be >= 0, got {}",
                self.width
            )));
        }
        Ok(())
    }

    fn effective_width(&self) -> f64 {
        match self.kind {
            SpreadKind::None => 0.0,
            SpreadKind::IsotropicGaussian => self.width,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    /// 1/s.
    pub mean: f64,
    /// 1/s.
    pub standard_error: f64,
    pub samples: usize,
    pub seed: u64,
    /// Samples in which two nuclei came closer than twice their size.
    pub overlapping: usize,
    pub kappa: f64,
}

/// A rate computed by a deliberately wrong procedure, kept for contrast.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledRate {
    pub rate: f64,
    pub label: &'static str,
}

/// DP catness of two configurations of the same nuclei, coarse-grained at
/// `res`.
pub fn full_configuration_catness(
    c: &NuclearConfiguration,
    c2: &NuclearConfiguration,
    res: &Resolution,
    consts: &PhysicalConstants,
) -> Result<CatnessValue> {
    c.validate()?;
    c2.validate()?;
    if c.len() != c2.len() {
        return Err(Error::Mismatch(format!(
            "{} vs {} nuclei",
            c.len(),
            c2.len()
        )));
    }
    if c.nucleus_mass != c2.nucleus_mass || c.profile != c2.profile {
        return Err(Error::Mismatch("nucleus mass or profile differ".into()));
    }
    let smeared = smeared_profile(c.profile.radial(c.nucleus_mass), res);
    let Some(profile) = smeared else {
        return catness_g(&c.to_density(), &c2.to_density(), res, consts);
    };
    let (value, err, method) = if c.relative == c2.relative {
        rigid_catness(&profile, &c.positions(), c2.com - c.com, consts)?
    } else {
        configuration_catness(&profile, &c.positions(), &c2.positions(), consts)?
    };
    Ok(CatnessValue {
        value,
        model: Model::DP,
        resolution: *res,
        method,
        error_estimate: err,
    })
}

/// The nucleus profile after coarse-graining, when it stays analytic.
fn smeared_profile(p: RadialProfile, res: &Resolution) -> Option<RadialProfile> {
    let probe = MassDensity::GaussianBlob {
        mass: p.mass,
        width: p.smear,
        center: Vec3::ZERO,
    };
    match res.profile {
        KernelProfile::Gaussian => Some(p.smeared(res.sigma)),
        KernelProfile::UniformBall if p.radius == 0.0 && p.smear == 0.0 => {
            coarse_grain(&probe, res).ok()?.as_radial().map(|x| x.0)
        }
        KernelProfile::UniformBall => None,
    }
}

fn accuracy(profile: &RadialProfile) -> (f64, Method) {
    if profile.is_sharp() || profile.is_point_core() {
        (8.0 * f64::EPSILON, Method::ClosedForm)
    } else {
        (1e-9, Method::SemiAnalytic)
    }
}

fn configuration_catness(
    profile: &RadialProfile,
    a: &[Vec3],
    b: &[Vec3],
    consts: &PhysicalConstants,
) -> Result<(f64, f64, Method)> {
    let profiles = vec![*profile; a.len()];
    let (s, abs) = paired_shift_sum(Kernel::Newton, &profiles, a, b, consts)?;
    let (rel, method) = accuracy(profile);
    Ok((s.max(0.0), rel * abs, method))
}

/// Catness of `p` against `p + dx`: `sum_ij 2 [U(p_i - p_j - dx) - U(p_i - p_j)]`.
///
/// The shift enters exactly; forming `(p + dx) - p` would round `dx` at the
/// level of `ulp(p) / dx`, which can exceed the inter-nuclear terms.
fn rigid_catness(
    profile: &RadialProfile,
    p: &[Vec3],
    dx: Vec3,
    consts: &PhysicalConstants,
) -> Result<(f64, f64, Method)> {
    let n = p.len();
    let own = 2.0 * pair_shift(Kernel::Newton, profile, profile, Vec3::ZERO, -dx, consts)?;
    let mut off = NeumaierSum::default();
    let mut abs = n as f64 * own.abs();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let t =
                    2.0 * pair_shift(Kernel::Newton, profile, profile, p[i] - p[j], -dx, consts)?;
                off.add(t);
                abs += t.abs();
            }
        }
    }
    let (rel, method) = accuracy(profile);
    Ok(((n as f64 * own + off.sum()).max(0.0), rel * abs, method))
}

fn min_site_spacing(p: &[Vec3]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            m = m.min((p[i] - p[j]).norm());
        }
    }
    m
}

fn check_shift(sites: &[Vec3], dx: Vec3) -> Result<()> {
    if !dx.is_finite() {
        return Err(Error::InvalidParameter("non-finite displacement".into()));
    }
    let a = min_site_spacing(sites);
    if dx.norm() >= 0.5 * a {
        return Err(Error::InvalidParameter(format!(
            "|dx| = {:e} m must be below half the site spacing {a:e} m",
            dx.norm()
        )));
    }
    Ok(())
}

fn has_overlap(p: &[Vec3], size: f64) -> bool {
    let lim = 2.0 * size;
    (0..p.len()).any(|i| (i + 1..p.len()).any(|j| (p[i] - p[j]).norm() < lim))
}

/// Monte-Carlo c.o.m.-marginal rate without the overlap abort.
fn marginal_samples(
    lattice: &GranularLattice,
    spread: SpreadModel,
    dx: Vec3,
    conv: RateConvention,
    samples: usize,
    seed: u64,
    consts: &PhysicalConstants,
) -> Result<RateEstimate> {
    MassDensity::GranularLattice(lattice.clone()).validate()?;
    spread.validate()?;
    consts.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let sites = NuclearConfiguration::from_lattice(lattice)?.positions();
    check_shift(&sites, dx)?;
    let profile = lattice.nucleus();
    let size = lattice.profile.size();
    let scale = conv.kappa() / consts.hbar;
    let width = spread.effective_width();
    let estimate = |mean, standard_error, overlapping| RateEstimate {
        mean,
        standard_error,
        samples,
        seed,
        overlapping,
        kappa: conv.kappa(),
    };
    if width == 0.0 {
        let (l2, _, _) = rigid_catness(&profile, &sites, dx, consts)?;
        return Ok(estimate(scale * l2, 0.0, 0));
    }
    let draws: Vec<Result<(f64, bool)>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let jitter: Vec<Vec3> = sites
                .iter()
                .map(|_| gaussian_vector(&mut rng, width))
                .collect();
            // the c.o.m. stays put: remove the mean jitter
            let shift = mean(&jitter);
            let p: Vec<Vec3> = sites
                .iter()
                .zip(&jitter)
                .map(|(s, j)| *s + *j - shift)
                .collect();
            let (l2, _, _) = rigid_catness(&profile, &p, dx, consts)?;
            Ok((scale * l2, has_overlap(&p, size)))
        })
        .collect();
    let mut rates = Vec::with_capacity(samples);
    let mut overlapping = 0;
    for d in draws {
        let (r, o) = d?;
        rates.push(r);
        overlapping += o as usize;
    }
    let (m, se) = mean_and_stderr(&rates);
    Ok(estimate(m, se, overlapping))
}

fn overlap_exceeded(e: &RateEstimate) -> bool {
    100 * e.overlapping > e.samples
}

/// c.o.m.-marginal collapse rate of a lattice whose nuclei fluctuate
/// independently around their sites, for a rigid c.o.m. shift `dx`.
///
/// Both branches share the same sampled internal coordinates.
pub fn com_marginal_rate(
    lattice: &GranularLattice,
    spread: SpreadModel,
    dx: Vec3,
    conv: RateConvention,
    samples: usize,
    seed: u64,
    consts: &PhysicalConstants,
) -> Result<RateEstimate> {
    let e = marginal_samples(lattice, spread, dx, conv, samples, seed, consts)?;
    if overlap_exceeded(&e) {
        return Err(Error::OverlapAbort {
            overlapping: e.overlapping,
            samples: e.samples,
        });
    }
    Ok(e)
}

/// Smears every nucleus by the spread width first and then takes the rate
/// of the rigidly shifted smeared lattice. Wrong by design.
pub fn blur_first_rate(
    lattice: &GranularLattice,
    spread: SpreadModel,
    dx: Vec3,
    conv: RateConvention,
    consts: &PhysicalConstants,
) -> Result<LabeledRate> {
    spread.validate()?;
    let blurred = lattice.nucleus().smeared(spread.effective_width());
    let sites = NuclearConfiguration::from_lattice(lattice)?.positions();
    check_shift(&sites, dx)?;
    let (l2, _, _) = rigid_catness(&blurred, &sites, dx, consts)?;
    Ok(LabeledRate {
        rate: conv.kappa() * l2 / consts.hbar,
        label: "naive",
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub width: f64,
    pub correct_rate: f64,
    pub correct_stderr: f64,
    pub naive_rate: f64,
    /// False when more than 1% of samples had overlapping nuclei.
    pub valid: bool,
}

pub const SWEEP_HEADER: [&str; 5] = [
    "width_m",
    "correct_rate_hz",
    "correct_stderr_hz",
    "naive_rate_hz",
    "valid",
];

impl SweepRow {
    pub fn record(&self) -> [String; 5] {
        [
            format!("{:.16e}", self.width),
            format!("{:.16e}", self.correct_rate),
            format!("{:.16e}", self.correct_stderr),
            format!("{:.16e}", self.naive_rate),
            self.valid.to_string(),
        ]
    }
}

/// Correct and blur-first rates for each spread width.
#[allow(clippy::too_many_arguments)]
pub fn helium_regime_sweep(
    lattice: &GranularLattice,
    widths: &[f64],
    dx: Vec3,
    conv: RateConvention,
    samples: usize,
    seed: u64,
    consts: &PhysicalConstants,
) -> Result<Vec<SweepRow>> {
    if widths.is_empty() {
        return Err(Error::InvalidParameter("no spread widths given".into()));
    }
    if widths.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "spread widths must be sorted ascending".into(),
        ));
    }
    widths
        .iter()
        .map(|&w| {
            let spread = if w == 0.0 {
                SpreadModel::NONE
            } else {
                SpreadModel::gaussian(w)?
            };
            let e = marginal_samples(lattice, spread, dx, conv, samples, seed, consts)?;
            let naive = blur_first_rate(lattice, spread, dx, conv, consts)?;
            Ok(SweepRow {
                width: w,
                correct_rate: e.mean,
                correct_stderr: e.standard_error,
                naive_rate: naive.rate,
                valid: !overlap_exceeded(&e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::granular_from_lattice;
    use crate::newton::pair::self_shift_catness;
    use approx::assert_relative_eq;

    const A: f64 = 1e-10;
    const SIG: f64 = 1e-14;

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn lattice(profile: NucleusProfile) -> GranularLattice {
        match granular_from_lattice(A, [2, 2, 2], 1e-26, profile).unwrap() {
            MassDensity::GranularLattice(l) => l,
            _ => unreachable!(),
        }
    }

    fn balls() -> GranularLattice {
        lattice(NucleusProfile::UniformBall { radius: SIG })
    }

    #[test]
    fn configuration_roundtrip() {
        let l = balls();
        let cfg = NuclearConfiguration::from_lattice(&l).unwrap();
        assert_eq!(cfg.relative.len(), 7);
        for (p, q) in cfg.positions().iter().zip(l.positions()) {
            assert!((*p - q).norm() < 1e-25);
        }
    }

    #[test]
    fn identical_configurations() {
        let cfg = NuclearConfiguration::from_lattice(&balls()).unwrap();
        let res = Resolution::gaussian(SIG).unwrap();
        assert_eq!(
            full_configuration_catness(&cfg, &cfg, &res, &c())
                .unwrap()
                .value,
            0.0
        );
        let short =
            NuclearConfiguration::from_positions(&[Vec3::ZERO], 1e-26, cfg.profile).unwrap();
        assert!(matches!(
            full_configuration_catness(&cfg, &short, &res, &c()),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn single_gaussian_nucleus_matches_closed_form() {
        let p = NucleusProfile::GaussianBlob { width: SIG };
        let a = NuclearConfiguration::from_positions(&[Vec3::ZERO], 1e-26, p).unwrap();
        let d = 3e-15;
        let res = Resolution::gaussian(SIG).unwrap();
        let l = full_configuration_catness(&a, &a.translated(Vec3::x(d)), &res, &c()).unwrap();
        let w = 2f64.sqrt() * SIG;
        let u = |r| crate::newton::gaussian_gaussian_energy(1e-26, 1e-26, w, w, r, &c());
        assert_relative_eq!(l.value, 2.0 * (u(d) - u(0.0)), max_relative = 1e-6);
    }

    #[test]
    fn rigid_lattice_is_separable() {
        let cfg = NuclearConfiguration::from_lattice(&balls()).unwrap();
        let dx = Vec3::x(1e-15);
        let res = Resolution::gaussian(1e-30).unwrap();
        let full = full_configuration_catness(&cfg, &cfg.translated(dx), &res, &c())
            .unwrap()
            .value;
        let single = self_shift_catness(&RadialProfile::ball(1e-26, SIG), dx, &c()).unwrap();
        assert!((full - 8.0 * single).abs() / full < 1e-3);
        assert!((full - 8.0 * single).abs() / full <= 10.0 * (SIG / A).powi(3));
    }

    #[test]
    fn no_spread_matches_full_configuration_exactly() {
        // point nuclei under a ball kernel of the nuclear size
        let points = lattice(NucleusProfile::GaussianBlob { width: 0.0 });
        let res = Resolution::uniform_ball(SIG).unwrap();
        let cfg = NuclearConfiguration::from_lattice(&points).unwrap();
        let dx = Vec3::new(1e-15, 2e-16, 0.0);
        let l = full_configuration_catness(&cfg, &cfg.translated(dx), &res, &c()).unwrap();
        let e = com_marginal_rate(
            &balls(),
            SpreadModel::NONE,
            dx,
            RateConvention::HALF,
            10,
            1,
            &c(),
        )
        .unwrap();
        assert_eq!(e.standard_error, 0.0);
        assert_eq!(e.mean, 0.5 * l.value / c().hbar);
        let b = blur_first_rate(
            &balls(),
            SpreadModel::gaussian(0.0).unwrap(),
            dx,
            RateConvention::HALF,
            &c(),
        )
        .unwrap();
        assert_eq!(b.rate, e.mean);
        assert_eq!(b.label, "naive");
    }

    #[test]
    fn spread_does_not_change_the_rate() {
        let l = balls();
        let dx = Vec3::x(0.1 * SIG);
        let conv = RateConvention::HALF;
        let rigid = com_marginal_rate(&l, SpreadModel::NONE, dx, conv, 1, 0, &c()).unwrap();
        let e = com_marginal_rate(
            &l,
            SpreadModel::gaussian(0.1 * A).unwrap(),
            dx,
            conv,
            2000,
            5,
            &c(),
        )
        .unwrap();
        assert!((e.mean - rigid.mean).abs() <= 3.0 * e.standard_error.max(1e-12 * rigid.mean));
        let single = self_shift_catness(&l.nucleus(), dx, &c()).unwrap() * 0.5 / c().hbar;
        assert_relative_eq!(e.mean, 8.0 * single, max_relative = 1e-3);
    }

    #[test]
    fn seeded_means_repeat() {
        let l = balls();
        let s = SpreadModel::gaussian(0.2 * A).unwrap();
        let run =
            || com_marginal_rate(&l, s, Vec3::x(1e-15), RateConvention::ONE, 300, 9, &c()).unwrap();
        assert_eq!(run().mean.to_bits(), run().mean.to_bits());
    }

    #[test]
    fn overlap_aborts() {
        let l = lattice(NucleusProfile::UniformBall { radius: 0.4 * A });
        let s = SpreadModel::gaussian(A).unwrap();
        let r = com_marginal_rate(&l, s, Vec3::x(1e-15), RateConvention::ONE, 200, 1, &c());
        assert!(matches!(r, Err(Error::OverlapAbort { .. })));
        let rows = helium_regime_sweep(
            &l,
            &[0.0, A],
            Vec3::x(1e-15),
            RateConvention::ONE,
            200,
            1,
            &c(),
        )
        .unwrap();
        assert!(rows[0].valid);
        assert!(!rows[1].valid);
    }

    #[test]
    fn blur_first_loses_the_amplification() {
        let l = balls();
        let dx = Vec3::x(1e-15);
        let correct =
            com_marginal_rate(&l, SpreadModel::NONE, dx, RateConvention::HALF, 1, 0, &c()).unwrap();
        let naive = blur_first_rate(
            &l,
            SpreadModel::gaussian(A).unwrap(),
            dx,
            RateConvention::HALF,
            &c(),
        )
        .unwrap();
        let ratio = correct.mean / naive.rate;
        assert!(ratio > 1e10 && ratio < 1e14, "ratio {ratio:e}");
    }

    #[test]
    fn sweep_contract() {
        let l = balls();
        let dx = Vec3::x(1e-15);
        assert!(helium_regime_sweep(&l, &[], dx, RateConvention::ONE, 10, 0, &c()).is_err());
        assert!(
            helium_regime_sweep(&l, &[2e-11, 1e-11], dx, RateConvention::ONE, 10, 0, &c()).is_err()
        );
        let rows = helium_regime_sweep(&l, &[0.0], dx, RateConvention::ONE, 10, 0, &c()).unwrap();
        assert_eq!(rows[0].correct_rate, rows[0].naive_rate);
        let rows = helium_regime_sweep(
            &l,
            &[0.01 * A, 0.1 * A, A],
            dx,
            RateConvention::ONE,
            200,
            3,
            &c(),
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[1].naive_rate < w[0].naive_rate));
        assert_eq!(rows[0].record().len(), SWEEP_HEADER.len());
    }

    #[test]
    fn shift_must_stay_below_half_spacing() {
        let r = com_marginal_rate(
            &balls(),
            SpreadModel::NONE,
            Vec3::x(0.6 * A),
            RateConvention::ONE,
            1,
            0,
            &c(),
        );
        assert!(r.is_err());
    }
}
