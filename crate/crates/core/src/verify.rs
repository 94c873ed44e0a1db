//! Self-checks run by `collapse-lab verify`.
//!
//! Each check produces one machine-readable line. The oracle suite compares
//! the analytic, grid and quadrature energies on a fixed battery of
//! geometries; the invariant suite exercises scaling laws and symmetry; the
//! magnitude suite evaluates the headline numbers.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::catdemo::demo_conservation;
use crate::catness::{catness_g, RateConvention};
use crate::constants::PhysicalConstants;
use crate::densities::{
    granular_from_lattice, rasterize, GranularLattice, GridGeometry, MassDensity, NucleusProfile,
    Resolution,
};
use crate::ensembles::{blur_first_rate, com_marginal_rate, SpreadModel};
use crate::error::{Error, Result};
use crate::newton::{
    grid_interaction_energy_fft, interaction_energy, interaction_energy_quadrature, EnergyResult,
    QuadratureSpec,
};
use crate::rates::{
    amplification, equilibrium_rate, equilibrium_width, newton_frequency, nuclear_frequency,
    DensityReading, MatterSpec,
};
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Oracles,
    Invariants,
    PaperNumbers,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Oracles, Suite::Invariants, Suite::PaperNumbers];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracles" => Ok(Suite::Oracles),
            "invariants" => Ok(Suite::Invariants),
            "paper-numbers" | "paperNumbers" | "paper_numbers" => Ok(Suite::PaperNumbers),
            _ => Err(Error::InvalidParameter(format!(
                "unknown suite '{s}' (expected oracles, invariants or paper-numbers)"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Oracles => "oracles",
            Suite::Invariants => "invariants",
            Suite::PaperNumbers => "paper-numbers",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check suite={} name={} status={} seconds={:.3} {}",
            self.suite,
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.seconds,
            self.detail
        )
    }
}

fn timed<F: FnOnce() -> Result<(bool, String)>>(suite: Suite, name: &str, f: F) -> Check {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error=\"{e}\"")),
    };
    Check {
        suite,
        name: name.to_string(),
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

/// Named density pairs for the energy comparison.
pub fn oracle_battery() -> Result<Vec<(String, MassDensity, MassDensity)>> {
    let mut v = Vec::new();
    let ball = |d: f64| MassDensity::uniform_ball(1.0, 1.0, Vec3::x(d));
    for d in [0.0, 0.5, 1.0, 2.0, 3.0] {
        v.push((format!("balls_d{d}"), ball(0.0)?, ball(d)?));
    }
    let blob = MassDensity::gaussian_blob;
    v.push((
        "gauss_same".into(),
        blob(1.0, 1.0, Vec3::ZERO)?,
        blob(1.0, 1.0, Vec3::ZERO)?,
    ));
    v.push((
        "gauss_diag".into(),
        blob(1.0, 0.5, Vec3::ZERO)?,
        blob(1.0, 0.5, Vec3::new(0.3, 0.3, 0.3))?,
    ));
    v.push((
        "gauss_unequal".into(),
        blob(2.0, 0.3, Vec3::ZERO)?,
        blob(1.0, 0.6, Vec3::x(1.0))?,
    ));
    v.push((
        "gauss_far".into(),
        blob(1.0, 0.4, Vec3::ZERO)?,
        blob(1.0, 0.4, Vec3::new(0.0, 3.0, 0.0))?,
    ));
    v.push((
        "ball_gauss".into(),
        ball(0.0)?,
        blob(1.0, 0.3, Vec3::x(0.6))?,
    ));
    let balls = granular_from_lattice(
        1.0,
        [2, 2, 2],
        0.125,
        NucleusProfile::UniformBall { radius: 0.2 },
    )?;
    let blobs = granular_from_lattice(
        1.0,
        [2, 2, 2],
        0.125,
        NucleusProfile::GaussianBlob { width: 0.12 },
    )?;
    v.push(("lattice_self".into(), balls.clone(), balls.clone()));
    v.push((
        "lattice_shift".into(),
        balls.clone(),
        balls.translated(Vec3::x(0.1)),
    ));
    v.push((
        "lattice_gauss".into(),
        blobs.clone(),
        blobs.translated(Vec3::new(0.0, 0.3, 0.2)),
    ));
    Ok(v)
}

/// Analytic, grid and quadrature energies of one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodComparison {
    pub analytic: EnergyResult,
    pub grid: EnergyResult,
    pub oracle: EnergyResult,
}

impl MethodComparison {
    /// Largest pairwise discrepancy divided by its allowance
    /// `max(1%, quoted errors)`; at most 1 means agreement.
    pub fn worst_ratio(&self) -> f64 {
        let all = [self.analytic, self.grid, self.oracle];
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                let (a, b) = (all[i], all[j]);
                let allow = (0.01 * a.value.abs().max(b.value.abs()))
                    .max(a.error_estimate + b.error_estimate);
                worst = worst.max((a.value - b.value).abs() / allow);
            }
        }
        worst
    }
}

pub fn compare_methods(
    f: &MassDensity,
    g: &MassDensity,
    grid_dim: usize,
    consts: &PhysicalConstants,
) -> Result<MethodComparison> {
    let analytic = interaction_energy(f, g, consts)?;
    let geom = GridGeometry::enclosing(&[f, g], grid_dim, 0.0)?;
    let fg = rasterize(f, geom.origin, geom.voxel_edge, geom.dims)?.grid;
    let gg = rasterize(g, geom.origin, geom.voxel_edge, geom.dims)?.grid;
    let grid = grid_interaction_energy_fft(&fg, &gg, consts)?;
    let oracle = interaction_energy_quadrature(f, g, &QuadratureSpec::product_gauss(16)?, consts)?;
    Ok(MethodComparison {
        analytic,
        grid,
        oracle,
    })
}

/// Log-log slope of the ball catness over `d/R` in `[1e-4, 1e-2]` and the
/// coefficient `c` in `l^2 = c M omega^2 d^2` from quadrature energies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticLaw {
    pub slope: f64,
    pub coefficient: f64,
    /// `kappa` with `kappa c = 1/2`, so that `kappa l^2 / hbar` is the
    /// leading-order rate `M omega^2 d^2 / (2 hbar)`.
    pub kappa: f64,
}

pub fn quadratic_law(consts: &PhysicalConstants) -> Result<QuadraticLaw> {
    let (m, r) = (1.0, 1.0);
    let f = MassDensity::uniform_ball(m, r, Vec3::ZERO)?;
    let res = Resolution::gaussian(1e-9 * r)?;
    let n = 20;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let u = 1e-4 * 100f64.powf(i as f64 / (n - 1) as f64);
        let l = catness_g(&f, &f.translated(Vec3::x(u * r)), &res, consts)?;
        xs.push(u.ln());
        ys.push(l.value.ln());
    }
    let slope = fit_slope(&xs, &ys);
    // coefficient from brute-force energies; c(u) = c0 - 3u/8 + O(u^2), so
    // two separations remove the linear term
    let spec = QuadratureSpec::product_gauss(24)?;
    let u0 = interaction_energy_quadrature(&f, &f, &spec, consts)?.value;
    let omega2 = consts.g * m / r.powi(3);
    let coeff_at = |d: f64| -> Result<f64> {
        let ud = interaction_energy_quadrature(&f, &f.translated(Vec3::x(d)), &spec, consts)?.value;
        Ok(2.0 * (ud - u0) / (m * omega2 * d * d))
    };
    let coefficient = 2.0 * coeff_at(5e-3 * r)? - coeff_at(1e-2 * r)?;
    Ok(QuadraticLaw {
        slope,
        coefficient,
        kappa: 0.5 / coefficient,
    })
}

/// Least-squares slope.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn lattice_8(profile: NucleusProfile, spec: &MatterSpec) -> Result<GranularLattice> {
    match granular_from_lattice(spec.lattice_constant, [2, 2, 2], spec.cell_mass(), profile)? {
        MassDensity::GranularLattice(l) => Ok(l),
        _ => unreachable!("granular_from_lattice returns a lattice"),
    }
}

fn oracle_checks(consts: &PhysicalConstants) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (name, f, g) in oracle_battery()? {
        out.push(timed(Suite::Oracles, &name, || {
            let c = compare_methods(&f, &g, 128, consts)?;
            let w = c.worst_ratio();
            Ok((
                w <= 1.0,
                format!(
                    "analytic={:.10e} grid={:.10e} oracle={:.10e} worst_over_allowance={w:.3}",
                    c.analytic.value, c.grid.value, c.oracle.value
                ),
            ))
        }));
    }
    Ok(out)
}

fn invariant_checks(consts: &PhysicalConstants, seed: u64) -> Result<Vec<Check>> {
    let s = Suite::Invariants;
    let mut out = Vec::new();
    out.push(timed(s, "quadratic_law", || {
        let q = quadratic_law(consts)?;
        Ok((
            (q.slope - 2.0).abs() <= 0.01,
            format!(
                "slope={:.6} coefficient={:.6} kappa={:.6}",
                q.slope, q.coefficient, q.kappa
            ),
        ))
    }));
    out.push(timed(s, "plateau", || {
        // l^2(d) = 2.4 G (1 - R / (1.2 d)) for disjoint unit balls
        let f = MassDensity::uniform_ball(1.0, 1.0, Vec3::ZERO)?;
        let res = Resolution::gaussian(1e-9)?;
        let plateau = 2.4 * consts.g;
        let at = |d: f64| catness_g(&f, &f.translated(Vec3::x(d)), &res, consts).map(|l| l.value);
        let l100 = at(100.0)?;
        let law = (l100 / (plateau * (1.0 - 1.0 / 120.0)) - 1.0).abs();
        let far = (at(1e4)? / plateau - 1.0).abs();
        Ok((
            law <= 1e-9 && far <= 5e-3,
            format!(
                "l2_100R={l100:.10e} plateau={plateau:.10e} gap_100R={:.3e} law_rel_err={law:.1e} gap_1e4R={far:.1e}",
                1.0 - l100 / plateau
            ),
        ))
    }));
    out.push(timed(s, "energy_symmetry", || {
        let mut ok = true;
        for (_, f, g) in oracle_battery()? {
            let a = interaction_energy(&f, &g, consts)?.value;
            let b = interaction_energy(&g, &f, consts)?.value;
            ok &= a.to_bits() == b.to_bits();
        }
        Ok((ok, "bitwise".into()))
    }));
    out.push(timed(s, "hbar_independence", || {
        let scaled = PhysicalConstants {
            hbar: 10.0 * consts.hbar,
            ..*consts
        };
        let w = newton_frequency(1000.0, consts)?;
        let same = equilibrium_rate(newton_frequency(1000.0, &scaled)?)?
            .value
            .to_bits()
            == equilibrium_rate(w)?.value.to_bits();
        let ratio =
            equilibrium_width(1e-3, w, &scaled)?.value / equilibrium_width(1e-3, w, consts)?.value;
        let rel = (ratio / 10f64.sqrt() - 1.0).abs();
        Ok((
            same && rel <= 1e-12,
            format!("rate_bitwise={same} width_ratio_rel_err={rel:.2e}"),
        ))
    }));
    out.push(timed(s, "born_statistics", || {
        let d = demo_conservation(1.0, [1.0, 1.0], 100_000, seed)?;
        let freq = d.frequency(0);
        let all_half = d.shifts.iter().all(|x| x.norm() == 0.5);
        Ok((
            (freq - 0.5).abs() <= 0.01 && all_half,
            format!("frequency={freq:.5} all_shifts_half={all_half}"),
        ))
    }));
    out.push(timed(s, "spread_independence", || {
        let spec = MatterSpec::default();
        let l = lattice_8(
            NucleusProfile::UniformBall {
                radius: spec.sigma_nuc,
            },
            &spec,
        )?;
        let dx = Vec3::x(0.1 * spec.sigma_nuc);
        let conv = RateConvention::HALF;
        let mut est = vec![com_marginal_rate(
            &l,
            SpreadModel::NONE,
            dx,
            conv,
            1,
            seed,
            consts,
        )?];
        for k in [0.1, 0.2, 0.3] {
            let sp = SpreadModel::gaussian(k * spec.lattice_constant)?;
            est.push(com_marginal_rate(&l, sp, dx, conv, 2000, seed, consts)?);
        }
        let mut worst: f64 = 0.0;
        for i in 0..est.len() {
            for j in i + 1..est.len() {
                let se = est[i].standard_error.hypot(est[j].standard_error);
                let diff = (est[i].mean - est[j].mean).abs();
                worst = worst.max(if se > 0.0 {
                    diff / se
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                });
            }
        }
        Ok((worst <= 3.0, format!("worst_sigma={worst:.3}")))
    }));
    out.push(timed(s, "determinism", || {
        let spec = MatterSpec::default();
        let l = lattice_8(
            NucleusProfile::UniformBall {
                radius: spec.sigma_nuc,
            },
            &spec,
        )?;
        let sp = SpreadModel::gaussian(0.2 * spec.lattice_constant)?;
        let run = |threads: usize| -> Result<u64> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::NumericalFailure(e.to_string()))?;
            pool.install(|| {
                com_marginal_rate(
                    &l,
                    sp,
                    Vec3::x(1e-15),
                    RateConvention::HALF,
                    500,
                    seed,
                    consts,
                )
                .map(|e| e.mean.to_bits())
            })
        };
        let a = run(1)?;
        let b = run(3)?;
        Ok((a == b, format!("bitwise_equal={}", a == b)))
    }));
    Ok(out)
}

fn magnitude_checks(consts: &PhysicalConstants) -> Result<Vec<Check>> {
    let s = Suite::PaperNumbers;
    let spec = MatterSpec::default();
    let mut out = Vec::new();
    out.push(timed(s, "nuclear_frequency", || {
        let w = nuclear_frequency(&spec, DensityReading::AOverSigma, consts)?;
        Ok((
            (1e2..=1e4).contains(&w),
            format!("value_hz={w:.6e} band=[1e2,1e4]"),
        ))
    }));
    out.push(timed(s, "amplification", || {
        let a = amplification(&spec, DensityReading::AOverSigma)?;
        Ok((
            (3e11..=3e12).contains(&a),
            format!("value={a:.6e} band=[3e11,3e12]"),
        ))
    }));
    out.push(timed(s, "equilibrium_lifetime", || {
        let r = equilibrium_rate(newton_frequency(spec.rho, consts)?)?;
        let hours = 1.0 / r.value / 3600.0;
        Ok((
            (0.2..=2.0).contains(&hours),
            format!("tau_h={hours:.4} band=[0.2,2] heuristic={}", r.heuristic),
        ))
    }));
    out.push(timed(s, "blur_first_contrast", || {
        let l = lattice_8(
            NucleusProfile::UniformBall {
                radius: spec.sigma_nuc,
            },
            &spec,
        )?;
        let dx = Vec3::x(1e-15);
        let conv = RateConvention::HALF;
        let correct = com_marginal_rate(&l, SpreadModel::NONE, dx, conv, 1, 0, consts)?.mean;
        let naive = blur_first_rate(
            &l,
            SpreadModel::gaussian(spec.lattice_constant)?,
            dx,
            conv,
            consts,
        )?;
        let ratio = correct / naive.rate;
        Ok((
            (1e10..=1e14).contains(&ratio),
            format!("ratio={ratio:.4e} band=[1e10,1e14]"),
        ))
    }));
    Ok(out)
}

/// Run one suite; failures are reported in the checks, not as errors.
pub fn run_suite(suite: Suite, consts: &PhysicalConstants, seed: u64) -> Result<Vec<Check>> {
    consts.validate()?;
    match suite {
        Suite::Oracles => oracle_checks(consts),
        Suite::Invariants => invariant_checks(consts, seed),
        Suite::PaperNumbers => magnitude_checks(consts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("oracles".parse::<Suite>().unwrap(), Suite::Oracles);
        assert_eq!(
            "paperNumbers".parse::<Suite>().unwrap(),
            Suite::PaperNumbers
        );
        assert!("bogus".parse::<Suite>().is_err());
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
    }

    #[test]
    fn magnitude_suite_passes() {
        let checks = run_suite(Suite::PaperNumbers, &PhysicalConstants::default(), 0).unwrap();
        assert_eq!(checks.len(), 4);
        for c in checks {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 5.0];
        assert!((fit_slope(&x, &y) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn battery_has_twelve_or_more() {
        assert!(oracle_battery().unwrap().len() >= 12);
    }
}
