use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use collapse_core::catdemo::demo_conservation;
use collapse_core::ensembles::SWEEP_HEADER;
use collapse_core::rates::{
    com_rate_small_displacement, equilibrium_rate, equilibrium_width, newton_frequency,
};
use collapse_core::units::{parse_as, Dimension};
use collapse_core::verify::{run_suite, Suite};
use collapse_core::{
    catness_csl, catness_g, collapse_rate, helium_regime_sweep, lifetime, CatnessValue,
    KernelProfile, Model, Resolution, Vec3,
};

use crate::config::{Geometry, ModelChoice, Scenario};
use crate::error::{CliError, CliResult};
use crate::output::{num, Sink};

pub const RATE_HEADER: [&str; 14] = [
    "model",
    "dx_m",
    "catness_j",
    "lifetime_s",
    "rate_hz",
    "kappa",
    "method",
    "profile",
    "sigma_m",
    "error_estimate_j",
    "leading_order_rate_hz",
    "equilibrium_width_m",
    "equilibrium_rate_hz",
    "heuristic",
];

pub const COMPARE_HEADER: [&str; 11] = [
    "dx_m",
    "dp_catness_j",
    "dp_rate_hz",
    "dp_method",
    "dp_profile",
    "dp_sigma_m",
    "csl_catness_j",
    "csl_rate_hz",
    "csl_method",
    "csl_sigma_m",
    "kappa",
];

pub const DEMO_HEADER: [&str; 4] = ["trial", "branch", "shift_x_m", "shift_norm_m"];

fn profile_name(p: KernelProfile) -> &'static str {
    match p {
        KernelProfile::Gaussian => "gaussian",
        KernelProfile::UniformBall => "uniformBall",
    }
}

fn models(choice: ModelChoice) -> &'static [Model] {
    match choice {
        ModelChoice::Dp => &[Model::DP],
        ModelChoice::Csl => &[Model::CSL],
        ModelChoice::Both => &[Model::DP, Model::CSL],
    }
}

fn preamble(sink: &mut Sink, s: &Scenario) -> CliResult<()> {
    let c = &s.constants;
    sink.comment(&format!(
        "scenario={} geometry={}",
        s.name,
        s.geometry.kind()
    ))?;
    if let Geometry::Grid { path, .. } = &s.geometry {
        sink.comment(&format!("grid_file={}", path.display()))?;
    }
    sink.comment(&format!(
        "G={} hbar={} m0={}",
        num(c.g),
        num(c.hbar),
        num(c.m0)
    ))?;
    sink.comment(&format!(
        "kappa={} dp_profile={} dp_sigma_m={} csl_lambda_hz={} csl_sigma_m={} csl_m0_kg={}",
        s.convention.kappa(),
        profile_name(s.resolution.profile),
        num(s.resolution.sigma),
        num(s.csl.lambda),
        num(s.csl.sigma),
        num(s.csl.m0)
    ))
}

fn catness(s: &Scenario, model: Model, dx: f64) -> CliResult<CatnessValue> {
    let f = s.geometry.density()?;
    let g = f.translated(Vec3::x(dx));
    Ok(match model {
        Model::DP => catness_g(&f, &g, &s.resolution, &s.constants)?,
        Model::CSL => catness_csl(&f, &g, &s.csl, &s.constants)?,
    })
}

fn rate_row(s: &Scenario, model: Model, dx: f64) -> CliResult<Vec<String>> {
    let l2 = catness(s, model, dx)?;
    let conv = s.convention;
    let mut row = vec![
        model.to_string(),
        num(dx),
        num(l2.value),
        lifetime(&l2, conv, &s.constants).to_string(),
        num(collapse_rate(&l2, conv, &s.constants)),
        conv.kappa().to_string(),
        l2.method.to_string(),
        profile_name(l2.resolution.profile).to_string(),
        num(l2.resolution.sigma),
        num(l2.error_estimate),
    ];
    // Small-displacement and equilibrium estimates exist only for a
    // homogeneous ball under DP.
    match (&s.geometry, model) {
        (Geometry::Ball { mass, radius }, Model::DP) => {
            let rho = mass / (4.0 / 3.0 * PI * radius.powi(3));
            let omega = newton_frequency(rho, &s.constants)?;
            let lead = com_rate_small_displacement(*mass, omega, dx, conv, &s.constants)?;
            let width = equilibrium_width(*mass, omega, &s.constants)?;
            let eq = equilibrium_rate(omega)?;
            row.extend([
                num(lead.rate),
                num(width.value),
                num(eq.value),
                (width.heuristic && eq.heuristic).to_string(),
            ]);
        }
        _ => row.extend(std::iter::repeat_n(String::new(), 3).chain(["false".to_string()])),
    }
    Ok(row)
}

pub fn rate(s: &Scenario, dx_override: Option<&str>, out: Option<&Path>) -> CliResult<()> {
    let dxs = match dx_override {
        Some(t) => vec![parse_length("--dx", t)?],
        None => s.displacements.clone(),
    };
    let mut rows = Vec::new();
    for &dx in &dxs {
        for &m in models(s.model) {
            rows.push(rate_row(s, m, dx)?);
        }
    }
    let mut sink = Sink::open(out)?;
    preamble(&mut sink, s)?;
    sink.table(&RATE_HEADER, rows)?;
    sink.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Dx,
    #[value(alias = "spreadWidth")]
    SpreadWidth,
    Sigma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Linear,
    Log,
}

/// `points` values from `from` to `to` inclusive.
pub fn sweep_points(from: f64, to: f64, points: usize, scale: Scale) -> CliResult<Vec<f64>> {
    if points == 0 {
        return Err(CliError::Usage("--points must be >= 1".into()));
    }
    if !(from.is_finite() && to.is_finite()) || from > to {
        return Err(CliError::Usage(format!("bad range {from}..{to}")));
    }
    if scale == Scale::Log && from <= 0.0 {
        return Err(CliError::Usage("log scale needs a positive range".into()));
    }
    if points == 1 {
        return Ok(vec![from]);
    }
    let n = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i == 0 {
                return from;
            }
            if i == points - 1 {
                return to;
            }
            let t = i as f64 / n;
            match scale {
                Scale::Linear => from + (to - from) * t,
                Scale::Log => (from.ln() + (to.ln() - from.ln()) * t).exp(),
            }
        })
        .collect())
}

fn parse_length(flag: &str, text: &str) -> CliResult<f64> {
    parse_as(text, Dimension::Length).map_err(|e| CliError::Usage(format!("{flag}: {e}")))
}

pub struct SweepArgs<'a> {
    pub param: SweepParam,
    pub from: Option<&'a str>,
    pub to: Option<&'a str>,
    pub points: usize,
    pub scale: Scale,
}

pub fn sweep(
    s: &Scenario,
    args: &SweepArgs,
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult<()> {
    let values = match (args.from, args.to) {
        (Some(a), Some(b)) => sweep_points(
            parse_length("--from", a)?,
            parse_length("--to", b)?,
            args.points,
            args.scale,
        )?,
        (None, None) if args.param == SweepParam::SpreadWidth => match &s.mc {
            Some(mc) if !mc.spread_widths.is_empty() => mc.spread_widths.clone(),
            _ => {
                return Err(CliError::Usage(
                    "give --from/--to or mc.spreadWidths".into(),
                ))
            }
        },
        _ => return Err(CliError::Usage("--from and --to are both required".into())),
    };
    let dx0 = s.displacements[0];
    match args.param {
        SweepParam::Dx | SweepParam::Sigma => {
            let mut rows = Vec::with_capacity(values.len());
            for &v in &values {
                let mut sc = s.clone();
                let dx = if args.param == SweepParam::Dx {
                    v
                } else {
                    sc.resolution = Resolution::new(v, s.resolution.profile)
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                    sc.csl.sigma = v;
                    dx0
                };
                for &m in models(s.model) {
                    rows.push(rate_row(&sc, m, dx)?);
                }
            }
            let mut sink = Sink::open(out)?;
            preamble(&mut sink, s)?;
            sink.comment(&format!(
                "sweep={:?} points={} scale={:?}",
                args.param,
                values.len(),
                args.scale
            ))?;
            sink.table(&RATE_HEADER, rows)?;
            sink.finish()
        }
        SweepParam::SpreadWidth => {
            let Geometry::Lattice(lattice) = &s.geometry else {
                return Err(CliError::Config(
                    "spread-width sweeps need a lattice geometry".into(),
                ));
            };
            let mc = s
                .mc
                .as_ref()
                .ok_or_else(|| CliError::Config("spread-width sweeps need an [mc] table".into()))?;
            let seed = seed.unwrap_or(mc.seed);
            let rows = helium_regime_sweep(
                lattice,
                &values,
                Vec3::x(dx0),
                s.convention,
                mc.samples,
                seed,
                &s.constants,
            )?;
            let mut sink = Sink::open(out)?;
            preamble(&mut sink, s)?;
            sink.comment(&format!(
                "sweep=SpreadWidth dx_m={} samples={} seed={} nucleus={:?} method=ClosedForm estimator=montecarlo naive=blurFirst",
                num(dx0),
                mc.samples,
                seed,
                lattice.profile
            ))?;
            sink.table(&SWEEP_HEADER, rows.iter().map(|r| r.record()))?;
            sink.finish()
        }
    }
}

pub fn compare(s: &Scenario, out: Option<&Path>) -> CliResult<()> {
    let conv = s.convention;
    let mut rows = Vec::new();
    for &dx in &s.displacements {
        let dp = catness(s, Model::DP, dx)?;
        let csl = catness(s, Model::CSL, dx)?;
        rows.push(vec![
            num(dx),
            num(dp.value),
            num(collapse_rate(&dp, conv, &s.constants)),
            dp.method.to_string(),
            profile_name(dp.resolution.profile).to_string(),
            num(dp.resolution.sigma),
            num(csl.value),
            num(collapse_rate(&csl, conv, &s.constants)),
            csl.method.to_string(),
            num(csl.resolution.sigma),
            conv.kappa().to_string(),
        ]);
    }
    let mut sink = Sink::open(out)?;
    preamble(&mut sink, s)?;
    sink.table(&COMPARE_HEADER, rows)?;
    sink.finish()
}

pub fn verify(
    suite: &str,
    consts: &collapse_core::PhysicalConstants,
    seed: u64,
    out: Option<&Path>,
) -> CliResult<()> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![Suite::from_str(suite).map_err(|e| CliError::Usage(e.to_string()))?]
    };
    let mut sink = Sink::open(out)?;
    let (mut total, mut failed) = (0, 0);
    for s in suites {
        for check in run_suite(s, consts, seed)? {
            total += 1;
            failed += usize::from(!check.passed);
            sink.line(&check.to_string())?;
        }
    }
    sink.line(&format!(
        "summary suite={suite} total={total} passed={} failed={failed}",
        total - failed
    ))?;
    sink.finish()?;
    if failed > 0 {
        return Err(CliError::Verification { failed, total });
    }
    Ok(())
}

fn parse_weights(text: &str) -> CliResult<[f64; 2]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || {
        CliError::Usage(format!(
            "--weights expects two numbers like 0.5,0.5, got {text:?}"
        ))
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    Ok([a, b])
}

pub fn demo(
    separation: &str,
    weights: &str,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> CliResult<()> {
    let sep = parse_length("--separation", separation)?;
    let w = parse_weights(weights)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let d = demo_conservation(sep, w, trials, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut sink = Sink::open(out)?;
    sink.comment(&format!(
        "separation_m={} weights={},{} trials={trials} seed={seed}",
        num(sep),
        w[0],
        w[1]
    ))?;
    sink.table(
        &DEMO_HEADER,
        d.shifts
            .iter()
            .zip(&d.branches)
            .enumerate()
            .map(|(i, (s, b))| vec![i.to_string(), b.to_string(), num(s.0[0]), num(s.norm())]),
    )?;
    for b in 0..2 {
        sink.comment(&format!("branch={b} frequency={}", num(d.frequency(b))))?;
    }
    sink.comment(&format!("mean_shift_m={}", num(d.mean_shift.0[0])))?;
    sink.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_points_hit_both_ends() {
        let v = sweep_points(1e-6, 1e-2, 5, Scale::Log).unwrap();
        assert_eq!((v[0], v[4]), (1e-6, 1e-2));
        assert!((v[2] / 1e-4 - 1.0).abs() < 1e-12);
        assert_eq!(
            sweep_points(0.0, 1.0, 3, Scale::Linear).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(sweep_points(2.0, 5.0, 1, Scale::Linear).unwrap(), vec![2.0]);
        assert!(sweep_points(2.0, 1.0, 3, Scale::Linear).is_err());
        assert!(sweep_points(-1.0, 1.0, 3, Scale::Log).is_err());
        assert!(sweep_points(f64::NAN, 1.0, 3, Scale::Linear).is_err());
    }

    #[test]
    fn weights_parse() {
        assert_eq!(parse_weights(" 0.25, 0.75").unwrap(), [0.25, 0.75]);
        assert!(parse_weights("1").is_err());
        assert!(parse_weights("a,b").is_err());
    }
}
