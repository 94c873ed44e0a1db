//! Cat states entangled with an environment, their c.o.m. under a
//! which-branch measurement, and the decoherence versus collapse race.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::catness::{CatnessValue, RateConvention};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub amplitude: Complex64,
    pub com: Vec3,
}

/// Superposition of rigid-body c.o.m. positions, each tagged by an
/// orthogonal environment state. Only branch weights are tracked.
#[derive(Clone, Debug, PartialEq)]
pub struct CatState {
    branches: Vec<Branch>,
    pub mass: f64,
}

impl CatState {
    /// Normalizes the amplitudes.
    pub fn new(branches: Vec<Branch>, mass: f64) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidParameter(
                "a cat state needs at least one branch".into(),
            ));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass must be > 0, got {mass}"
            )));
        }
        let norm: f64 = branches.iter().map(|b| b.amplitude.norm_sqr()).sum();
        if !(norm > 0.0 && norm.is_finite()) || branches.iter().any(|b| !b.com.is_finite()) {
            return Err(Error::InvalidParameter(
                "amplitudes must be finite and not all zero".into(),
            ));
        }
        let k = 1.0 / norm.sqrt();
        let branches = branches
            .into_iter()
            .map(|b| Branch {
                amplitude: b.amplitude * k,
                ..b
            })
            .collect();
        Ok(CatState { branches, mass })
    }

    /// Real amplitudes proportional to `sqrt(weights)`.
    pub fn from_weights(weights: &[f64], positions: &[Vec3], mass: f64) -> Result<Self> {
        if weights.len() != positions.len() {
            return Err(Error::Mismatch(
                "weights and positions differ in length".into(),
            ));
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidParameter("weights must be >= 0".into()));
        }
        let b = weights
            .iter()
            .zip(positions)
            .map(|(w, p)| Branch {
                amplitude: Complex64::new(w.sqrt(), 0.0),
                com: *p,
            })
            .collect();
        Self::new(b, mass)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Born weights, renormalized against rounding in the stored amplitudes.
    pub fn weights(&self) -> Vec<f64> {
        let w: Vec<f64> = self
            .branches
            .iter()
            .map(|b| b.amplitude.norm_sqr())
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

pub fn com_expectation(s: &CatState) -> Vec3 {
    let mut x = Vec3::ZERO;
    for (b, w) in s.branches.iter().zip(s.weights()) {
        x += b.com * w;
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub branch: usize,
    pub state: CatState,
    /// Post-measurement c.o.m. minus the prior expectation.
    pub com_shift: Vec3,
}

/// Born-rule selection of a branch with the uniform deviate `u`.
fn born_pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn measure_branch(s: &CatState, seed: u64) -> Result<Measurement> {
    measure_branch_trial(s, seed, 0)
}

/// Trial `trial` of a seeded sequence of independent measurements.
pub fn measure_branch_trial(s: &CatState, seed: u64, trial: u64) -> Result<Measurement> {
    if s.branches.len() < 2 {
        return Err(Error::InvalidParameter(
            "measurement needs at least two branches".into(),
        ));
    }
    let u: f64 = stream(seed, trial).random();
    let i = born_pick(&s.weights(), u);
    let chosen = s.branches[i];
    let state = CatState {
        branches: vec![Branch {
            amplitude: chosen.amplitude / chosen.amplitude.norm(),
            com: chosen.com,
        }],
        mass: s.mass,
    };
    Ok(Measurement {
        branch: i,
        state,
        com_shift: chosen.com - com_expectation(s),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Masked,
    Unmasked,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Masked => "masked",
            Verdict::Unmasked => "unmasked",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskingReport {
    /// 1/s.
    pub dp_rate: f64,
    /// Environmental rate over DP rate; infinite when the DP rate is 0.
    pub ratio: f64,
    pub verdict: Verdict,
    /// Largest c.o.m. jump a which-branch measurement can cause, m.
    pub max_com_shift: f64,
}

/// Compare an environmental decoherence rate with the DP rate of a cat
/// whose branches are `separation` apart.
pub fn masking_report(
    env_rate: f64,
    dp_catness: &CatnessValue,
    conv: RateConvention,
    separation: f64,
    consts: &PhysicalConstants,
) -> Result<MaskingReport> {
    if env_rate.is_nan() || env_rate < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "decoherence rate must be >= 0, got {env_rate}"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "separation must be >= 0, got {separation}"
        )));
    }
    let dp_rate = conv.kappa() * dp_catness.value / consts.hbar;
    let ratio = if dp_rate > 0.0 {
        env_rate / dp_rate
    } else if env_rate == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MaskingReport {
        dp_rate,
        ratio,
        verdict: if ratio > 1.0 {
            Verdict::Masked
        } else {
            Verdict::Unmasked
        },
        max_com_shift: 0.5 * separation,
    })
}

/// Summary of repeated measurements of a two-branch cat.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationDemo {
    /// Branch selected in each trial.
    pub branches: Vec<usize>,
    pub shifts: Vec<Vec3>,
    pub branch_counts: Vec<usize>,
    pub mean_shift: Vec3,
}

impl ConservationDemo {
    pub fn frequency(&self, branch: usize) -> f64 {
        self.branch_counts[branch] as f64 / self.shifts.len() as f64
    }
}

/// Measure `trials` fresh copies of the cat with weights `weights` at 0
/// and `separation` along x.
pub fn demo_conservation(
    separation: f64,
    weights: [f64; 2],
    trials: usize,
    seed: u64,
) -> Result<ConservationDemo> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let s = CatState::from_weights(&weights, &[Vec3::ZERO, Vec3::x(separation)], 1.0)?;
    let mut shifts = Vec::with_capacity(trials);
    let mut branches = Vec::with_capacity(trials);
    let mut counts = vec![0; 2];
    let mut sum = Vec3::ZERO;
    for t in 0..trials as u64 {
        let m = measure_branch_trial(&s, seed, t)?;
        counts[m.branch] += 1;
        branches.push(m.branch);
        sum += m.com_shift;
        shifts.push(m.com_shift);
    }
    Ok(ConservationDemo {
        branches,
        shifts,
        branch_counts: counts,
        mean_shift: sum * (1.0 / trials as f64),
    })
}
