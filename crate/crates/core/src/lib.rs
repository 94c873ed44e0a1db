//! Spontaneous-collapse observables for the gravity-related and
//! mass-proportional CSL models.

// Per-axis loops index several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod catdemo;
pub mod catness;
pub mod constants;
pub mod densities;
pub mod ensembles;
pub mod error;
pub mod fft3;
pub mod gridio;
pub mod newton;
pub mod profile;
pub mod quad;
pub mod rates;
pub mod rng;
pub mod units;
pub mod vec3;
pub mod verify;

pub use catdemo::{
    com_expectation, masking_report, measure_branch, CatState, MaskingReport, Verdict,
};
pub use catness::{
    catness_csl, catness_g, collapse_rate, lifetime, CSLParams, CatnessValue, Lifetime, Model,
    RateConvention,
};
pub use constants::PhysicalConstants;
pub use densities::{
    coarse_grain, granular_from_lattice, rasterize, total_mass, GranularLattice, Grid,
    KernelProfile, MassDensity, NucleusProfile, Resolution,
};
pub use ensembles::{
    blur_first_rate, com_marginal_rate, full_configuration_catness, helium_regime_sweep,
    NuclearConfiguration, RateEstimate, SpreadModel, SweepRow,
};
pub use error::{Error, Result};
pub use newton::{interaction_energy, EnergyResult, Method};
pub use rates::{DensityReading, MatterSpec};
pub use vec3::Vec3;
