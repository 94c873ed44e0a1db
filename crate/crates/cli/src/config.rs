//! Scenario files: TOML with unit-suffixed scalars, resolved to SI on load.

use std::path::{Path, PathBuf};

use collapse_core::units::{parse_as, Dimension};
use collapse_core::{
    granular_from_lattice, CSLParams, GranularLattice, KernelProfile, MassDensity, NucleusProfile,
    PhysicalConstants, RateConvention, Resolution, Vec3,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Dp,
    Csl,
    Both,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelChoice,
    #[serde(default)]
    pub constants: Option<ConstantsConfig>,
    pub geometry: GeometryConfig,
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub csl_params: Option<CslConfig>,
    #[serde(default)]
    pub rate_convention: Option<ConventionConfig>,
    pub displacements: Vec<String>,
    #[serde(default)]
    pub mc: Option<McConfig>,
}

/// Overrides in SI; `G` carries compound units the parser does not know.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(rename = "G")]
    pub g: Option<f64>,
    pub hbar: Option<f64>,
    pub m0: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum GeometryConfig {
    Ball {
        mass: String,
        radius: String,
    },
    #[serde(rename_all = "camelCase")]
    Lattice {
        a: String,
        dims: [usize; 3],
        nucleus_mass: String,
        sigma_nuc: String,
        #[serde(default)]
        profile: NucleusShape,
    },
    GridFile {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub enum NucleusShape {
    #[default]
    UniformBall,
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub enum KernelShape {
    #[default]
    Gaussian,
    UniformBall,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    pub sigma: String,
    #[serde(default)]
    pub profile: KernelShape,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CslConfig {
    pub lambda: Option<String>,
    pub sigma: Option<String>,
    pub m0: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionConfig {
    pub kappa: f64,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spread_widths: Vec<String>,
}

/// A fully parsed scenario in SI units.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub model: ModelChoice,
    pub constants: PhysicalConstants,
    pub geometry: Geometry,
    pub resolution: Resolution,
    pub csl: CSLParams,
    pub convention: RateConvention,
    pub displacements: Vec<f64>,
    pub mc: Option<MonteCarlo>,
}

#[derive(Clone, Debug)]
pub enum Geometry {
    Ball { mass: f64, radius: f64 },
    Lattice(GranularLattice),
    Grid { path: PathBuf, density: MassDensity },
}

#[derive(Clone, Debug)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    pub spread_widths: Vec<f64>,
}

impl Geometry {
    pub fn density(&self) -> CliResult<MassDensity> {
        Ok(match self {
            Geometry::Ball { mass, radius } => {
                MassDensity::uniform_ball(*mass, *radius, Vec3::ZERO)?
            }
            Geometry::Lattice(l) => MassDensity::GranularLattice(l.clone()),
            Geometry::Grid { density, .. } => density.clone(),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Geometry::Ball { .. } => "ball",
            Geometry::Lattice(_) => "lattice",
            Geometry::Grid { .. } => "gridFile",
        }
    }
}

fn quantity(field: &str, text: &str, dim: Dimension) -> CliResult<f64> {
    parse_as(text, dim).map_err(|e| CliError::Config(format!("{field}: {e}")))
}

pub fn load(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: ScenarioConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(raw, base)
}

/// Turn the raw document into SI values; relative grid paths are taken
/// from `base`.
pub fn resolve(raw: ScenarioConfig, base: &Path) -> CliResult<Scenario> {
    let mut constants = PhysicalConstants::default();
    if let Some(c) = &raw.constants {
        if let Some(g) = c.g {
            constants.g = g;
        }
        if let Some(h) = c.hbar {
            constants.hbar = h;
        }
        if let Some(m) = &c.m0 {
            constants.m0 = quantity("constants.m0", m, Dimension::Mass)?;
        }
    }
    constants
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let geometry = match raw.geometry {
        GeometryConfig::Ball { mass, radius } => Geometry::Ball {
            mass: quantity("geometry.ball.mass", &mass, Dimension::Mass)?,
            radius: quantity("geometry.ball.radius", &radius, Dimension::Length)?,
        },
        GeometryConfig::Lattice {
            a,
            dims,
            nucleus_mass,
            sigma_nuc,
            profile,
        } => {
            let a = quantity("geometry.lattice.a", &a, Dimension::Length)?;
            let m = quantity(
                "geometry.lattice.nucleusMass",
                &nucleus_mass,
                Dimension::Mass,
            )?;
            let s = quantity("geometry.lattice.sigmaNuc", &sigma_nuc, Dimension::Length)?;
            let profile = match profile {
                NucleusShape::UniformBall => NucleusProfile::UniformBall { radius: s },
                NucleusShape::Gaussian => NucleusProfile::GaussianBlob { width: s },
            };
            match granular_from_lattice(a, dims, m, profile).map_err(config_error)? {
                MassDensity::GranularLattice(l) => Geometry::Lattice(l),
                _ => unreachable!("granular_from_lattice returns a lattice"),
            }
        }
        GeometryConfig::GridFile { path } => {
            let full = if path.is_absolute() {
                path
            } else {
                base.join(path)
            };
            let grid = collapse_core::gridio::load_grid(&full)
                .map_err(|e| CliError::Config(format!("grid file {}: {e}", full.display())))?;
            Geometry::Grid {
                path: full,
                density: MassDensity::Grid(grid),
            }
        }
    };
    let density = geometry.density().map_err(|e| match e {
        CliError::Core(e) => config_error(e),
        other => other,
    })?;
    density.validate().map_err(config_error)?;

    let sigma = quantity("resolution.sigma", &raw.resolution.sigma, Dimension::Length)?;
    let kernel = match raw.resolution.profile {
        KernelShape::Gaussian => KernelProfile::Gaussian,
        KernelShape::UniformBall => KernelProfile::UniformBall,
    };
    let resolution = Resolution::new(sigma, kernel).map_err(config_error)?;

    let mut csl = CSLParams {
        m0: constants.m0,
        ..CSLParams::default()
    };
    if let Some(c) = &raw.csl_params {
        if let Some(l) = &c.lambda {
            csl.lambda = quantity("cslParams.lambda", l, Dimension::Rate)?;
        }
        if let Some(s) = &c.sigma {
            csl.sigma = quantity("cslParams.sigma", s, Dimension::Length)?;
        }
        if let Some(m) = &c.m0 {
            csl.m0 = quantity("cslParams.m0", m, Dimension::Mass)?;
        }
    }
    csl.validate().map_err(config_error)?;

    let convention = match raw.rate_convention {
        Some(c) => RateConvention::new(c.kappa).map_err(config_error)?,
        None => RateConvention::default(),
    };

    if raw.displacements.is_empty() {
        return Err(CliError::Config(
            "displacements must list at least one length".into(),
        ));
    }
    let displacements = raw
        .displacements
        .iter()
        .map(|d| {
            let v = quantity("displacements", d, Dimension::Length)?;
            if v < 0.0 {
                return Err(CliError::Config(format!("displacement {d:?} is negative")));
            }
            Ok(v)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mc = match raw.mc {
        Some(m) => {
            if m.samples == 0 {
                return Err(CliError::Config("mc.samples must be >= 1".into()));
            }
            let spread_widths = m
                .spread_widths
                .iter()
                .map(|w| quantity("mc.spreadWidths", w, Dimension::Length))
                .collect::<CliResult<Vec<_>>>()?;
            Some(MonteCarlo {
                samples: m.samples,
                seed: m.seed.unwrap_or(0),
                spread_widths,
            })
        }
        None => None,
    };

    Ok(Scenario {
        name: raw.name,
        model: raw.model,
        constants,
        geometry,
        resolution,
        csl,
        convention,
        displacements,
        mc,
    })
}

fn config_error(e: collapse_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<Scenario> {
        let raw: ScenarioConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        resolve(raw, Path::new("."))
    }

    const BALL: &str = r#"
name = "ball"
model = "dp"
displacements = ["1e-14 m", "1e-12 cm"]

[geometry.ball]
mass = "1 g"
radius = "0.5 cm"

[resolution]
sigma = "1e-3 cm"
"#;

    #[test]
    fn ball_scenario_is_converted_to_si() {
        let s = parse(BALL).unwrap();
        match s.geometry {
            Geometry::Ball { mass, radius } => {
                assert_eq!(mass, 1e-3);
                assert_eq!(radius, 5e-3);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s.displacements, vec![1e-14, 1e-14]);
        assert_eq!(s.resolution.sigma, 1e-5);
        assert_eq!(s.convention.kappa(), 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BALL}\nextra = 1\n");
        assert!(matches!(parse(&text), Err(CliError::Config(_))));
        let text = BALL.replace("radius =", "rad =");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn bare_numbers_and_wrong_dimensions_are_rejected() {
        assert!(parse(&BALL.replace("\"0.5 cm\"", "\"0.5\"")).is_err());
        assert!(parse(&BALL.replace("\"1 g\"", "\"1 m\"")).is_err());
    }

    #[test]
    fn empty_displacements_is_a_config_error() {
        let text = BALL.replace(r#"["1e-14 m", "1e-12 cm"]"#, "[]");
        assert!(matches!(parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn lattice_geometry() {
        let text = r#"
name = "solid"
model = "both"
displacements = ["1e-16 m"]
rateConvention = { kappa = 1.0 }

[geometry.lattice]
a = "1 angstrom"
dims = [2, 2, 2]
nucleusMass = "16 u"
sigmaNuc = "1e-14 m"

[resolution]
sigma = "1e-14 m"
profile = "uniformBall"

[mc]
samples = 100
spreadWidths = ["0 m", "1e-12 m"]
"#;
        let s = parse(text).unwrap();
        let Geometry::Lattice(l) = &s.geometry else {
            panic!()
        };
        assert_eq!(l.len(), 8);
        assert_eq!(l.profile, NucleusProfile::UniformBall { radius: 1e-14 });
        assert_eq!(s.convention.kappa(), 1.0);
        assert_eq!(s.mc.unwrap().spread_widths, vec![0.0, 1e-12]);
        assert!(parse(&text.replace("1 angstrom", "1e-14 m")).is_err());
    }
}
