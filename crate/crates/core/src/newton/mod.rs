//! Newton interaction energy `U(f, g) = -G int int f(r) g(s) / |r - s|`.

pub mod closed_form;
pub mod grid;
pub mod oracle;
pub mod pair;

use std::cmp::Ordering;
use std::fmt;

use crate::constants::PhysicalConstants;
use crate::densities::{rasterize, Grid, GridGeometry, MassDensity};
use crate::error::{Error, Result};
use crate::profile::RadialProfile;
use crate::quad::NeumaierSum;
use crate::vec3::Vec3;

pub use closed_form::{ball_ball_energy, gaussian_gaussian_energy};
pub use grid::{grid_interaction_energy_fft, GridOptions};
pub use oracle::{interaction_energy_quadrature, QuadratureScheme, QuadratureSpec};
pub use pair::{pair_shift, pair_value, Kernel};

/// How an energy was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    /// One-dimensional radial Fourier integral, for pairs without a closed
    /// form (smoothed balls, unequal balls).
    SemiAnalytic,
    GridFFT,
    QuadratureOracle,
}

impl Method {
    pub fn combine(self, other: Method) -> Method {
        use Method::*;
        match (self, other) {
            (QuadratureOracle, _) | (_, QuadratureOracle) => QuadratureOracle,
            (GridFFT, _) | (_, GridFFT) => GridFFT,
            (SemiAnalytic, _) | (_, SemiAnalytic) => SemiAnalytic,
            _ => ClosedForm,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::ClosedForm => "ClosedForm",
            Method::SemiAnalytic => "SemiAnalytic",
            Method::GridFFT => "GridFFT",
            Method::QuadratureOracle => "QuadratureOracle",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyResult {
    /// Joules.
    pub value: f64,
    pub method: Method,
    /// Joules, >= 0.
    pub error_estimate: f64,
}

/// Relative accuracy claimed for the semi-analytic spectral integrals.
pub(crate) const SEMI_ANALYTIC_REL: f64 = 1e-9;

/// Energy of two densities. Analytic pairs are summed constituent by
/// constituent; grids go through [`grid_interaction_energy_fft`].
pub fn interaction_energy(
    f: &MassDensity,
    g: &MassDensity,
    consts: &PhysicalConstants,
) -> Result<EnergyResult> {
    f.validate()?;
    g.validate()?;
    consts.validate()?;
    if f.is_grid() || g.is_grid() {
        let (fg, gg) = common_grids(f, g)?;
        return grid_interaction_energy_fft(&fg, &gg, consts);
    }
    let mut a = f.components().expect("analytic");
    let mut b = g.components().expect("analytic");
    // sum in a canonical order so that swapping the arguments is exact
    if canonical_cmp(&a, &b) == Ordering::Greater {
        std::mem::swap(&mut a, &mut b);
    }
    pair_sum(&a, &b, consts)
}

fn pair_sum(
    a: &[(RadialProfile, Vec3)],
    b: &[(RadialProfile, Vec3)],
    consts: &PhysicalConstants,
) -> Result<EnergyResult> {
    let mut acc = NeumaierSum::default();
    let mut abs = 0.0;
    let mut method = Method::ClosedForm;
    for (pa, ca) in a {
        for (pb, cb) in b {
            let r = (*ca - *cb).norm();
            let (v, m) = pair_value(Kernel::Newton, pa, pb, r, consts)?;
            acc.add(v);
            abs += v.abs();
            method = method.combine(m);
        }
    }
    let rel = if method == Method::ClosedForm {
        4.0 * f64::EPSILON
    } else {
        SEMI_ANALYTIC_REL
    };
    Ok(EnergyResult {
        value: acc.sum(),
        method,
        error_estimate: rel * abs,
    })
}

fn canonical_cmp(a: &[(RadialProfile, Vec3)], b: &[(RadialProfile, Vec3)]) -> Ordering {
    let key = |v: &[(RadialProfile, Vec3)]| -> Vec<u64> {
        let mut k = vec![v.len() as u64];
        for (p, c) in v {
            k.extend([p.mass, p.radius, p.smear, c.0[0], c.0[1], c.0[2]].map(f64::to_bits));
        }
        k
    };
    key(a).cmp(&key(b))
}

/// Default resolution used when an analytic density meets a grid.
pub const DEFAULT_GRID_DIM: usize = 128;

/// Put both densities on one grid geometry.
pub fn common_grids(f: &MassDensity, g: &MassDensity) -> Result<(Grid, Grid)> {
    match (f, g) {
        (MassDensity::Grid(a), MassDensity::Grid(b)) => {
            if a.geometry() == b.geometry() {
                return Ok((a.clone(), b.clone()));
            }
            let geom = union_geometry(a, b)?;
            Ok((
                rasterize(f, geom.origin, geom.voxel_edge, geom.dims)?.grid,
                rasterize(g, geom.origin, geom.voxel_edge, geom.dims)?.grid,
            ))
        }
        (MassDensity::Grid(a), other) | (other, MassDensity::Grid(a)) => {
            let (lo, hi) = other.bounding_box()?;
            let h = a.voxel_edge;
            let geom = grow_to_cover(a.geometry(), lo, hi, h);
            let ga = rasterize(&MassDensity::Grid(a.clone()), geom.origin, h, geom.dims)?.grid;
            let go = rasterize(other, geom.origin, h, geom.dims)?.grid;
            if f.is_grid() {
                Ok((ga, go))
            } else {
                Ok((go, ga))
            }
        }
        _ => {
            let geom = GridGeometry::enclosing(&[f, g], DEFAULT_GRID_DIM, 0.0)?;
            Ok((
                rasterize(f, geom.origin, geom.voxel_edge, geom.dims)?.grid,
                rasterize(g, geom.origin, geom.voxel_edge, geom.dims)?.grid,
            ))
        }
    }
}

fn union_geometry(a: &Grid, b: &Grid) -> Result<GridGeometry> {
    let h = a.voxel_edge;
    if (b.voxel_edge - h).abs() > 1e-12 * h {
        return Err(Error::RegridRequired(format!(
            "voxel edges differ: {:e} vs {:e}",
            a.voxel_edge, b.voxel_edge
        )));
    }
    let (lo, hi) = MassDensity::Grid(b.clone()).bounding_box()?;
    Ok(grow_to_cover(a.geometry(), lo, hi, h))
}

/// Extend `geom` by whole voxels until it covers `[lo, hi]`, keeping a
/// cubic power-of-two shape.
fn grow_to_cover(geom: GridGeometry, lo: Vec3, hi: Vec3, h: f64) -> GridGeometry {
    let mut below = [0usize; 3];
    let mut n = 0usize;
    for ax in 0..3 {
        let b = ((geom.origin.0[ax] - lo.0[ax]) / h - 1e-9).ceil().max(0.0) as usize;
        let top = geom.origin.0[ax] + geom.dims[ax] as f64 * h;
        let a = ((hi.0[ax] - top) / h - 1e-9).ceil().max(0.0) as usize;
        below[ax] = b;
        n = n.max(geom.dims[ax] + a + b);
    }
    let n = n.next_power_of_two();
    GridGeometry {
        origin: geom.origin
            - Vec3::new(
                below[0] as f64 * h,
                below[1] as f64 * h,
                below[2] as f64 * h,
            ),
        voxel_edge: h,
        dims: [n; 3],
    }
}
