//! Mass densities, coarse-graining and rasterization.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::profile::RadialProfile;
use crate::vec3::Vec3;

/// Smearing kernel of a resolution cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelProfile {
    Gaussian,
    UniformBall,
}

/// Spatial resolution `sigma` of the mass density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub sigma: f64,
    pub profile: KernelProfile,
}

impl Resolution {
    pub fn new(sigma: f64, profile: KernelProfile) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "resolution sigma must be > 0, got {sigma}"
            )));
        }
        Ok(Resolution { sigma, profile })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(sigma, KernelProfile::Gaussian)
    }

    pub fn uniform_ball(sigma: f64) -> Result<Self> {
        Self::new(sigma, KernelProfile::UniformBall)
    }
}

/// Shape of a single nucleus in a granular lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NucleusProfile {
    UniformBall {
        radius: f64,
    },
    /// `width == 0` is a point nucleus.
    GaussianBlob {
        width: f64,
    },
    SmoothedBall {
        radius: f64,
        smear: f64,
    },
}

impl NucleusProfile {
    pub fn radial(&self, mass: f64) -> RadialProfile {
        match *self {
            NucleusProfile::UniformBall { radius } => RadialProfile::ball(mass, radius),
            NucleusProfile::GaussianBlob { width } => RadialProfile::blob(mass, width),
            NucleusProfile::SmoothedBall { radius, smear } => {
                RadialProfile::smoothed_ball(mass, radius, smear)
            }
        }
    }

    fn from_radial(p: &RadialProfile) -> Self {
        match (p.radius > 0.0, p.smear > 0.0) {
            (true, false) => NucleusProfile::UniformBall { radius: p.radius },
            (true, true) => NucleusProfile::SmoothedBall {
                radius: p.radius,
                smear: p.smear,
            },
            (false, _) => NucleusProfile::GaussianBlob { width: p.smear },
        }
    }

    /// Characteristic size `sigma_nuc` (ball radius or blob width).
    pub fn size(&self) -> f64 {
        match *self {
            NucleusProfile::UniformBall { radius } => radius,
            NucleusProfile::GaussianBlob { width } => width,
            NucleusProfile::SmoothedBall { radius, smear } => radius.max(smear),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NucleusProfile::UniformBall { radius } => radius > 0.0 && radius.is_finite(),
            NucleusProfile::GaussianBlob { width } => width >= 0.0 && width.is_finite(),
            NucleusProfile::SmoothedBall { radius, smear } => {
                radius > 0.0 && smear > 0.0 && radius.is_finite() && smear.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid nucleus profile {self:?}"
            )))
        }
    }
}

/// Identical nuclei at lattice sites, displaced rigidly by `com_offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct GranularLattice {
    pub sites: Vec<Vec3>,
    pub nucleus_mass: f64,
    pub profile: NucleusProfile,
    pub com_offset: Vec3,
}

impl GranularLattice {
    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.sites.iter().map(move |s| *s + self.com_offset)
    }

    pub fn nucleus(&self) -> RadialProfile {
        self.profile.radial(self.nucleus_mass)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::DegenerateGeometry("lattice has no sites".into()));
        }
        if !(self.nucleus_mass > 0.0 && self.nucleus_mass.is_finite()) {
            return Err(Error::InvalidParameter("nucleus mass must be > 0".into()));
        }
        self.profile.validate()?;
        if !self.sites.iter().all(|s| s.is_finite()) || !self.com_offset.is_finite() {
            return Err(Error::InvalidParameter(
                "non-finite lattice coordinates".into(),
            ));
        }
        Ok(())
    }
}

/// Placement of a cubic-voxel grid. `origin` is the outer corner of voxel
/// (0, 0, 0); voxel centers sit at `origin + (i + 1/2) * voxel_edge`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub origin: Vec3,
    pub voxel_edge: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume(&self) -> f64 {
        self.voxel_edge.powi(3)
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.voxel_edge;
        self.origin
            + Vec3::new(
                (i as f64 + 0.5) * h,
                (j as f64 + 0.5) * h,
                (k as f64 + 0.5) * h,
            )
    }

    /// Smallest cubic `n^3` grid enclosing all `densities` with their mass
    /// tails, plus `margin` on every side.
    pub fn enclosing(densities: &[&MassDensity], n: usize, margin: f64) -> Result<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for d in densities {
            let (a, b) = d.bounding_box()?;
            for ax in 0..3 {
                lo[ax] = lo[ax].min(a.0[ax] - margin);
                hi[ax] = hi[ax].max(b.0[ax] + margin);
            }
        }
        let side = (0..3).map(|ax| hi[ax] - lo[ax]).fold(0.0, f64::max);
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::DegenerateGeometry("zero-size bounding box".into()));
        }
        let edge = side / n as f64;
        let mid = Vec3::new(
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        );
        Ok(GridGeometry {
            origin: mid - Vec3::new(side, side, side) * 0.5,
            voxel_edge: edge,
            dims: [n; 3],
        })
    }
}

/// Voxel grid of cell-averaged densities, kg/m^3, x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub origin: Vec3,
    pub voxel_edge: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(origin: Vec3, voxel_edge: f64, dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let g = Grid {
            origin,
            voxel_edge,
            dims,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn zeros(geom: GridGeometry) -> Self {
        Grid {
            origin: geom.origin,
            voxel_edge: geom.voxel_edge,
            dims: geom.dims,
            values: vec![0.0; geom.len()],
        }
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            origin: self.origin,
            voxel_edge: self.voxel_edge,
            dims: self.dims,
        }
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.voxel_edge.powi(3)
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.voxel_volume()
    }

    pub fn is_pow2_cube(&self) -> bool {
        self.dims[0] == self.dims[1]
            && self.dims[1] == self.dims[2]
            && self.dims[0].is_power_of_two()
    }

    /// 2x2x2 block average; halves the dims and doubles the voxel edge.
    pub fn coarsened(&self) -> Result<Grid> {
        if self.dims.iter().any(|d| d % 2 != 0 || *d < 2) {
            return Err(Error::InvalidParameter(format!(
                "cannot coarsen grid with dims {:?}",
                self.dims
            )));
        }
        let nd = [self.dims[0] / 2, self.dims[1] / 2, self.dims[2] / 2];
        let mut out = vec![0.0; nd[0] * nd[1] * nd[2]];
        for k in 0..nd[2] {
            for j in 0..nd[1] {
                for i in 0..nd[0] {
                    let mut s = 0.0;
                    for dk in 0..2 {
                        for dj in 0..2 {
                            for di in 0..2 {
                                s += self.values[self.index(2 * i + di, 2 * j + dj, 2 * k + dk)];
                            }
                        }
                    }
                    out[i + nd[0] * (j + nd[1] * k)] = s / 8.0;
                }
            }
        }
        Ok(Grid {
            origin: self.origin,
            voxel_edge: 2.0 * self.voxel_edge,
            dims: nd,
            values: out,
        })
    }

    /// Copy into a larger grid with the same voxel edge, placing voxel
    /// (0,0,0) at integer `offset`.
    pub fn embedded(&self, dims: [usize; 3], offset: [usize; 3]) -> Grid {
        let mut out = vec![0.0; dims[0] * dims[1] * dims[2]];
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                let src = self.index(0, j, k);
                let dst = offset[0] + dims[0] * (j + offset[1] + dims[1] * (k + offset[2]));
                out[dst..dst + self.dims[0]].copy_from_slice(&self.values[src..src + self.dims[0]]);
            }
        }
        let h = self.voxel_edge;
        Grid {
            origin: self.origin
                - Vec3::new(
                    offset[0] as f64 * h,
                    offset[1] as f64 * h,
                    offset[2] as f64 * h,
                ),
            voxel_edge: h,
            dims,
            values: out,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::DegenerateGeometry(
                "grid has a zero dimension".into(),
            ));
        }
        if !(self.voxel_edge > 0.0 && self.voxel_edge.is_finite()) {
            return Err(Error::InvalidParameter("voxel edge must be > 0".into()));
        }
        if self.values.len() != self.dims.iter().product::<usize>() {
            return Err(Error::InvalidParameter(format!(
                "grid has {} values for dims {:?}",
                self.values.len(),
                self.dims
            )));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "grid values must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// A mass density `f(r)`.
#[derive(Clone, Debug, PartialEq)]
pub enum MassDensity {
    UniformBall {
        mass: f64,
        radius: f64,
        center: Vec3,
    },
    /// `width == 0` is a point mass.
    GaussianBlob {
        mass: f64,
        width: f64,
        center: Vec3,
    },
    /// Uniform ball convolved with a Gaussian of per-axis width `smear`;
    /// the Gaussian coarse-graining of a `UniformBall`.
    SmoothedBall {
        mass: f64,
        radius: f64,
        smear: f64,
        center: Vec3,
    },
    GranularLattice(GranularLattice),
    Grid(Grid),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be > 0, got {v}"
        )))
    }
}

impl MassDensity {
    pub fn uniform_ball(mass: f64, radius: f64, center: Vec3) -> Result<Self> {
        let d = MassDensity::UniformBall {
            mass,
            radius,
            center,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian_blob(mass: f64, width: f64, center: Vec3) -> Result<Self> {
        let d = MassDensity::GaussianBlob {
            mass,
            width,
            center,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn smoothed_ball(mass: f64, radius: f64, smear: f64, center: Vec3) -> Result<Self> {
        let d = MassDensity::SmoothedBall {
            mass,
            radius,
            smear,
            center,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn lattice(lattice: GranularLattice) -> Result<Self> {
        lattice.validate()?;
        Ok(MassDensity::GranularLattice(lattice))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MassDensity::UniformBall {
                mass,
                radius,
                center,
            } => {
                positive("mass", *mass)?;
                positive("radius", *radius)?;
                finite_center(center)
            }
            MassDensity::GaussianBlob {
                mass,
                width,
                center,
            } => {
                positive("mass", *mass)?;
                if !(*width >= 0.0 && width.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "width must be >= 0, got {width}"
                    )));
                }
                finite_center(center)
            }
            MassDensity::SmoothedBall {
                mass,
                radius,
                smear,
                center,
            } => {
                positive("mass", *mass)?;
                positive("radius", *radius)?;
                positive("smear", *smear)?;
                finite_center(center)
            }
            MassDensity::GranularLattice(l) => l.validate(),
            MassDensity::Grid(g) => g.validate(),
        }
    }

    /// Radial profile and center, for the single-body analytic variants.
    pub fn as_radial(&self) -> Option<(RadialProfile, Vec3)> {
        match *self {
            MassDensity::UniformBall {
                mass,
                radius,
                center,
            } => Some((RadialProfile::ball(mass, radius), center)),
            MassDensity::GaussianBlob {
                mass,
                width,
                center,
            } => Some((RadialProfile::blob(mass, width), center)),
            MassDensity::SmoothedBall {
                mass,
                radius,
                smear,
                center,
            } => Some((RadialProfile::smoothed_ball(mass, radius, smear), center)),
            _ => None,
        }
    }

    /// All analytic constituents as (profile, center); `None` for grids.
    pub fn components(&self) -> Option<Vec<(RadialProfile, Vec3)>> {
        if let Some(c) = self.as_radial() {
            return Some(vec![c]);
        }
        match self {
            MassDensity::GranularLattice(l) => {
                let p = l.nucleus();
                Some(l.positions().map(|x| (p, x)).collect())
            }
            _ => None,
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, MassDensity::Grid(_))
    }

    pub fn total_mass(&self) -> f64 {
        total_mass(self)
    }

    /// Rigid translation by `v`.
    pub fn translated(&self, v: Vec3) -> MassDensity {
        let mut out = self.clone();
        match &mut out {
            MassDensity::UniformBall { center, .. }
            | MassDensity::GaussianBlob { center, .. }
            | MassDensity::SmoothedBall { center, .. } => *center += v,
            MassDensity::GranularLattice(l) => l.com_offset += v,
            MassDensity::Grid(g) => g.origin += v,
        }
        out
    }

    /// Multiply every mass (or grid value) by `factor`.
    pub fn mass_scaled(&self, factor: f64) -> MassDensity {
        let mut out = self.clone();
        match &mut out {
            MassDensity::UniformBall { mass, .. }
            | MassDensity::GaussianBlob { mass, .. }
            | MassDensity::SmoothedBall { mass, .. } => *mass *= factor,
            MassDensity::GranularLattice(l) => l.nucleus_mass *= factor,
            MassDensity::Grid(g) => g.values.iter_mut().for_each(|v| *v *= factor),
        }
        out
    }

    /// Axis-aligned box holding > 99.9% of the mass.
    pub fn bounding_box(&self) -> Result<(Vec3, Vec3)> {
        match self {
            MassDensity::Grid(g) => {
                let h = g.voxel_edge;
                let ext = Vec3::new(
                    g.dims[0] as f64 * h,
                    g.dims[1] as f64 * h,
                    g.dims[2] as f64 * h,
                );
                Ok((g.origin, g.origin + ext))
            }
            _ => {
                let comps = self.components().unwrap_or_default();
                if comps.is_empty() {
                    return Err(Error::DegenerateGeometry(
                        "density has no constituents".into(),
                    ));
                }
                let mut lo = Vec3([f64::INFINITY; 3]);
                let mut hi = Vec3([f64::NEG_INFINITY; 3]);
                for (p, c) in comps {
                    let e = p.coverage_extent();
                    for ax in 0..3 {
                        lo.0[ax] = lo.0[ax].min(c.0[ax] - e);
                        hi.0[ax] = hi.0[ax].max(c.0[ax] + e);
                    }
                }
                Ok((lo, hi))
            }
        }
    }
}

fn finite_center(c: &Vec3) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("non-finite center".into()))
    }
}

/// Total mass, exact for the analytic variants.
pub fn total_mass(f: &MassDensity) -> f64 {
    match f {
        MassDensity::UniformBall { mass, .. }
        | MassDensity::GaussianBlob { mass, .. }
        | MassDensity::SmoothedBall { mass, .. } => *mass,
        MassDensity::GranularLattice(l) => l.nucleus_mass * l.sites.len() as f64,
        MassDensity::Grid(g) => g.total_mass(),
    }
}

/// Cubic lattice of `dims` nuclei with spacing `a`, centered at the origin.
pub fn granular_from_lattice(
    a: f64,
    dims: [usize; 3],
    nucleus_mass: f64,
    profile: NucleusProfile,
) -> Result<MassDensity> {
    positive("lattice constant", a)?;
    profile.validate()?;
    if dims.contains(&0) {
        return Err(Error::DegenerateGeometry(
            "lattice dims must be positive".into(),
        ));
    }
    let size = profile.size();
    if a <= 2.0 * size {
        return Err(Error::OverlappingNuclei {
            lattice_constant: a,
            nucleus_size: size,
        });
    }
    let offset = |n: usize, i: usize| (i as f64 - 0.5 * (n as f64 - 1.0)) * a;
    let mut sites = Vec::with_capacity(dims.iter().product());
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                sites.push(Vec3::new(
                    offset(dims[0], i),
                    offset(dims[1], j),
                    offset(dims[2], k),
                ));
            }
        }
    }
    MassDensity::lattice(GranularLattice {
        sites,
        nucleus_mass,
        profile,
        com_offset: Vec3::ZERO,
    })
}

/// Largest grid (per axis) produced by automatic rasterization.
pub const MAX_AUTO_DIM: usize = 256;

/// Convolve `f` with the unit-mass kernel of `res`.
///
/// Gaussian smearing keeps closed forms for the analytic variants; the
/// uniform-ball kernel is applied on a grid except for point masses, where
/// it is exact.
pub fn coarse_grain(f: &MassDensity, res: &Resolution) -> Result<MassDensity> {
    f.validate()?;
    let sigma = res.sigma;
    match res.profile {
        KernelProfile::Gaussian => match f {
            MassDensity::Grid(g) => Ok(MassDensity::Grid(gaussian_smooth_grid(g, sigma)?)),
            MassDensity::GranularLattice(l) => {
                let p = l.nucleus().smeared(sigma);
                Ok(MassDensity::GranularLattice(GranularLattice {
                    profile: NucleusProfile::from_radial(&p),
                    ..l.clone()
                }))
            }
            _ => {
                let (p, c) = f.as_radial().expect("analytic variant");
                Ok(from_radial(p.smeared(sigma), c))
            }
        },
        KernelProfile::UniformBall => match f {
            MassDensity::GaussianBlob {
                mass,
                width,
                center,
            } if *width == 0.0 => MassDensity::uniform_ball(*mass, sigma, *center),
            MassDensity::GranularLattice(l)
                if l.profile == NucleusProfile::GaussianBlob { width: 0.0 } =>
            {
                Ok(MassDensity::GranularLattice(GranularLattice {
                    profile: NucleusProfile::UniformBall { radius: sigma },
                    ..l.clone()
                }))
            }
            MassDensity::Grid(g) => Ok(MassDensity::Grid(ball_smooth_grid(g, sigma)?)),
            _ => {
                let geom = auto_geometry(f, sigma)?;
                let r = rasterize(f, geom.origin, geom.voxel_edge, geom.dims)?;
                Ok(MassDensity::Grid(ball_smooth_grid(&r.grid, sigma)?))
            }
        },
    }
}

fn from_radial(p: RadialProfile, center: Vec3) -> MassDensity {
    match (p.radius > 0.0, p.smear > 0.0) {
        (true, false) => MassDensity::UniformBall {
            mass: p.mass,
            radius: p.radius,
            center,
        },
        (true, true) => MassDensity::SmoothedBall {
            mass: p.mass,
            radius: p.radius,
            smear: p.smear,
            center,
        },
        (false, _) => MassDensity::GaussianBlob {
            mass: p.mass,
            width: p.smear,
            center,
        },
    }
}

/// Power-of-two cubic grid with voxel edge <= sigma/2 covering all of
/// `densities` plus a margin of `sigma`.
pub fn sampling_geometry(densities: &[&MassDensity], sigma: f64) -> Result<GridGeometry> {
    let mut lo = Vec3([f64::INFINITY; 3]);
    let mut hi = Vec3([f64::NEG_INFINITY; 3]);
    for d in densities {
        let (a, b) = d.bounding_box()?;
        for ax in 0..3 {
            lo.0[ax] = lo.0[ax].min(a.0[ax]);
            hi.0[ax] = hi.0[ax].max(b.0[ax]);
        }
    }
    let side = (0..3).map(|ax| hi.0[ax] - lo.0[ax]).fold(0.0, f64::max) + 2.0 * sigma;
    let need = (side / (0.5 * sigma)).ceil() as usize;
    let n = need.max(8).next_power_of_two();
    if n > MAX_AUTO_DIM {
        return Err(Error::MemoryBound {
            required_bytes: n * n * n * 8,
            limit_bytes: MAX_AUTO_DIM.pow(3) * 8,
        });
    }
    let edge = side / n as f64;
    let mid = (lo + hi) * 0.5;
    Ok(GridGeometry {
        origin: mid - Vec3::new(side, side, side) * 0.5,
        voxel_edge: edge,
        dims: [n; 3],
    })
}

fn auto_geometry(f: &MassDensity, sigma: f64) -> Result<GridGeometry> {
    sampling_geometry(&[f], sigma)
}

/// Convolve a grid with the kernel of `res`. The result is re-embedded in
/// a larger power-of-two cube that holds the spread mass.
pub fn smooth_grid(g: &Grid, res: &Resolution) -> Result<Grid> {
    match res.profile {
        KernelProfile::Gaussian => gaussian_smooth_grid(g, res.sigma),
        KernelProfile::UniformBall => ball_smooth_grid(g, res.sigma),
    }
}

/// Output of [`rasterize`].
#[derive(Clone, Debug)]
pub struct Rasterized {
    pub grid: Grid,
    /// Voxel mass over analytic mass.
    pub captured_fraction: f64,
}

impl Rasterized {
    pub fn mass_error(&self) -> f64 {
        (self.captured_fraction - 1.0).abs()
    }

    pub fn into_density(self) -> MassDensity {
        MassDensity::Grid(self.grid)
    }
}

/// Sample `f` onto a grid as cell-averaged densities.
pub fn rasterize(
    f: &MassDensity,
    origin: Vec3,
    voxel_edge: f64,
    dims: [usize; 3],
) -> Result<Rasterized> {
    positive("voxel edge", voxel_edge)?;
    if dims.contains(&0) {
        return Err(Error::DegenerateGeometry(
            "grid dims must be positive".into(),
        ));
    }
    if let MassDensity::GranularLattice(l) = f {
        if l.sites.is_empty() {
            return Err(Error::DegenerateGeometry("lattice has no sites".into()));
        }
    }
    f.validate()?;
    let geom = GridGeometry {
        origin,
        voxel_edge,
        dims,
    };
    let grid = match f {
        MassDensity::Grid(g) => resample_grid(g, geom)?,
        _ => {
            let mut grid = Grid::zeros(geom);
            for (p, c) in f.components().expect("analytic") {
                add_profile(&mut grid, &p, c);
            }
            grid
        }
    };
    let total = total_mass(f);
    let captured = grid.total_mass() / total;
    if captured < 0.999 {
        return Err(Error::BoxTooSmall {
            captured_fraction: captured,
        });
    }
    Ok(Rasterized {
        grid,
        captured_fraction: captured,
    })
}

fn resample_grid(g: &Grid, geom: GridGeometry) -> Result<Grid> {
    let h = geom.voxel_edge;
    if (g.voxel_edge - h).abs() > 1e-12 * h {
        return Err(Error::RegridRequired(format!(
            "voxel edges differ: {:e} vs {:e}",
            g.voxel_edge, h
        )));
    }
    let mut off = [0i64; 3];
    for ax in 0..3 {
        let s = (g.origin.0[ax] - geom.origin.0[ax]) / h;
        let r = s.round();
        if (s - r).abs() > 1e-6 {
            return Err(Error::RegridRequired(
                "origins differ by a fractional voxel".into(),
            ));
        }
        off[ax] = r as i64;
    }
    let mut out = Grid::zeros(geom);
    for k in 0..g.dims[2] {
        let tk = k as i64 + off[2];
        if tk < 0 || tk >= geom.dims[2] as i64 {
            continue;
        }
        for j in 0..g.dims[1] {
            let tj = j as i64 + off[1];
            if tj < 0 || tj >= geom.dims[1] as i64 {
                continue;
            }
            for i in 0..g.dims[0] {
                let ti = i as i64 + off[0];
                if ti < 0 || ti >= geom.dims[0] as i64 {
                    continue;
                }
                let dst = out.index(ti as usize, tj as usize, tk as usize);
                out.values[dst] = g.values[g.index(i, j, k)];
            }
        }
    }
    Ok(out)
}

fn std_normal_cdf_diff(a: f64, b: f64) -> f64 {
    // P(a < Z < b) for a standard normal, accurate in both tails
    let (x, y) = (a / SQRT_2, b / SQRT_2);
    if x > 0.0 {
        0.5 * (libm::erfc(x) - libm::erfc(y))
    } else if y < 0.0 {
        0.5 * (libm::erfc(-y) - libm::erfc(-x))
    } else {
        0.5 * (libm::erf(y) - libm::erf(x))
    }
}

/// Index range of voxels along `ax` touching `[lo, hi]`.
fn axis_range(geom: &GridGeometry, ax: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
    let h = geom.voxel_edge;
    let a = ((lo - geom.origin.0[ax]) / h).floor();
    let b = ((hi - geom.origin.0[ax]) / h).ceil();
    let n = geom.dims[ax] as f64;
    let a = a.max(0.0);
    let b = b.min(n);
    if b <= a {
        None
    } else {
        Some((a as usize, b as usize))
    }
}

/// Accumulate the cell averages of one profile into `grid`.
fn add_profile(grid: &mut Grid, p: &RadialProfile, c: Vec3) {
    let geom = grid.geometry();
    let h = geom.voxel_edge;
    // a smear below the voxel edge barely changes cell averages
    let sharpened;
    let p = if p.radius > 0.0 && p.smear > 0.0 && p.smear < 0.5 * h {
        sharpened = RadialProfile::ball(p.mass, p.radius);
        &sharpened
    } else {
        p
    };
    let ext = if p.smear > 0.0 { p.extent() } else { p.radius };
    let mut ranges = [(0usize, 0usize); 3];
    for ax in 0..3 {
        match axis_range(&geom, ax, c.0[ax] - ext, c.0[ax] + ext) {
            Some(r) => ranges[ax] = r,
            None => {
                if p.radius == 0.0 && p.smear == 0.0 {
                    // a point mass still lands in exactly one voxel if inside
                    break;
                }
                return;
            }
        }
    }
    let volume = geom.voxel_volume();

    if p.radius == 0.0 && p.smear == 0.0 {
        let mut idx = [0usize; 3];
        for ax in 0..3 {
            let s = ((c.0[ax] - geom.origin.0[ax]) / h).floor();
            if s < 0.0 || s >= geom.dims[ax] as f64 {
                return;
            }
            idx[ax] = s as usize;
        }
        let i = grid.index(idx[0], idx[1], idx[2]);
        grid.values[i] += p.mass / volume;
        return;
    }

    if p.radius == 0.0 {
        // separable exact cell integrals of a Gaussian
        let w = p.smear;
        let weights: Vec<Vec<f64>> = (0..3)
            .map(|ax| {
                let (a, b) = ranges[ax];
                (a..b)
                    .map(|i| {
                        let lo = geom.origin.0[ax] + i as f64 * h - c.0[ax];
                        std_normal_cdf_diff(lo / w, (lo + h) / w)
                    })
                    .collect()
            })
            .collect();
        let scale = p.mass / volume;
        for (kk, wz) in weights[2].iter().enumerate() {
            for (jj, wy) in weights[1].iter().enumerate() {
                let row = grid.index(ranges[0].0, ranges[1].0 + jj, ranges[2].0 + kk);
                for (ii, wx) in weights[0].iter().enumerate() {
                    grid.values[row + ii] += scale * wx * wy * wz;
                }
            }
        }
        return;
    }

    // balls and smoothed balls: adaptive subdivision of boundary cells
    let (i0, i1) = ranges[0];
    let (j0, j1) = ranges[1];
    let (k0, k1) = ranges[2];
    let nx = i1 - i0;
    let ny = j1 - j0;
    let cells: Vec<f64> = (k0..k1)
        .into_par_iter()
        .flat_map_iter(|k| {
            let geom = &geom;
            (j0..j1).flat_map(move |j| {
                (i0..i1).map(move |i| {
                    let lo = geom.origin + Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h);
                    cell_average(p, c, lo, h, 0)
                })
            })
        })
        .collect();
    for (n, v) in cells.into_iter().enumerate() {
        if v != 0.0 {
            let i = n % nx;
            let j = (n / nx) % ny;
            let k = n / (nx * ny);
            let idx = grid.index(i0 + i, j0 + j, k0 + k);
            grid.values[idx] += v;
        }
    }
}

const MAX_DEPTH: u32 = 3;

/// Average density of profile `p` (centered at `c`) over the cube
/// `[lo, lo + h]^3`.
fn cell_average(p: &RadialProfile, c: Vec3, lo: Vec3, h: f64, depth: u32) -> f64 {
    let rel = lo - c;
    let mut near2 = 0.0;
    let mut far2 = 0.0;
    for ax in 0..3 {
        let a = rel.0[ax];
        let b = a + h;
        let n = if a > 0.0 {
            a
        } else if b < 0.0 {
            -b
        } else {
            0.0
        };
        let f = a.abs().max(b.abs());
        near2 += n * n;
        far2 += f * f;
    }
    let (near, far) = (near2.sqrt(), far2.sqrt());
    let (inner, outer) = if p.smear > 0.0 {
        (p.radius - 6.0 * p.smear, p.radius + 6.0 * p.smear)
    } else {
        (p.radius, p.radius)
    };
    if near >= outer {
        return 0.0;
    }
    if far <= inner {
        if p.smear == 0.0 {
            return p.core_density();
        }
        let mid = rel + Vec3::new(0.5 * h, 0.5 * h, 0.5 * h);
        return p.density(mid.norm());
    }
    if depth >= MAX_DEPTH || h <= p.smear {
        // 2-point Gauss per axis
        let g = 0.5 / 3f64.sqrt();
        let mut s = 0.0;
        for dz in [0.5 - g, 0.5 + g] {
            for dy in [0.5 - g, 0.5 + g] {
                for dx in [0.5 - g, 0.5 + g] {
                    let x = rel + Vec3::new(dx * h, dy * h, dz * h);
                    s += p.density(x.norm());
                }
            }
        }
        return s / 8.0;
    }
    let hh = 0.5 * h;
    let mut s = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let sub = lo + Vec3::new(dx as f64 * hh, dy as f64 * hh, dz as f64 * hh);
                s += cell_average(p, c, sub, hh, depth + 1);
            }
        }
    }
    s / 8.0
}

/// Next power of two holding `n + 2 * pad` cells.
fn padded_pow2(n: usize, pad: usize) -> usize {
    (n + 2 * pad).next_power_of_two()
}

fn embed_centered(g: &Grid, pad: usize) -> Grid {
    let n = *g.dims.iter().max().unwrap();
    let m = padded_pow2(n, pad);
    let off = [
        (m - g.dims[0]) / 2,
        (m - g.dims[1]) / 2,
        (m - g.dims[2]) / 2,
    ];
    g.embedded([m; 3], off)
}

fn check_sampling(g: &Grid, sigma: f64) -> Result<()> {
    if g.voxel_edge > 0.5 * sigma {
        return Err(Error::ResolutionUndersampled {
            voxel_edge: g.voxel_edge,
            half_sigma: 0.5 * sigma,
        });
    }
    Ok(())
}

/// Separable convolution with a discrete, normalized Gaussian.
fn gaussian_smooth_grid(g: &Grid, sigma: f64) -> Result<Grid> {
    check_sampling(g, sigma)?;
    let h = g.voxel_edge;
    let pad = (6.0 * sigma / h).ceil() as usize;
    let mut out = embed_centered(g, pad);
    let mut w: Vec<f64> = (-(pad as i64)..=pad as i64)
        .map(|j| std_normal_cdf_diff((j as f64 - 0.5) * h / sigma, (j as f64 + 0.5) * h / sigma))
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    for ax in 0..3 {
        convolve_axis(&mut out, &w, ax);
    }
    Ok(out)
}

fn convolve_axis(g: &mut Grid, w: &[f64], ax: usize) {
    let n = g.dims[ax];
    let pad = (w.len() / 2) as i64;
    let stride = match ax {
        0 => 1,
        1 => g.dims[0],
        _ => g.dims[0] * g.dims[1],
    };
    let dims = g.dims;
    let src = g.values.clone();
    let mut line = vec![0.0; n];
    let starts: Vec<usize> = (0..dims[2])
        .flat_map(|k| (0..dims[1]).flat_map(move |j| (0..dims[0]).map(move |i| (i, j, k))))
        .filter(|(i, j, k)| match ax {
            0 => *i == 0,
            1 => *j == 0,
            _ => *k == 0,
        })
        .map(|(i, j, k)| i + dims[0] * (j + dims[1] * k))
        .collect();
    for s in starts {
        for (x, out) in line.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, wt) in w.iter().enumerate() {
                let y = x as i64 + t as i64 - pad;
                if y >= 0 && (y as usize) < n {
                    acc += wt * src[s + y as usize * stride];
                }
            }
            *out = acc;
        }
        for (x, v) in line.iter().enumerate() {
            g.values[s + x * stride] = *v;
        }
    }
}

/// Convolution with a discrete, normalized uniform-ball kernel.
fn ball_smooth_grid(g: &Grid, sigma: f64) -> Result<Grid> {
    check_sampling(g, sigma)?;
    let h = g.voxel_edge;
    let pad = (sigma / h).ceil() as usize + 1;
    let src = embed_centered(g, pad);
    // kernel cell weights: fraction of each cell inside the ball, 4^3 subsamples
    let p = RadialProfile::ball(1.0, sigma);
    let mut taps = Vec::new();
    let r = pad as i64;
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let lo = Vec3::new(
                    (dx as f64 - 0.5) * h,
                    (dy as f64 - 0.5) * h,
                    (dz as f64 - 0.5) * h,
                );
                let v = cell_average(&p, Vec3::ZERO, lo, h, 0);
                if v > 0.0 {
                    taps.push((dx, dy, dz, v));
                }
            }
        }
    }
    let total: f64 = taps.iter().map(|t| t.3).sum();
    let n = src.dims[0] as i64;
    let mut out = Grid::zeros(src.geometry());
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let src = &src;
            let taps = &taps;
            (0..n).flat_map(move |j| {
                (0..n).map(move |i| {
                    let mut acc = 0.0;
                    for &(dx, dy, dz, w) in taps {
                        let (x, y, z) = (i - dx, j - dy, k - dz);
                        if x >= 0 && y >= 0 && z >= 0 && x < n && y < n && z < n {
                            acc += w * src.values[(x + n * (y + n * z)) as usize];
                        }
                    }
                    acc / total
                })
            })
        })
        .collect();
    out.values = values;
    Ok(out)
}

/// Mass of a uniform ball expressed through its density, for tests and
/// reports.
pub fn ball_density(mass: f64, radius: f64) -> f64 {
    3.0 * mass / (4.0 * PI * radius.powi(3))
}
