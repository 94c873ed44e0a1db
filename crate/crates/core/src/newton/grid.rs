//! Grid energies by zero-padded FFT convolution with the 1/r kernel.
//!
//! Voxels are treated as uniform cubes. The kernel between two voxels at
//! integer offset `D` is the exact cube-cube integral of 1/r for `|D|inf <=
//! NEAR` and the point value `1/|D|` beyond, where the two agree to
//! O(|D|^-5). Padding to twice the grid size per axis removes periodic images.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use super::{EnergyResult, Method};
use crate::constants::PhysicalConstants;
use crate::densities::Grid;
use crate::error::{Error, Result};
use crate::fft3::Fft3;
use crate::quad::GaussLegendre;
use crate::vec3::Vec3;

/// Offsets up to this many voxels use exact cube-cube integrals.
const NEAR: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct GridOptions {
    pub memory_limit_bytes: usize,
    /// Also evaluate at half resolution to estimate the error.
    pub estimate_error: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            memory_limit_bytes: 2 << 30,
            estimate_error: true,
        }
    }
}

/// Bytes needed for one padded evaluation on an `n^3` grid.
pub fn required_bytes(n: usize) -> usize {
    let p = 2 * n;
    // packed transform + kernel spectrum + kernel workspace
    p * p * p * (16 + 8 + 16)
}

/// Antiderivative with d^3F/dx dy dz = 1/r.
fn prism_antiderivative(x: f64, y: f64, z: f64) -> f64 {
    let r = (x * x + y * y + z * z).sqrt();
    let log_term = |a: f64, b: f64, c: f64| {
        // a b ln(c + r), stable for c < 0
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        let l = if c >= 0.0 {
            (c + r).ln()
        } else {
            ((a * a + b * b) / (r - c)).ln()
        };
        a * b * l
    };
    let atan_term = |a: f64, b: f64, c: f64| {
        if a == 0.0 {
            0.0
        } else {
            0.5 * a * a * (b * c / (a * r)).atan()
        }
    };
    log_term(x, y, z) + log_term(y, z, x) + log_term(z, x, y)
        - atan_term(x, y, z)
        - atan_term(y, z, x)
        - atan_term(z, x, y)
}

/// Potential `int 1/|r - p| dr` of the unit-density cube `[-1/2, 1/2]^3`.
pub fn unit_cube_potential(p: Vec3) -> f64 {
    let mut s = 0.0;
    for (i, sx) in [(0.5, 1.0), (-0.5, -1.0)] {
        for (j, sy) in [(0.5, 1.0), (-0.5, -1.0)] {
            for (k, sz) in [(0.5, 1.0), (-0.5, -1.0)] {
                s += sx * sy * sz * prism_antiderivative(i - p.0[0], j - p.0[1], k - p.0[2]);
            }
        }
    }
    s
}

/// `int int 1/|r - s|` over two unit cubes whose centers differ by `d`.
pub fn cube_pair_integral(d: [usize; 3]) -> f64 {
    let gl = GaussLegendre::cached(16);
    let off = Vec3::new(d[0] as f64, d[1] as f64, d[2] as f64);
    gl.integrate(-0.5, 0.5, |z| {
        gl.integrate(-0.5, 0.5, |y| {
            gl.integrate(-0.5, 0.5, |x| unit_cube_potential(off + Vec3::new(x, y, z)))
        })
    })
}

fn near_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let m = NEAR + 1;
        let mut t = vec![0.0; m * m * m];
        for a in 0..m {
            for b in a..m {
                for c in b..m {
                    let v = cube_pair_integral([a, b, c]);
                    for [i, j, k] in [
                        [a, b, c],
                        [a, c, b],
                        [b, a, c],
                        [b, c, a],
                        [c, a, b],
                        [c, b, a],
                    ] {
                        t[i + m * (j + m * k)] = v;
                    }
                }
            }
        }
        t
    })
}

fn kernel_value(d: [usize; 3]) -> f64 {
    if d.iter().all(|x| *x <= NEAR) {
        let m = NEAR + 1;
        near_table()[d[0] + m * (d[1] + m * d[2])]
    } else {
        let (x, y, z) = (d[0] as f64, d[1] as f64, d[2] as f64);
        1.0 / (x * x + y * y + z * z).sqrt()
    }
}

/// Spectrum of the dimensionless kernel on a periodic `p^3` box.
fn kernel_spectrum(p: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().unwrap().get(&p) {
        return k.clone();
    }
    let wrap = |i: usize| if i <= p / 2 { i } else { p - i };
    let mut data: Vec<Complex64> = (0..p * p * p)
        .into_par_iter()
        .map(|idx| {
            let i = idx % p;
            let j = (idx / p) % p;
            let k = idx / (p * p);
            Complex64::new(kernel_value([wrap(i), wrap(j), wrap(k)]), 0.0)
        })
        .collect();
    Fft3::new(p).forward(&mut data, p);
    let spec: Arc<Vec<f64>> = Arc::new(data.into_iter().map(|c| c.re).collect());
    let mut guard = cache.lock().unwrap();
    // keep memory bounded: only the most recent few sizes
    if guard.len() > 3 {
        guard.clear();
    }
    guard.insert(p, spec.clone());
    spec
}

fn check_grid(g: &Grid) -> Result<usize> {
    let d = g.dims;
    if !d.iter().all(|x| x.is_power_of_two()) {
        return Err(Error::NonPowerOfTwo { dims: d });
    }
    Ok(*d.iter().max().unwrap())
}

fn cubic(g: &Grid, n: usize) -> Grid {
    if g.dims == [n; 3] {
        g.clone()
    } else {
        g.embedded([n; 3], [0; 3])
    }
}

/// Packed forward transform of `f + i g`, zero-padded to `(2n)^3`.
fn packed_transform(f: &[f64], g: &[f64], n: usize) -> (Vec<Complex64>, usize) {
    let p = 2 * n;
    let mut h = vec![Complex64::default(); p * p * p];
    for k in 0..n {
        for j in 0..n {
            let src = n * (j + n * k);
            let dst = p * (j + p * k);
            for i in 0..n {
                h[dst + i] = Complex64::new(f[src + i], g[src + i]);
            }
        }
    }
    Fft3::new(p).forward(&mut h, n);
    (h, p)
}

/// `sum_k W(k) Re(conj F(k) G(k))` from the packed transform, in a fixed
/// plane order.
fn spectral_inner(h: &[Complex64], w: &[f64], p: usize) -> f64 {
    let neg = |i: usize| (p - i) % p;
    let partial: Vec<f64> = (0..p)
        .into_par_iter()
        .map(|kz| {
            let mut s = 0.0;
            for ky in 0..p {
                for kx in 0..p {
                    let a = h[kx + p * (ky + p * kz)];
                    let b = h[neg(kx) + p * (neg(ky) + p * neg(kz))];
                    s += w[kx + p * (ky + p * kz)] * 0.5 * (a * b).im;
                }
            }
            s
        })
        .collect();
    partial.iter().sum()
}

/// `-G int int f g / |r - s|` for two grids on the same cubic geometry.
fn energy_same_geometry(
    f: &Grid,
    g: &Grid,
    consts: &PhysicalConstants,
    limit: usize,
) -> Result<f64> {
    let n = f.dims[0];
    let need = required_bytes(n);
    if need > limit {
        return Err(Error::MemoryBound {
            required_bytes: need,
            limit_bytes: limit,
        });
    }
    if f.values.iter().all(|v| *v == 0.0) || g.values.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let (h, p) = packed_transform(&f.values, &g.values, n);
    let w = kernel_spectrum(p);
    let s = spectral_inner(&h, &w, p);
    let edge = f.voxel_edge;
    Ok(-consts.g * edge.powi(5) * s / (p * p * p) as f64)
}

/// Grid energy with default options.
pub fn grid_interaction_energy_fft(
    f: &Grid,
    g: &Grid,
    consts: &PhysicalConstants,
) -> Result<EnergyResult> {
    grid_interaction_energy_fft_with(f, g, consts, &GridOptions::default())
}

pub fn grid_interaction_energy_fft_with(
    f: &Grid,
    g: &Grid,
    consts: &PhysicalConstants,
    opts: &GridOptions,
) -> Result<EnergyResult> {
    let nf = check_grid(f)?;
    let ng = check_grid(g)?;
    if f.geometry() != g.geometry() {
        if (f.voxel_edge - g.voxel_edge).abs() > 1e-12 * f.voxel_edge {
            return Err(Error::RegridRequired(
                "grids have different voxel edges".into(),
            ));
        }
        return Err(Error::RegridRequired(
            "grids have different placements".into(),
        ));
    }
    let n = nf.max(ng);
    let (f, g) = (cubic(f, n), cubic(g, n));
    let value = energy_same_geometry(&f, &g, consts, opts.memory_limit_bytes)?;
    let error_estimate = if !opts.estimate_error || value == 0.0 {
        0.0
    } else if n >= 4 {
        let coarse = energy_same_geometry(
            &f.coarsened()?,
            &g.coarsened()?,
            consts,
            opts.memory_limit_bytes,
        )?;
        (value - coarse).abs()
    } else {
        value.abs()
    };
    Ok(EnergyResult {
        value,
        method: Method::GridFFT,
        error_estimate,
    })
}

/// `G int int D D / |r - s|` for `D = f - g` on a common grid, with the
/// half-resolution error estimate.
pub fn grid_catness(
    f: &Grid,
    g: &Grid,
    consts: &PhysicalConstants,
    opts: &GridOptions,
) -> Result<(f64, f64)> {
    if f.geometry() != g.geometry() {
        return Err(Error::RegridRequired("catness needs a common grid".into()));
    }
    let n = check_grid(f)?;
    let diff = |a: &Grid, b: &Grid| Grid {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
        ..a.clone()
    };
    let (f, g) = (cubic(f, n), cubic(g, n));
    let d = diff(&f, &g);
    let self_energy = |d: &Grid| -> Result<f64> {
        energy_same_geometry(d, d, consts, opts.memory_limit_bytes).map(|u| (-u).max(0.0))
    };
    let value = self_energy(&d)?;
    let err = if opts.estimate_error && n >= 4 && value > 0.0 {
        let dc = diff(&f.coarsened()?, &g.coarsened()?);
        (value - self_energy(&dc)?).abs()
    } else {
        0.0
    };
    Ok((value, err))
}

/// `int (f - g)^2` over a common grid.
pub fn grid_overlap_distance(f: &Grid, g: &Grid) -> Result<f64> {
    if f.geometry() != g.geometry() {
        return Err(Error::RegridRequired("overlap needs a common grid".into()));
    }
    let s: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s * f.voxel_volume())
}

/// Fourier-space catness of `f` and its copy rigidly shifted by `dx`:
/// `G int int D D / |r - s|` with `D = f - f(. - dx)`.
pub fn grid_shift_catness(
    f: &Grid,
    dx: Vec3,
    consts: &PhysicalConstants,
    opts: &GridOptions,
) -> Result<f64> {
    let n = check_grid(f)?;
    let f = cubic(f, n);
    let h_edge = f.voxel_edge;
    if (0..3).any(|ax| dx.0[ax].abs() >= 0.5 * n as f64 * h_edge) {
        return Err(Error::InvalidParameter(
            "shift exceeds the padded box".into(),
        ));
    }
    let need = required_bytes(n);
    if need > opts.memory_limit_bytes {
        return Err(Error::MemoryBound {
            required_bytes: need,
            limit_bytes: opts.memory_limit_bytes,
        });
    }
    let zeros = vec![0.0; f.values.len()];
    let (h, p) = packed_transform(&f.values, &zeros, n);
    let w = kernel_spectrum(p);
    let freq = |i: usize| {
        let m = if i <= p / 2 {
            i as f64
        } else {
            i as f64 - p as f64
        };
        2.0 * PI * m / (p as f64 * h_edge)
    };
    let partial: Vec<f64> = (0..p)
        .into_par_iter()
        .map(|kz| {
            let mut s = 0.0;
            for ky in 0..p {
                for kx in 0..p {
                    let idx = kx + p * (ky + p * kz);
                    let phase = freq(kx) * dx.0[0] + freq(ky) * dx.0[1] + freq(kz) * dx.0[2];
                    let one_minus_cos = 2.0 * (0.5 * phase).sin().powi(2);
                    s += w[idx] * h[idx].norm_sqr() * 2.0 * one_minus_cos;
                }
            }
            s
        })
        .collect();
    let s: f64 = partial.iter().sum();
    Ok((consts.g * h_edge.powi(5) * s / (p * p * p) as f64).max(0.0))
}
