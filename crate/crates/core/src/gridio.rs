//! DPGRID01 binary grid files.
//!
//! Layout (little endian):
//!
//! | bytes  | content                                   |
//! |--------|-------------------------------------------|
//! | 0..8   | magic `DPGRID01`                          |
//! | 8..20  | dims, 3 x u32                             |
//! | 20..24 | unit tag, u32: 0 = SI (m, kg/m^3), 1 = CGS (cm, g/cm^3) |
//! | 24..48 | origin (corner of voxel 0), 3 x f64       |
//! | 48..56 | voxel edge, f64                           |
//! | 56..64 | reserved, zero                            |
//! | 64..   | voxel values, f64, x fastest              |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::densities::Grid;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

pub const MAGIC: &[u8; 8] = b"DPGRID01";
pub const HEADER_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitTag {
    SI = 0,
    CGS = 1,
}

impl UnitTag {
    fn from_u32(v: u32) -> Result<Self> {
        match v {
            0 => Ok(UnitTag::SI),
            1 => Ok(UnitTag::CGS),
            _ => Err(Error::GridFormat(format!("unknown unit tag {v}"))),
        }
    }

    /// (length, density) factors from file units to SI.
    fn to_si(self) -> (f64, f64) {
        match self {
            UnitTag::SI => (1.0, 1.0),
            UnitTag::CGS => (1e-2, 1e3),
        }
    }
}

pub fn write_grid<W: Write>(g: &Grid, units: UnitTag, mut w: W) -> Result<()> {
    let (len, dens) = units.to_si();
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(MAGIC);
    for ax in 0..3 {
        let d = u32::try_from(g.dims[ax])
            .map_err(|_| Error::GridFormat(format!("dimension {} too large", g.dims[ax])))?;
        h[8 + 4 * ax..12 + 4 * ax].copy_from_slice(&d.to_le_bytes());
    }
    h[20..24].copy_from_slice(&(units as u32).to_le_bytes());
    for ax in 0..3 {
        h[24 + 8 * ax..32 + 8 * ax].copy_from_slice(&(g.origin.0[ax] / len).to_le_bytes());
    }
    h[48..56].copy_from_slice(&(g.voxel_edge / len).to_le_bytes());
    w.write_all(&h)?;
    let mut buf = Vec::with_capacity(8 * g.values.len());
    for v in &g.values {
        buf.extend_from_slice(&(v / dens).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a grid and converts it to SI.
pub fn read_grid<R: Read>(mut r: R) -> Result<Grid> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h)
        .map_err(|e| Error::GridFormat(format!("short header: {e}")))?;
    if &h[..8] != MAGIC {
        return Err(Error::GridFormat("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let units = UnitTag::from_u32(u32_at(20))?;
    let (len, dens) = units.to_si();
    let origin = Vec3::new(f64_at(24) * len, f64_at(32) * len, f64_at(40) * len);
    let edge = f64_at(48) * len;
    let n = dims
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .ok_or_else(|| Error::GridFormat("dims overflow".into()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 8 * n {
        return Err(Error::GridFormat(format!(
            "expected {} value bytes, found {}",
            8 * n,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()) * dens)
        .collect();
    Grid::new(origin, edge, dims, values)
}

pub fn save_grid(g: &Grid, units: UnitTag, path: &Path) -> Result<()> {
    write_grid(g, units, BufWriter::new(File::create(path)?))
}

pub fn load_grid(path: &Path) -> Result<Grid> {
    read_grid(BufReader::new(File::open(path)?))
}
