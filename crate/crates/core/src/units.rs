//! Unit-suffixed scalar parsing.
//!
//! Configuration values are written as `"<number> <unit>"`, e.g. `"1e-12 cm"`
//! or `"1000 kg/m^3"`, and converted to SI at parse time. A bare number is
//! only accepted for dimensionless quantities.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Mass,
    Density,
    Rate,
    Time,
    Energy,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Mass => "mass",
            Dimension::Density => "density",
            Dimension::Rate => "rate",
            Dimension::Time => "time",
            Dimension::Energy => "energy",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

/// A parsed scalar in SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dimension: Dimension,
}

const UNITS: &[(&str, Dimension, f64)] = &[
    ("m", Dimension::Length, 1.0),
    ("km", Dimension::Length, 1e3),
    ("cm", Dimension::Length, 1e-2),
    ("mm", Dimension::Length, 1e-3),
    ("um", Dimension::Length, 1e-6),
    ("µm", Dimension::Length, 1e-6),
    ("nm", Dimension::Length, 1e-9),
    ("angstrom", Dimension::Length, 1e-10),
    ("Å", Dimension::Length, 1e-10),
    ("pm", Dimension::Length, 1e-12),
    ("fm", Dimension::Length, 1e-15),
    ("kg", Dimension::Mass, 1.0),
    ("g", Dimension::Mass, 1e-3),
    ("mg", Dimension::Mass, 1e-6),
    ("ug", Dimension::Mass, 1e-9),
    ("u", Dimension::Mass, 1.66053906660e-27),
    ("amu", Dimension::Mass, 1.66053906660e-27),
    ("kg/m^3", Dimension::Density, 1.0),
    ("kg/m3", Dimension::Density, 1.0),
    ("g/cm^3", Dimension::Density, 1e3),
    ("g/cm3", Dimension::Density, 1e3),
    ("1/s", Dimension::Rate, 1.0),
    ("/s", Dimension::Rate, 1.0),
    ("s^-1", Dimension::Rate, 1.0),
    ("Hz", Dimension::Rate, 1.0),
    ("1/h", Dimension::Rate, 1.0 / 3600.0),
    ("/h", Dimension::Rate, 1.0 / 3600.0),
    ("s", Dimension::Time, 1.0),
    ("ms", Dimension::Time, 1e-3),
    ("min", Dimension::Time, 60.0),
    ("h", Dimension::Time, 3600.0),
    ("J", Dimension::Energy, 1.0),
    ("erg", Dimension::Energy, 1e-7),
    ("eV", Dimension::Energy, 1.602176634e-19),
];

pub fn parse_quantity(text: &str) -> Result<Quantity> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Unit("empty quantity".into()));
    }
    // The number ends at the first whitespace; "1e-12cm" without a space is
    // also accepted by scanning for the longest numeric prefix.
    let (num, unit) = match text.split_once(char::is_whitespace) {
        Some((n, u)) => (n, u.trim()),
        None => split_numeric_prefix(text),
    };
    let value: f64 = num
        .parse()
        .map_err(|_| Error::Unit(format!("cannot parse number in {text:?}")))?;
    if !value.is_finite() {
        return Err(Error::Unit(format!("non-finite value in {text:?}")));
    }
    if unit.is_empty() {
        return Ok(Quantity {
            value,
            dimension: Dimension::Dimensionless,
        });
    }
    let (_, dimension, factor) = UNITS
        .iter()
        .find(|(name, _, _)| *name == unit)
        .ok_or_else(|| Error::Unit(format!("unknown unit {unit:?} in {text:?}")))?;
    Ok(Quantity {
        value: value * factor,
        dimension: *dimension,
    })
}

fn split_numeric_prefix(text: &str) -> (&str, &str) {
    let mut end = 0;
    for i in (1..=text.len()).rev() {
        if text.is_char_boundary(i) && text[..i].parse::<f64>().is_ok() {
            end = i;
            break;
        }
    }
    (&text[..end], text[end..].trim())
}

/// Parse and require a specific dimension, returning the SI value.
pub fn parse_as(text: &str, expected: Dimension) -> Result<f64> {
    let q = parse_quantity(text)?;
    if q.dimension != expected {
        return Err(Error::Unit(format!(
            "{text:?} has dimension {}, expected {expected}",
            q.dimension
        )));
    }
    Ok(q.value)
}
