use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance kept from finite range ends before evaluating ω⁻¹, ρ or logs.
pub const BOUNDARY_EPS: f64 = 1e-6;

/// An interval of the extended real line, used for J_ω.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
}

/// The four ranges a discriminator output can be squashed into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CanonicalRange {
    NonNegative,
    Unit,
    Real,
    SymmetricUnit,
}

impl RangeInterval {
    /// `[0, ∞)`
    pub const NON_NEGATIVE: RangeInterval = RangeInterval {
        lower: 0.0,
        upper: f64::INFINITY,
        lower_open: false,
        upper_open: true,
    };
    /// `[0, 1]`
    pub const UNIT: RangeInterval = RangeInterval {
        lower: 0.0,
        upper: 1.0,
        lower_open: false,
        upper_open: false,
    };
    /// `ℝ`
    pub const REAL: RangeInterval = RangeInterval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        lower_open: true,
        upper_open: true,
    };
    /// `[-1, 1]`
    pub const SYMMETRIC_UNIT: RangeInterval = RangeInterval {
        lower: -1.0,
        upper: 1.0,
        lower_open: false,
        upper_open: false,
    };

    pub fn new(lower: f64, upper: f64, lower_open: bool, upper_open: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidArgument(format!(
                "range requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            // infinite ends are never attained
            lower_open: lower_open || lower.is_infinite(),
            upper_open: upper_open || upper.is_infinite(),
        })
    }

    pub fn contains(&self, z: f64) -> bool {
        if z.is_nan() {
            return false;
        }
        let above = if self.lower_open {
            z > self.lower
        } else {
            z >= self.lower
        };
        let below = if self.upper_open {
            z < self.upper
        } else {
            z <= self.upper
        };
        above && below
    }

    /// Pulls `z` at least [`BOUNDARY_EPS`] inside every finite end.
    pub fn clamp_interior(&self, z: f64) -> f64 {
        let mut out = z;
        if self.lower.is_finite() {
            out = out.max(self.lower + BOUNDARY_EPS);
        }
        if self.upper.is_finite() {
            out = out.min(self.upper - BOUNDARY_EPS);
        }
        out
    }

    pub fn canonical(&self) -> Option<CanonicalRange> {
        let same = |other: &RangeInterval| self.lower == other.lower && self.upper == other.upper;
        if same(&Self::NON_NEGATIVE) {
            Some(CanonicalRange::NonNegative)
        } else if same(&Self::UNIT) {
            Some(CanonicalRange::Unit)
        } else if same(&Self::REAL) {
            Some(CanonicalRange::Real)
        } else if same(&Self::SYMMETRIC_UNIT) {
            Some(CanonicalRange::SymmetricUnit)
        } else {
            None
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

impl fmt::Display for RangeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.canonical() == Some(CanonicalRange::Real) {
            return f.write_str("R");
        }
        let end = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{v}")
            }
        };
        write!(
            f,
            "{}{}, {}{}",
            if self.lower_open { '(' } else { '[' },
            end(self.lower),
            end(self.upper),
            if self.upper_open { ')' } else { ']' }
        )
    }
}
