use serde::{Deserialize, Serialize};

use super::ApproxError;

/// Binary fixed-point format: `total_bits` wide with `frac_bits` after the point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedFormat {
    pub total_bits: u32,
    pub frac_bits: u32,
    pub signed: bool,
}

impl FixedFormat {
    /// Q8.8 signed, 16 bits.
    pub const Q8_8: FixedFormat = FixedFormat { total_bits: 16, frac_bits: 8, signed: true };
    /// Q16.16 signed, 32 bits.
    pub const Q16_16: FixedFormat = FixedFormat { total_bits: 32, frac_bits: 16, signed: true };

    pub fn new(total_bits: u32, frac_bits: u32, signed: bool) -> Result<Self, ApproxError> {
        let f = Self { total_bits, frac_bits, signed };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ApproxError> {
        if self.total_bits == 0 || self.total_bits > 48 || self.frac_bits >= self.total_bits || (self.signed && self.total_bits < 2)
        {
            return Err(ApproxError::Format(format!("{self:?} is not a usable format")));
        }
        Ok(())
    }

    pub fn one(&self) -> i64 {
        1 << self.frac_bits
    }

    pub fn max_raw(&self) -> i64 {
        if self.signed {
            (1 << (self.total_bits - 1)) - 1
        } else {
            (1 << self.total_bits) - 1
        }
    }

    pub fn min_raw(&self) -> i64 {
        if self.signed {
            -(1 << (self.total_bits - 1))
        } else {
            0
        }
    }

    /// Smallest representable step.
    pub fn resolution(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn saturate(&self, raw: i64) -> i64 {
        raw.clamp(self.min_raw(), self.max_raw())
    }

    /// Round to nearest (ties away from zero), saturating.
    pub fn quantize(&self, x: f64) -> i64 {
        if x.is_nan() {
            return 0;
        }
        let scaled = (x * self.one() as f64).round();
        if scaled >= self.max_raw() as f64 {
            self.max_raw()
        } else if scaled <= self.min_raw() as f64 {
            self.min_raw()
        } else {
            scaled as i64
        }
    }

    pub fn to_f64(&self, raw: i64) -> f64 {
        raw as f64 / self.one() as f64
    }

    /// Re-expresses `raw` (in `self`) in `to`, rounding to nearest and saturating.
    pub fn convert(&self, raw: i64, to: &FixedFormat) -> i64 {
        to.saturate(shift_round(raw, self.frac_bits as i32 - to.frac_bits as i32))
    }
}

/// `x * 2^-shift` rounded to nearest for positive shifts, exact left shift otherwise.
pub(crate) fn shift_round(x: i64, shift: i32) -> i64 {
    if shift <= 0 {
        x << (-shift)
    } else {
        let half = 1i64 << (shift - 1);
        (x + half) >> shift
    }
}
