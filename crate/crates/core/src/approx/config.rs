use serde::{Deserialize, Serialize};

use super::fixed::FixedFormat;
use super::oracle::gelu_exact;
use super::ApproxError;

/// Fraction bits of the internal exponential and reciprocal datapath.
pub const EXP_FRAC_BITS: u32 = 30;
/// Fraction bits of softmax outputs.
pub const PROB_FRAC_BITS: u32 = 15;

/// Parameters of every approximation, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxConfig {
    /// Activation format (inputs and outputs of GELU, LayerNorm, softmax inputs).
    pub format: FixedFormat,
    /// Wide intermediate format for LayerNorm statistics and `1/sqrt`.
    pub wide: FixedFormat,
    /// `isqrt_table[j] = 2^(-f/2)` where `f = log2(1 + j/len)`, Q30.
    pub isqrt_table: Vec<u64>,
    /// Interpolate linearly between neighbouring `isqrt_table` entries.
    pub isqrt_interpolate: bool,
    /// Fixed at 2 (numerator and denominator degree).
    pub pade_order: u32,
    /// Split `e^x` into `2^k * e^r` with `r` in `[0, ln 2)` before the rational step.
    pub pade_range_reduction: bool,
    pub exp_domain: (f64, f64),
    /// Reciprocal table over the normalised mantissa `[1, 2)`, Q30.
    pub recip_table: Vec<u64>,
    /// Newton steps applied after the table lookup.
    pub recip_refine_steps: u32,
    /// Divide by the output sum at the end of softmax.
    pub renormalize: bool,
    /// GELU knots `(x, y)`; identity above the last, zero below the first.
    pub gelu_knots: Vec<(f64, f64)>,
    pub layernorm_eps: f64,
    /// Replace every approximation with its double-precision oracle.
    pub exact: bool,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            format: FixedFormat::Q8_8,
            wide: FixedFormat::Q16_16,
            isqrt_table: isqrt_table(64),
            isqrt_interpolate: false,
            pade_order: 2,
            pade_range_reduction: true,
            exp_domain: (-8.0, 0.0),
            recip_table: recip_table(64),
            recip_refine_steps: 0,
            renormalize: false,
            gelu_knots: gelu_knots(8, -4.0, 4.0),
            layernorm_eps: 1e-5,
            exact: false,
        }
    }
}

fn q30(x: f64) -> u64 {
    (x * (1u64 << EXP_FRAC_BITS) as f64).round() as u64
}

pub fn isqrt_table(len: usize) -> Vec<u64> {
    (0..len).map(|j| q30((1.0 + j as f64 / len as f64).powf(-0.5))).collect()
}

/// Reciprocals of interval midpoints of `[1, 2)`.
pub fn recip_table(len: usize) -> Vec<u64> {
    (0..len).map(|j| q30(1.0 / (1.0 + (j as f64 + 0.5) / len as f64))).collect()
}

/// `pieces` uniform segments on `[lo, hi]` through the exact GELU, with the
/// end knots pinned to `0` and `hi` so the outer pieces join continuously.
pub fn gelu_knots(pieces: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let step = (hi - lo) / pieces as f64;
    (0..=pieces)
        .map(|i| {
            let x = lo + step * i as f64;
            let y = if i == 0 {
                0.0
            } else if i == pieces {
                hi
            } else {
                gelu_exact(x)
            };
            (x, y)
        })
        .collect()
}

impl ApproxConfig {
    pub fn from_json(doc: &str) -> Result<Self, ApproxError> {
        let cfg: Self = serde_json::from_str(doc).map_err(|e| ApproxError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ApproxError> {
        let bad = |m: String| Err(ApproxError::Config(m));
        self.format.validate()?;
        self.wide.validate()?;
        if self.format.frac_bits > EXP_FRAC_BITS || self.wide.frac_bits > EXP_FRAC_BITS {
            return bad(format!("formats may carry at most {EXP_FRAC_BITS} fraction bits"));
        }
        if self.wide.frac_bits < self.format.frac_bits {
            return bad("wide format must carry at least as many fraction bits as the activation format".into());
        }
        if self.isqrt_table.len() < 2 || !self.isqrt_table.len().is_power_of_two() {
            return bad("isqrt_table length must be a power of two ≥ 2".into());
        }
        if self.isqrt_table.windows(2).any(|w| w[1] >= w[0]) {
            return bad("isqrt_table must be strictly decreasing".into());
        }
        if self.recip_table.len() < 2 || !self.recip_table.len().is_power_of_two() {
            return bad("recip_table length must be a power of two ≥ 2".into());
        }
        if self.pade_order != 2 {
            return bad(format!("pade_order {} unsupported (only 2)", self.pade_order));
        }
        let (lo, hi) = self.exp_domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi && hi <= 0.0) {
            return bad("exp_domain must be a finite interval within x ≤ 0".into());
        }
        if self.gelu_knots.len() < 2 {
            return bad("GELU needs at least two knots".into());
        }
        let q: Vec<i64> = self.gelu_knots.iter().map(|k| self.format.quantize(k.0)).collect();
        if q.windows(2).any(|w| w[1] <= w[0]) {
            return bad("GELU knots must be strictly increasing after quantization".into());
        }
        let (first, last) = (self.gelu_knots[0], self.gelu_knots[self.gelu_knots.len() - 1]);
        if self.format.quantize(first.1) != 0 || self.format.quantize(last.1) != self.format.quantize(last.0) {
            return bad("outer GELU knots must meet the zero and identity pieces".into());
        }
        if self.layernorm_eps.is_nan() || self.layernorm_eps <= 0.0 {
            return bad("layernorm_eps must be positive".into());
        }
        Ok(())
    }
}
