use serde::{Deserialize, Serialize};

use super::config::{ApproxConfig, EXP_FRAC_BITS, PROB_FRAC_BITS};
use super::fixed::shift_round;
use super::oracle::{exp_exact, gelu_exact, isqrt_exact, layernorm_exact, softmax_exact};
use super::ApproxError;

const ONE_Q30: i128 = 1 << EXP_FRAC_BITS;
const LOG2E_Q30: i128 = 1_549_082_005; // log2(e) * 2^30
const LN2_Q30: i128 = 744_261_118; // ln(2) * 2^30
const FRAC_1_SQRT2_Q30: u128 = 759_250_125; // 2^-0.5 * 2^30

fn div_round(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    (2 * num + den).div_euclid(2 * den)
}

fn table_index(x: u64, msb: u32, bits: u32) -> usize {
    let mask = (1u64 << bits) - 1;
    let idx = if msb >= bits { x >> (msb - bits) } else { x << (bits - msb) };
    (idx & mask) as usize
}

/// `1/sqrt(x)` with `x` and the result in `cfg.wide`.
///
/// `x = 2^e (1 + f)`; the result is `2^-floor(e/2)`, times `2^-1/2` for odd
/// `e`, times the table entry for the leading fraction bits. Exact at even
/// powers of two.
pub fn isqrt_approx(x: i64, cfg: &ApproxConfig) -> Result<i64, ApproxError> {
    if x <= 0 {
        return Err(ApproxError::NonPositive(cfg.wide.to_f64(x)));
    }
    let w = cfg.wide;
    if cfg.exact {
        return Ok(w.quantize(isqrt_exact(w.to_f64(x))));
    }
    let msb = 63 - x.leading_zeros();
    let e = msb as i32 - w.frac_bits as i32;
    let bits = cfg.isqrt_table.len().trailing_zeros();
    let j = table_index(x as u64, msb, bits);
    let mut r = u128::from(cfg.isqrt_table[j]);
    if cfg.isqrt_interpolate {
        // next entry, or 2^-1/2 past the end of the binade
        let next = cfg.isqrt_table.get(j + 1).map_or(FRAC_1_SQRT2_Q30, |&v| u128::from(v));
        let rest_bits = msb.saturating_sub(bits);
        let rest = u128::from(x as u64 & ((1u64 << rest_bits) - 1));
        r -= ((r - next) * rest + (1 << rest_bits >> 1)) >> rest_bits;
    }
    if e.rem_euclid(2) == 1 {
        r = (r * FRAC_1_SQRT2_Q30 + (1 << 29)) >> EXP_FRAC_BITS;
    }
    let h = e.div_euclid(2);
    let shift = EXP_FRAC_BITS as i32 + h - w.frac_bits as i32;
    let out = if shift >= 63 { 0 } else { shift_round(r as i64, shift) };
    Ok(w.saturate(out))
}

/// Result of [`pade_exp`]: `value` carries [`EXP_FRAC_BITS`] fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpOutput {
    pub value: u64,
    /// The input was clamped into the configured domain.
    pub saturated: bool,
}

impl ExpOutput {
    pub fn to_f64(&self) -> f64 {
        self.value as f64 / ONE_Q30 as f64
    }
}

fn pade22(r: i128) -> i128 {
    let r2 = (r * r) >> EXP_FRAC_BITS;
    let num = 12 * ONE_Q30 + 6 * r + r2;
    let den = 12 * ONE_Q30 - 6 * r + r2;
    div_round(num << EXP_FRAC_BITS, den)
}

/// `e^x` for `x` in `cfg.format`, via the [2/2] Padé form
/// `(12 + 6r + r^2) / (12 - 6r + r^2)`.
///
/// With range reduction, `x = (k + f) ln 2` and the rational form is applied to
/// `r = f ln 2`, then shifted by `k`. Inputs outside `cfg.exp_domain` are clamped.
pub fn pade_exp(x: i64, cfg: &ApproxConfig) -> ExpOutput {
    let fmt = cfg.format;
    let (lo, hi) = (fmt.quantize(cfg.exp_domain.0), fmt.quantize(cfg.exp_domain.1));
    let clamped = x.clamp(lo, hi);
    let saturated = clamped != x;
    if cfg.exact {
        let v = (exp_exact(fmt.to_f64(clamped)) * ONE_Q30 as f64).round() as u64;
        return ExpOutput { value: v.max(1), saturated };
    }
    let xw = i128::from(clamped) << (EXP_FRAC_BITS - fmt.frac_bits);
    let value = if cfg.pade_range_reduction {
        let t = (xw * LOG2E_Q30) >> EXP_FRAC_BITS;
        let k = t >> EXP_FRAC_BITS;
        let f = t & (ONE_Q30 - 1);
        let q = pade22((f * LN2_Q30) >> EXP_FRAC_BITS);
        if -k >= 120 {
            0
        } else {
            let s = (-k) as u32;
            if s == 0 { q } else { (q + (1 << (s - 1))) >> s }
        }
    } else {
        pade22(xw)
    };
    ExpOutput { value: (value.max(1)) as u64, saturated }
}

/// Softmax output with [`PROB_FRAC_BITS`] fraction bits per entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftmaxOutput {
    pub probs: Vec<i64>,
    /// Entries that fell below the exponential domain and were flushed to zero.
    pub underflowed: usize,
}

impl SoftmaxOutput {
    pub fn to_f64(&self) -> Vec<f64> {
        let one = (1u64 << PROB_FRAC_BITS) as f64;
        self.probs.iter().map(|&p| p as f64 / one).collect()
    }
}

/// Max-subtracted exponentials normalised by a table reciprocal of their sum:
/// the sum's leading one selects the exponent, the next bits index
/// `cfg.recip_table`, and optional Newton steps refine it. No division.
pub fn softmax_approx(row: &[i64], cfg: &ApproxConfig) -> Result<SoftmaxOutput, ApproxError> {
    let max = *row.iter().max().ok_or(ApproxError::EmptyRow)?;
    let prob_one = 1i64 << PROB_FRAC_BITS;
    if cfg.exact {
        let xs: Vec<f64> = row.iter().map(|&x| cfg.format.to_f64(x)).collect();
        let probs = softmax_exact(&xs).into_iter().map(|p| (p * prob_one as f64).round() as i64).collect();
        return Ok(SoftmaxOutput { probs, underflowed: 0 });
    }
    let lo = cfg.format.quantize(cfg.exp_domain.0);
    let mut underflowed = 0;
    let exps: Vec<u64> = row
        .iter()
        .map(|&x| {
            let d = x - max;
            if d < lo {
                underflowed += 1;
                0
            } else {
                pade_exp(d, cfg).value
            }
        })
        .collect();
    let sum: u64 = exps.iter().sum();
    let msb = 63 - sum.leading_zeros();
    let bits = cfg.recip_table.len().trailing_zeros();
    let mut y = u128::from(cfg.recip_table[table_index(sum, msb, bits)]);
    let m = if msb >= EXP_FRAC_BITS {
        u128::from(sum >> (msb - EXP_FRAC_BITS))
    } else {
        u128::from(sum << (EXP_FRAC_BITS - msb))
    };
    let two = 2u128 << EXP_FRAC_BITS;
    for _ in 0..cfg.recip_refine_steps {
        let my = (m * y) >> EXP_FRAC_BITS;
        y = (y * two.saturating_sub(my)) >> EXP_FRAC_BITS;
    }
    let shift = msb + PROB_FRAC_BITS;
    let mut probs: Vec<i64> = exps
        .iter()
        .map(|&e| ((u128::from(e) * y + (1u128 << (shift - 1))) >> shift) as i64)
        .collect();
    if cfg.renormalize {
        let total: i64 = probs.iter().sum();
        if total > 0 {
            for p in &mut probs {
                *p = div_round(i128::from(*p) << PROB_FRAC_BITS, i128::from(total)) as i64;
            }
        }
    }
    Ok(SoftmaxOutput { probs, underflowed })
}

/// One linear piece of the GELU approximation, in real units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeluPiece {
    pub x_start: f64,
    pub x_end: f64,
    pub slope: f64,
    pub intercept: f64,
}

fn gelu_knots_raw(cfg: &ApproxConfig) -> Vec<(i64, i64)> {
    cfg.gelu_knots.iter().map(|&(x, y)| (cfg.format.quantize(x), cfg.format.quantize(y))).collect()
}

/// The interior pieces as evaluated (after knot quantization).
pub fn gelu_pieces(cfg: &ApproxConfig) -> Vec<GeluPiece> {
    let f = cfg.format;
    gelu_knots_raw(cfg)
        .windows(2)
        .map(|w| {
            let (x0, y0, x1, y1) = (f.to_f64(w[0].0), f.to_f64(w[0].1), f.to_f64(w[1].0), f.to_f64(w[1].1));
            let slope = (y1 - y0) / (x1 - x0);
            GeluPiece { x_start: x0, x_end: x1, slope, intercept: y0 - slope * x0 }
        })
        .collect()
}

/// Piecewise-linear GELU: zero below the first knot, identity above the last,
/// linear interpolation between knots. Interpolating from the left knot makes
/// every breakpoint exactly continuous.
pub fn gelu_pwl(x: i64, cfg: &ApproxConfig) -> i64 {
    let fmt = cfg.format;
    if cfg.exact {
        return fmt.quantize(gelu_exact(fmt.to_f64(x)));
    }
    let knots = gelu_knots_raw(cfg);
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return x;
    }
    let i = knots.partition_point(|k| k.0 <= x) - 1;
    let ((x0, y0), (x1, y1)) = (knots[i], knots[i + 1]);
    let y = i128::from(y0) + div_round(i128::from(y1 - y0) * i128::from(x - x0), i128::from(x1 - x0));
    fmt.saturate(y as i64)
}

/// `gamma * (x - mean) / sqrt(var + eps) + beta` with statistics in `cfg.wide`
/// and the scale from [`isqrt_approx`]. Inputs and outputs are in `cfg.format`.
pub fn layernorm_approx(row: &[i64], gamma: &[i64], beta: &[i64], cfg: &ApproxConfig) -> Result<Vec<i64>, ApproxError> {
    if row.len() < 2 {
        return Err(ApproxError::RowTooShort(row.len()));
    }
    if gamma.len() != row.len() || beta.len() != row.len() {
        return Err(ApproxError::LengthMismatch { row: row.len(), gamma: gamma.len(), beta: beta.len() });
    }
    let (f, w) = (cfg.format, cfg.wide);
    if cfg.exact {
        let conv = |v: &[i64]| v.iter().map(|&x| f.to_f64(x)).collect::<Vec<_>>();
        let out = layernorm_exact(&conv(row), &conv(gamma), &conv(beta), cfg.layernorm_eps);
        return Ok(out.into_iter().map(|y| f.quantize(y)).collect());
    }
    let up = (w.frac_bits - f.frac_bits) as i32;
    let widen = |v: i64| i128::from(v) << up;
    let n = row.len() as i128;
    let mean = div_round(row.iter().map(|&x| widen(x)).sum(), n);
    let sq: i128 = row.iter().map(|&x| (widen(x) - mean).pow(2) >> w.frac_bits).sum();
    let var = div_round(sq, n);
    let eps = w.quantize(cfg.layernorm_eps).max(1);
    let scale = i128::from(isqrt_approx(w.saturate((var + i128::from(eps)) as i64), cfg)?);
    Ok(row
        .iter()
        .zip(gamma.iter().zip(beta))
        .map(|(&x, (&g, &b))| {
            let norm = ((widen(x) - mean) * scale) >> w.frac_bits;
            let y = ((norm * widen(g)) >> w.frac_bits) + widen(b);
            f.saturate(shift_round(y as i64, up))
        })
        .collect())
}
