use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ApproxConfig, EXP_FRAC_BITS, PROB_FRAC_BITS};
use super::kernels::{gelu_pwl, isqrt_approx, layernorm_approx, pade_exp, softmax_approx};
use super::oracle::{exp_exact, gelu_exact, isqrt_exact, layernorm_exact, softmax_exact};
use super::ApproxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum ApproxFn {
    Isqrt,
    Exp,
    Gelu,
    Softmax { len: usize },
    LayerNorm { len: usize },
    /// Returns its input unchanged; checks the harness itself.
    Identity,
}

impl ApproxFn {
    pub fn name(&self) -> &'static str {
        match self {
            ApproxFn::Isqrt => "isqrt",
            ApproxFn::Exp => "exp",
            ApproxFn::Gelu => "gelu",
            ApproxFn::Softmax { .. } => "softmax",
            ApproxFn::LayerNorm { .. } => "layernorm",
            ApproxFn::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub function: ApproxFn,
    pub domain: (f64, f64),
    pub samples: usize,
    pub max_abs: f64,
    /// Relative to `max(|oracle|, output resolution)`.
    pub max_rel: f64,
    pub mean_abs: f64,
    /// Input (first element for row functions) with the largest absolute error.
    pub worst_input: f64,
}

struct Acc {
    max_abs: f64,
    max_rel: f64,
    sum_abs: f64,
    count: usize,
    worst_input: f64,
}

impl Acc {
    fn push(&mut self, input: f64, approx: f64, exact: f64, floor: f64) {
        let abs = (approx - exact).abs();
        if abs > self.max_abs {
            self.max_abs = abs;
            self.worst_input = input;
        }
        self.max_rel = self.max_rel.max(abs / exact.abs().max(floor));
        self.sum_abs += abs;
        self.count += 1;
    }
}

/// Grid-plus-random sweep of one approximation against its oracle. Scalar
/// functions take `samples` points (half on a uniform grid including both
/// ends, half uniform random); row functions take `samples` random rows.
/// The oracle sees the unquantized inputs, so format precision shows up in
/// the error. In exact mode the oracle stands in for the approximation.
pub fn error_report(
    function: ApproxFn,
    domain: (f64, f64),
    samples: usize,
    seed: u64,
    cfg: &ApproxConfig,
) -> Result<ErrorReport, ApproxError> {
    let (lo, hi) = domain;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) || samples == 0 {
        return Err(ApproxError::Domain(format!("[{lo}, {hi}] with {samples} samples")));
    }
    if function == ApproxFn::Isqrt && lo <= 0.0 {
        return Err(ApproxError::Domain("isqrt needs a positive domain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Acc { max_abs: 0.0, max_rel: 0.0, sum_abs: 0.0, count: 0, worst_input: lo };
    let (f, w) = (cfg.format, cfg.wide);
    let prob_res = (-(PROB_FRAC_BITS as f64)).exp2();
    let exp_res = (-(EXP_FRAC_BITS as f64)).exp2();

    let grid = samples / 2;
    let points: Vec<f64> = (0..samples)
        .map(|i| {
            if i < grid {
                if grid == 1 { lo } else { lo + (hi - lo) * i as f64 / (grid - 1) as f64 }
            } else {
                rng.gen_range(lo..=hi)
            }
        })
        .collect();

    match function {
        ApproxFn::Isqrt => {
            for x in points {
                let approx = if cfg.exact { isqrt_exact(x) } else { w.to_f64(isqrt_approx(w.quantize(x).max(1), cfg)?) };
                acc.push(x, approx, isqrt_exact(x), w.resolution());
            }
        }
        ApproxFn::Exp => {
            for x in points {
                let approx = if cfg.exact { exp_exact(x) } else { pade_exp(f.quantize(x), cfg).to_f64() };
                acc.push(x, approx, exp_exact(x), exp_res);
            }
        }
        ApproxFn::Gelu => {
            for x in points {
                let approx = if cfg.exact { gelu_exact(x) } else { f.to_f64(gelu_pwl(f.quantize(x), cfg)) };
                acc.push(x, approx, gelu_exact(x), f.resolution());
            }
        }
        ApproxFn::Identity => {
            for x in points {
                acc.push(x, x, x, f.resolution());
            }
        }
        ApproxFn::Softmax { len } | ApproxFn::LayerNorm { len } => {
            if len == 0 {
                return Err(ApproxError::EmptyRow);
            }
            for _ in 0..samples {
                let xs: Vec<f64> = (0..len).map(|_| rng.gen_range(lo..=hi)).collect();
                let row: Vec<i64> = xs.iter().map(|&x| f.quantize(x)).collect();
                let (ones, zeros) = (vec![1.0; len], vec![0.0; len]);
                let (approx, exact, floor) = if let ApproxFn::Softmax { .. } = function {
                    let exact = softmax_exact(&xs);
                    let approx = if cfg.exact { exact.clone() } else { softmax_approx(&row, cfg)?.to_f64() };
                    (approx, exact, prob_res)
                } else {
                    let exact = layernorm_exact(&xs, &ones, &zeros, cfg.layernorm_eps);
                    let approx = if cfg.exact {
                        exact.clone()
                    } else {
                        let out = layernorm_approx(&row, &vec![f.one(); len], &vec![0; len], cfg)?;
                        out.iter().map(|&y| f.to_f64(y)).collect()
                    };
                    (approx, exact, f.resolution())
                };
                for (a, e) in approx.into_iter().zip(exact) {
                    acc.push(xs[0], a, e, floor);
                }
            }
        }
    }
    Ok(ErrorReport {
        function,
        domain,
        samples,
        max_abs: acc.max_abs,
        max_rel: acc.max_rel,
        mean_abs: acc.sum_abs / acc.count.max(1) as f64,
        worst_input: acc.worst_input,
    })
}

/// One CSV row per report.
pub fn reports_to_csv<W: Write>(reports: &[ErrorReport], out: W) -> Result<(), ApproxError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| ApproxError::Export(e.to_string());
    w.write_record(["fn", "lo", "hi", "samples", "max_abs", "max_rel", "mean_abs", "worst_input"]).map_err(io)?;
    for r in reports {
        w.write_record([
            r.function.name().to_string(),
            r.domain.0.to_string(),
            r.domain.1.to_string(),
            r.samples.to_string(),
            format!("{:e}", r.max_abs),
            format!("{:e}", r.max_rel),
            format!("{:e}", r.mean_abs),
            r.worst_input.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| ApproxError::Export(e.to_string()))
}
