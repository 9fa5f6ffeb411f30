use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ApproxConfig, PROB_FRAC_BITS};
use super::fixed::shift_round;
use super::kernels::{gelu_pwl, layernorm_approx, softmax_approx};
use super::oracle::{gelu_exact, layernorm_exact, softmax_exact};
use super::ApproxError;

/// Pre-norm encoder block with random weights, for end-to-end comparison of
/// the fixed-point approximations against a double-precision reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock {
    pub dim: usize,
    pub heads: usize,
    pub hidden: usize,
    wq: Vec<f64>,
    wk: Vec<f64>,
    wv: Vec<f64>,
    wo: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    ln1: (Vec<f64>, Vec<f64>),
    ln2: (Vec<f64>, Vec<f64>),
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-a..=a)).collect()
}

fn matmul(a: &[f64], rows: usize, k: usize, b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * m];
    for r in 0..rows {
        for i in 0..k {
            let x = a[r * k + i];
            for j in 0..m {
                out[r * m + j] += x * b[i * m + j];
            }
        }
    }
    out
}

impl EncoderBlock {
    /// Weights uniform with variance `1 / fan_in`; LayerNorm affine near identity.
    pub fn random(dim: usize, heads: usize, mlp_ratio: usize, seed: u64) -> Result<Self, ApproxError> {
        if dim == 0 || heads == 0 || !dim.is_multiple_of(heads) || mlp_ratio == 0 {
            return Err(ApproxError::Config(format!("bad block shape d={dim} h={heads} ratio={mlp_ratio}")));
        }
        let hidden = dim * mlp_ratio;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = |fan_in: usize| (3.0 / fan_in as f64).sqrt();
        let affine = |rng: &mut ChaCha8Rng| {
            let g = (0..dim).map(|_| 1.0 + rng.gen_range(-0.1..=0.1)).collect();
            let b = uniform(rng, dim, 0.1);
            (g, b)
        };
        let ln1 = affine(&mut rng);
        let ln2 = affine(&mut rng);
        Ok(Self {
            dim,
            heads,
            hidden,
            wq: uniform(&mut rng, dim * dim, a(dim)),
            wk: uniform(&mut rng, dim * dim, a(dim)),
            wv: uniform(&mut rng, dim * dim, a(dim)),
            wo: uniform(&mut rng, dim * dim, a(dim)),
            w1: uniform(&mut rng, dim * hidden, a(dim)),
            w2: uniform(&mut rng, hidden * dim, a(hidden)),
            ln1,
            ln2,
        })
    }

    /// Random activations with unit variance, `tokens x dim` row-major.
    pub fn random_input(&self, tokens: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        uniform(&mut rng, tokens * self.dim, 3f64.sqrt())
    }

    fn check(&self, x: &[f64], tokens: usize) -> Result<(), ApproxError> {
        if tokens == 0 || x.len() != tokens * self.dim {
            return Err(ApproxError::LengthMismatch { row: x.len(), gamma: tokens * self.dim, beta: tokens * self.dim });
        }
        Ok(())
    }

    /// Double-precision forward pass.
    pub fn forward_exact(&self, x: &[f64], tokens: usize) -> Result<Vec<f64>, ApproxError> {
        self.check(x, tokens)?;
        let (d, dh) = (self.dim, self.dim / self.heads);
        let ln = |v: &[f64], p: &(Vec<f64>, Vec<f64>)| -> Vec<f64> {
            v.chunks(d).flat_map(|r| layernorm_exact(r, &p.0, &p.1, 1e-5)).collect()
        };
        let h = ln(x, &self.ln1);
        let (q, k, v) = (matmul(&h, tokens, d, &self.wq, d), matmul(&h, tokens, d, &self.wk, d), matmul(&h, tokens, d, &self.wv, d));
        let mut attn = vec![0.0; tokens * d];
        let scale = 1.0 / (dh as f64).sqrt();
        for head in 0..self.heads {
            let c = head * dh;
            for i in 0..tokens {
                let scores: Vec<f64> = (0..tokens)
                    .map(|j| (0..dh).map(|t| q[i * d + c + t] * k[j * d + c + t]).sum::<f64>() * scale)
                    .collect();
                let p = softmax_exact(&scores);
                for t in 0..dh {
                    attn[i * d + c + t] = (0..tokens).map(|j| p[j] * v[j * d + c + t]).sum();
                }
            }
        }
        let proj = matmul(&attn, tokens, d, &self.wo, d);
        let x1: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a + b).collect();
        let h2 = ln(&x1, &self.ln2);
        let f1: Vec<f64> = matmul(&h2, tokens, d, &self.w1, self.hidden).into_iter().map(gelu_exact).collect();
        let f2 = matmul(&f1, tokens, self.hidden, &self.w2, d);
        Ok(x1.iter().zip(&f2).map(|(a, b)| a + b).collect())
    }

    /// Fixed-point forward pass: every tensor in `cfg.format`, products
    /// accumulated wide, non-linearities from the approximation kernels.
    pub fn forward_approx(&self, x: &[f64], tokens: usize, cfg: &ApproxConfig) -> Result<Vec<f64>, ApproxError> {
        self.check(x, tokens)?;
        let f = cfg.format;
        let (d, dh) = (self.dim, self.dim / self.heads);
        let fb = f.frac_bits as i32;
        let qv = |v: &[f64]| v.iter().map(|&a| f.quantize(a)).collect::<Vec<i64>>();
        let mm = |a: &[i64], rows: usize, k: usize, b: &[i64], m: usize| -> Vec<i64> {
            let mut out = vec![0i64; rows * m];
            for r in 0..rows {
                for j in 0..m {
                    let acc: i64 = (0..k).map(|i| a[r * k + i] * b[i * m + j]).sum();
                    out[r * m + j] = f.saturate(shift_round(acc, fb));
                }
            }
            out
        };
        let ln = |v: &[i64], p: &(Vec<f64>, Vec<f64>)| -> Result<Vec<i64>, ApproxError> {
            let (g, b) = (qv(&p.0), qv(&p.1));
            let mut out = Vec::with_capacity(v.len());
            for r in v.chunks(d) {
                out.extend(layernorm_approx(r, &g, &b, cfg)?);
            }
            Ok(out)
        };
        let xq = qv(x);
        let h = ln(&xq, &self.ln1)?;
        let (wq, wk, wv, wo) = (qv(&self.wq), qv(&self.wk), qv(&self.wv), qv(&self.wo));
        let (q, k, v) = (mm(&h, tokens, d, &wq, d), mm(&h, tokens, d, &wk, d), mm(&h, tokens, d, &wv, d));
        let scale = f.quantize(1.0 / (dh as f64).sqrt());
        let mut attn = vec![0i64; tokens * d];
        for head in 0..self.heads {
            let c = head * dh;
            for i in 0..tokens {
                let scores: Vec<i64> = (0..tokens)
                    .map(|j| {
                        let dot: i64 = (0..dh).map(|t| q[i * d + c + t] * k[j * d + c + t]).sum();
                        f.saturate(shift_round(shift_round(dot, fb) * scale, fb))
                    })
                    .collect();
                let p = softmax_approx(&scores, cfg)?.probs;
                for t in 0..dh {
                    let acc: i64 = (0..tokens).map(|j| p[j] * v[j * d + c + t]).sum();
                    attn[i * d + c + t] = f.saturate(shift_round(acc, PROB_FRAC_BITS as i32));
                }
            }
        }
        let proj = mm(&attn, tokens, d, &wo, d);
        let x1: Vec<i64> = xq.iter().zip(&proj).map(|(a, b)| f.saturate(a + b)).collect();
        let h2 = ln(&x1, &self.ln2)?;
        let f1: Vec<i64> = mm(&h2, tokens, d, &qv(&self.w1), self.hidden).into_iter().map(|y| gelu_pwl(y, cfg)).collect();
        let f2 = mm(&f1, tokens, self.hidden, &qv(&self.w2), d);
        Ok(x1.iter().zip(&f2).map(|(a, b)| f.to_f64(f.saturate(a + b))).collect())
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 1.0 } else { 0.0 };
    }
    dot / (na * nb)
}
