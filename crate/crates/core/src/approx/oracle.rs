//! Double-precision references for the approximations.

pub fn gelu_exact(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn isqrt_exact(x: f64) -> f64 {
    1.0 / x.sqrt()
}

pub fn exp_exact(x: f64) -> f64 {
    x.exp()
}

pub fn softmax_exact(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn layernorm_exact(row: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = 1.0 / (var + eps).sqrt();
    row.iter().zip(gamma).zip(beta).map(|((x, g), b)| g * (x - mean) * scale + b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(gelu_exact(0.0), 0.0);
        assert!((gelu_exact(1.0) - 0.841_344_746).abs() < 1e-8);
        let s = softmax_exact(&[1.0, 2.0, 3.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ln = layernorm_exact(&[-1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], 0.0);
        assert_eq!(ln, vec![-1.0, 1.0]);
    }
}
