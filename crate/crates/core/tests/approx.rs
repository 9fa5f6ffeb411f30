use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vitdse::approx::{
    cosine_similarity, error_report, gelu_exact, gelu_knots, gelu_pieces, gelu_pwl, isqrt_approx, layernorm_approx,
    layernorm_exact, pade_exp, softmax_approx, softmax_exact, ApproxConfig, ApproxFn, EncoderBlock, FixedFormat,
    EXP_FRAC_BITS, PROB_FRAC_BITS,
};

fn cfg() -> ApproxConfig {
    ApproxConfig::default()
}

fn q(x: f64) -> i64 {
    FixedFormat::Q8_8.quantize(x)
}

fn random_row(rng: &mut ChaCha8Rng, len: usize, spread: f64) -> Vec<i64> {
    (0..len).map(|_| q(rng.gen_range(-spread..=spread))).collect()
}

#[test]
fn isqrt_examples() {
    let c = cfg();
    let w = c.wide;
    assert_eq!(isqrt_approx(w.one(), &c).unwrap(), w.one());
    assert_eq!(isqrt_approx(w.quantize(4.0), &c).unwrap(), w.quantize(0.5));
    assert_eq!(isqrt_approx(w.quantize(0.25), &c).unwrap(), w.quantize(2.0));
    let two = w.to_f64(isqrt_approx(w.quantize(2.0), &c).unwrap());
    assert!((two - 0.5f64.sqrt()).abs() < 1e-4);
    assert!(isqrt_approx(0, &c).is_err());
    assert!(isqrt_approx(-5, &c).is_err());
}

#[test]
fn isqrt_sweep_pinned() {
    let r = error_report(ApproxFn::Isqrt, (0.0625, 256.0), 8192, 1, &cfg()).unwrap();
    assert!(r.max_rel <= 0.0079, "{r:?}");
    let smooth = ApproxConfig { isqrt_interpolate: true, ..cfg() };
    let ri = error_report(ApproxFn::Isqrt, (0.0625, 256.0), 8192, 1, &smooth).unwrap();
    assert!(ri.max_rel <= 2e-4, "{ri:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for c in [cfg(), smooth] {
        for _ in 0..2000 {
            let x = c.wide.quantize(rng.gen_range(0.0625..256.0));
            let approx = c.wide.to_f64(isqrt_approx(x, &c).unwrap());
            let exact = 1.0 / c.wide.to_f64(x).sqrt();
            assert!((approx - exact).abs() <= 0.0079 * exact + c.wide.resolution());
        }
    }
}

#[test]
fn isqrt_non_increasing_within_binades() {
    for c in [cfg(), ApproxConfig { isqrt_interpolate: true, ..cfg() }] {
        let w = c.wide;
        for e in -4..8 {
            let lo = w.quantize(2f64.powi(e));
            let mut prev = i64::MAX;
            for x in (lo..2 * lo).step_by((lo as usize / 512).max(1)) {
                let y = isqrt_approx(x, &c).unwrap();
                assert!(y <= prev, "x={x}");
                prev = y;
            }
        }
    }
}

#[test]
fn exp_examples() {
    let c = cfg();
    let one = pade_exp(0, &c);
    assert_eq!(one.value, 1 << EXP_FRAC_BITS);
    assert!(!one.saturated);
    let e1 = pade_exp(q(-1.0), &c).to_f64();
    assert!((e1 - (-1f64).exp()).abs() < 1e-3, "{e1}");
    let e8 = pade_exp(q(-8.0), &c);
    assert!(e8.value > 0 && (e8.to_f64() - (-8f64).exp()).abs() / (-8f64).exp() < 0.01);
    assert!(pade_exp(q(-20.0), &c).saturated);

    let r = error_report(ApproxFn::Exp, (-8.0, 0.0), 4096, 3, &c).unwrap();
    assert!(r.max_abs <= 2.5e-3, "{r:?}");
    let plain = ApproxConfig { pade_range_reduction: false, ..cfg() };
    let rp = error_report(ApproxFn::Exp, (-8.0, 0.0), 4096, 3, &plain).unwrap();
    assert!(rp.max_abs > r.max_abs);
}

#[test]
fn softmax_basic_cases() {
    let c = cfg();
    let uniform = softmax_approx(&[q(0.5); 8], &c).unwrap();
    assert!(uniform.probs.windows(2).all(|w| w[0] == w[1]));
    assert!((uniform.probs[0] as f64 / f64::from(1 << PROB_FRAC_BITS) - 0.125).abs() < 2e-3);

    let peaked = softmax_approx(&[0, FixedFormat::Q8_8.min_raw()], &c).unwrap().to_f64();
    assert!((peaked[0] - 1.0).abs() < 2e-2 && peaked[1] == 0.0);
    assert!(softmax_approx(&[], &c).is_err());
}

#[test]
fn softmax_rows_sum_and_order() {
    let c = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let row = random_row(&mut rng, 197, 8.0);
        let out = softmax_approx(&row, &c).unwrap();
        let p = out.to_f64();
        assert!(p.iter().all(|&x| x >= 0.0));
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by_key(|&i| row[i]);
        assert!(idx.windows(2).all(|w| out.probs[w[0]] <= out.probs[w[1]]));
        let exact = softmax_exact(&row.iter().map(|&x| c.format.to_f64(x)).collect::<Vec<_>>());
        let max_abs = p.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_abs < 5e-3, "{max_abs}");
    }
    assert!(worst <= 2e-2, "{worst}");
}

#[test]
fn gelu_examples_and_error() {
    let c = cfg();
    assert_eq!(gelu_pwl(0, &c), 0);
    assert_eq!(gelu_pwl(q(10.0), &c), q(10.0));
    assert_eq!(gelu_pwl(q(-10.0), &c), 0);
    let r = error_report(ApproxFn::Gelu, (-4.0, 4.0), 8192, 0, &c).unwrap();
    assert!(r.max_abs <= 0.08, "{r:?}");

    let coarse = ApproxConfig { gelu_knots: gelu_knots(2, -4.0, 4.0), ..cfg() };
    let rc = error_report(ApproxFn::Gelu, (-6.0, 6.0), 4096, 0, &coarse).unwrap();
    let rf = error_report(ApproxFn::Gelu, (-6.0, 6.0), 4096, 0, &c).unwrap();
    assert!(rf.max_abs <= rc.max_abs);
}

#[test]
fn gelu_is_continuous_at_breakpoints() {
    for pieces in [2, 4, 8, 16] {
        let c = ApproxConfig { gelu_knots: gelu_knots(pieces, -4.0, 4.0), ..cfg() };
        let f = c.format;
        let slopes = gelu_pieces(&c);
        let steep = slopes.iter().map(|p| p.slope.abs()).fold(1.0, f64::max);
        for &(x, y) in &c.gelu_knots {
            let (xr, yr) = (f.quantize(x), f.quantize(y));
            // value at the knot is the knot, from both sides
            assert_eq!(gelu_pwl(xr, &c), yr);
            let left = gelu_pwl(xr - 1, &c);
            let right = gelu_pwl(xr + 1, &c);
            assert!(((yr - left) as f64).abs() <= steep + 1.0);
            assert!(((right - yr) as f64).abs() <= steep + 1.0);
        }
        for w in slopes.windows(2) {
            let end = w[0].slope * w[0].x_end + w[0].intercept;
            let start = w[1].slope * w[1].x_start + w[1].intercept;
            assert!((end - start).abs() < 1e-12);
        }
    }
}

#[test]
fn gelu_monotone_right_of_minimum() {
    let c = cfg();
    let knots = &c.gelu_knots;
    let min_x = knots.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let mut prev = i64::MIN;
    for x in q(min_x)..=q(8.0) {
        let y = gelu_pwl(x, &c);
        assert!(y >= prev);
        prev = y;
    }
}

#[test]
fn layernorm_cases() {
    let c = cfg();
    let gamma = vec![q(1.0); 6];
    let beta: Vec<i64> = (0..6).map(|i| q(0.25 * i as f64)).collect();
    assert_eq!(layernorm_approx(&[q(3.0); 6], &gamma, &beta, &c).unwrap(), beta);

    let out = layernorm_approx(&[q(-1.0), q(1.0)], &[q(1.0); 2], &[0; 2], &c).unwrap();
    let expected = 1.0 / (1.0f64 + 1e-5).sqrt();
    assert!((c.format.to_f64(out[0]) + expected).abs() < 0.01);
    assert!((c.format.to_f64(out[1]) - expected).abs() < 0.01);

    assert!(layernorm_approx(&[q(1.0)], &[q(1.0)], &[0], &c).is_err());
    assert!(layernorm_approx(&[1, 2, 3], &[1, 2], &[0, 0, 0], &c).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let row = random_row(&mut rng, 192, 4.0);
        let g: Vec<i64> = (0..192).map(|_| q(rng.gen_range(0.5..1.5))).collect();
        let b: Vec<i64> = (0..192).map(|_| q(rng.gen_range(-0.5..0.5))).collect();
        let approx: Vec<f64> = layernorm_approx(&row, &g, &b, &c).unwrap().iter().map(|&y| c.format.to_f64(y)).collect();
        let conv = |v: &[i64]| v.iter().map(|&x| c.format.to_f64(x)).collect::<Vec<_>>();
        let exact = layernorm_exact(&conv(&row), &conv(&g), &conv(&b), c.layernorm_eps);
        assert!(cosine_similarity(&approx, &exact) >= 0.999);
    }
}

#[test]
fn error_report_harness() {
    for f in [ApproxFn::Identity, ApproxFn::Gelu, ApproxFn::Exp, ApproxFn::Softmax { len: 16 }] {
        let domain = if f == ApproxFn::Exp { (-8.0, 0.0) } else { (-4.0, 4.0) };
        let exact = ApproxConfig { exact: true, ..cfg() };
        let cfg = if f == ApproxFn::Identity { cfg() } else { exact };
        let r = error_report(f, domain, 512, 0, &cfg).unwrap();
        assert_eq!((r.max_abs, r.max_rel, r.mean_abs), (0.0, 0.0, 0.0), "{f:?}");
    }
    let r = error_report(ApproxFn::LayerNorm { len: 32 }, (-2.0, 2.0), 64, 0, &cfg()).unwrap();
    assert!(r.max_abs > 0.0 && r.max_abs < 0.1);
    assert!(error_report(ApproxFn::Isqrt, (-1.0, 4.0), 10, 0, &cfg()).is_err());
    assert!(error_report(ApproxFn::Gelu, (1.0, 0.0), 10, 0, &cfg()).is_err());
    let a = error_report(ApproxFn::Gelu, (-6.0, 6.0), 300, 4, &cfg()).unwrap();
    let b = error_report(ApproxFn::Gelu, (-6.0, 6.0), 300, 4, &cfg()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn encoder_block_tracks_double_precision() {
    for seed in 0..5 {
        let block = EncoderBlock::random(16, 2, 4, seed).unwrap();
        let x = block.random_input(8, seed + 100);
        let exact = block.forward_exact(&x, 8).unwrap();
        let approx = block.forward_approx(&x, 8, &cfg()).unwrap();
        let cos = cosine_similarity(&exact, &approx);
        assert!(cos >= 0.99, "seed {seed}: {cos}");
    }
    assert!(EncoderBlock::random(15, 2, 4, 0).is_err());
}

#[test]
fn config_documents() {
    let c = ApproxConfig::from_json(r#"{"recip_refine_steps": 1, "renormalize": true}"#).unwrap();
    assert_eq!(c.recip_refine_steps, 1);
    assert_eq!(c.gelu_knots, cfg().gelu_knots);
    let back = ApproxConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
    assert!(ApproxConfig::from_json(r#"{"pade_order": 3}"#).is_err());
    assert!(ApproxConfig::from_json(r#"{"bogus": 1}"#).is_err());
    assert!(ApproxConfig::from_json(r#"{"isqrt_table": [1, 2, 3]}"#).is_err());
    assert!((gelu_exact(1.0) - 0.841_344_746).abs() < 1e-8);
}

proptest! {
    #[test]
    fn softmax_permutation_and_shift(
        seed in 0u64..10_000,
        len in 2usize..64,
        shift in -200i64..200,
    ) {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row = random_row(&mut rng, len, 6.0);
        let base = softmax_approx(&row, &c).unwrap();

        let shifted: Vec<i64> = row.iter().map(|x| x + shift).collect();
        prop_assert_eq!(&softmax_approx(&shifted, &c).unwrap().probs, &base.probs);

        let mut perm: Vec<usize> = (0..len).collect();
        perm.rotate_left(seed as usize % len);
        perm.swap(0, len - 1);
        let permuted: Vec<i64> = perm.iter().map(|&i| row[i]).collect();
        let out = softmax_approx(&permuted, &c).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(out.probs[j], base.probs[i]);
        }
    }

    #[test]
    fn refinement_keeps_sum_close(seed in 0u64..1000, steps in 0u32..3) {
        let c = ApproxConfig { recip_refine_steps: steps, ..cfg() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row = random_row(&mut rng, 197, 8.0);
        let sum: f64 = softmax_approx(&row, &c).unwrap().to_f64().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 2e-2);
    }

    #[test]
    fn fixed_point_round_trip(x in -127.0f64..127.0) {
        let f = FixedFormat::Q8_8;
        let back = f.to_f64(f.quantize(x));
        prop_assert!((back - x).abs() <= f.resolution() / 2.0 + 1e-12);
    }
}
