use causal_core::cause_effect::{self, synthetic, AnmConfig, IgciConfig};
use proptest::prelude::*;

fn monotone() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::btree_set(0u32..1_000_000, 20..200), 0.2f64..4.0).prop_map(|(xs, a)| {
        let x: Vec<f64> = xs.into_iter().map(|v| f64::from(v) / 1e6).collect();
        let y = x.iter().map(|v| v.powf(a) + v).collect();
        (x, y)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn igci_swap_negates((x, y) in monotone()) {
        let (f, _) = cause_effect::igci_slope_score(&x, &y).unwrap();
        let (b, _) = cause_effect::igci_slope_score(&y, &x).unwrap();
        prop_assert!((f + b).abs() <= 1e-9, "{} {}", f, b);
    }

    #[test]
    fn igci_positive_affine_invariance((x, y) in monotone(), s in 0.01f64..100.0, t in -50.0f64..50.0, u in 0.01f64..100.0) {
        let (a, _) = cause_effect::igci_slope_score(&x, &y).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| s * v + t).collect();
        let ys: Vec<f64> = y.iter().map(|v| u * v - t).collect();
        let (b, _) = cause_effect::igci_slope_score(&xs, &ys).unwrap();
        prop_assert!((a - b).abs() <= 1e-6, "{} {}", a, b);
        let cfg = IgciConfig::default();
        prop_assert_eq!(
            cause_effect::igci_direction(&x, &y, &cfg).unwrap().verdict,
            cause_effect::igci_direction(&xs, &ys, &cfg).unwrap().verdict
        );
    }
}

#[test]
fn anm_verdict_survives_affine_rescaling() {
    for seed in 0..6 {
        let p = synthetic::cubic_anm_pair(300, 500 + seed);
        let cfg = AnmConfig { seed, permutations: 200, ..AnmConfig::default() };
        let base = cause_effect::anm_direction(&p.x, &p.y, &cfg).unwrap();
        let xs: Vec<f64> = p.x.iter().map(|v| -3.0 * v + 7.0).collect();
        let ys: Vec<f64> = p.y.iter().map(|v| 0.25 * v - 1.0).collect();
        let scaled = cause_effect::anm_direction(&xs, &ys, &cfg).unwrap();
        assert_eq!(base.verdict, scaled.verdict, "seed {seed}");
    }
}

#[test]
fn forward_residuals_look_independent() {
    // Y = f(X) + V with X, V independent: the forward p-value should clear
    // alpha on most seeds.
    let cfg = AnmConfig { permutations: 200, ..AnmConfig::default() };
    let mut ok = 0;
    for seed in 0..20 {
        let p = synthetic::cubic_anm_pair(400, 900 + seed);
        let v = cause_effect::anm_direction(&p.x, &p.y, &AnmConfig { seed, ..cfg.clone() }).unwrap();
        let forward = if p.truth == cause_effect::Direction::XtoY { v.anm_p_forward } else { v.anm_p_backward };
        if forward.unwrap() > cfg.alpha {
            ok += 1;
        }
    }
    assert!(ok >= 18, "{ok}/20");
}
