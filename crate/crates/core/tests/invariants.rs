//! Property tests for invariants that hold on every input.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use weyl_lab_core::catalog::lookup;
use weyl_lab_core::entropy::{entropy_point, s_crit, EntropyOptions, FluidChoice};
use weyl_lab_core::foliation::{classify, Snapshot};
use weyl_lab_core::numdiff::StencilConfig;
use weyl_lab_core::point::Point;
use weyl_lab_core::quadrature::{composite, gauss_legendre, pairwise_sum};
use weyl_lab_core::verify::{magnetic_rhs, magnetic_rhs_orthonormal, synthetic_magnetic};

const METRICS: [&str; 4] = ["schwarzschild", "eds", "kasner", "ltb"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_legendre_is_exact_to_degree_2q_minus_1(q in 1usize..12, power in 0usize..24) {
        prop_assume!(power < 2 * q);
        let (x, w) = gauss_legendre(q);
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(power as i32)).sum();
        let exact = if power % 2 == 1 { 0.0 } else { 2.0 / (power as f64 + 1.0) };
        prop_assert!((approx - exact).abs() < 1e-13, "q={q} power={power}: {approx} vs {exact}");
    }

    #[test]
    fn composite_weights_sum_to_interval_length(a in -5.0f64..5.0, len in 0.01f64..10.0, order in 1usize..9, panels in 1usize..6) {
        let rule = composite(a, a + len, order, panels);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        prop_assert!((total - len).abs() < 1e-12 * len.max(1.0));
        prop_assert!(rule.iter().all(|(x, w)| *w > 0.0 && *x > a && *x < a + len));
    }

    #[test]
    fn pairwise_sum_matches_naive_sum(v in prop::collection::vec(-1e3f64..1e3, 0..200)) {
        let naive: f64 = v.iter().sum();
        prop_assert!((pairwise_sum(&v) - naive).abs() <= 1e-9 * v.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
    }

    #[test]
    fn s_crit_is_nonnegative_and_vanishes_at_umbilic(k in 0.0f64..2.0, alpha in 0.0f64..=(1.0 / 3.0)) {
        let c = s_crit(k, alpha);
        prop_assert!(c >= 0.0 && c.is_finite());
        prop_assert_eq!(s_crit(k, 1.0 / 3.0), 0.0);
        // Shrinking the expansion anisotropy never raises the critical density.
        prop_assert!(s_crit(k, (alpha + 0.05).min(1.0 / 3.0)) <= c + 1e-15);
    }

    #[test]
    fn magnetic_rhs_is_nonnegative_and_frame_independent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = synthetic_magnetic(&mut rng);
        let coord = magnetic_rhs(&s.g, &s.h, &s.w_tijk).unwrap();
        let ortho = magnetic_rhs_orthonormal(&s.g, &s.h, &s.w_tijk).unwrap();
        let scale = coord.abs().max(ortho.abs()).max(f64::MIN_POSITIVE);
        prop_assert!(coord >= -1e-12 * scale, "negative RHS {coord}");
        prop_assert!((coord - ortho).abs() <= 1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn entropy_density_lies_in_unit_interval(which in 0usize..METRICS.len(), seed in any::<u64>()) {
        let spec = lookup(METRICS[which], &Value::Null).unwrap();
        let opts = EntropyOptions::default();
        for p in spec.sample_points(2, seed) {
            let e = entropy_point(&spec, &p, FluidChoice::Auto, &opts).unwrap();
            prop_assert!((0.0..=1.0).contains(&e.s), "s = {} at {p}", e.s);
            prop_assert!(e.weyl_norm_bar <= e.riemann_norm_bar * (1.0 + 1e-9), "|W| > |R| at {p}");
            prop_assert!((e.density - e.s * e.sqrtg).abs() <= 1e-15 * e.sqrtg);
            if let Some(sb) = e.s_bar {
                prop_assert!(sb >= 0.0);
                // s and s_bar order points the same way: both vanish together.
                prop_assert_eq!(sb == 0.0, e.s == 0.0);
            }
        }
    }

    #[test]
    fn classification_is_invariant_under_rescaling(which in 0usize..METRICS.len(), seed in any::<u64>(), factor in 0.5f64..3.0) {
        let spec = lookup(METRICS[which], &Value::Null).unwrap();
        let scaled = spec.rescaled(factor).unwrap();
        let cfg = StencilConfig::default();
        for p in spec.sample_points(2, seed) {
            let a = Snapshot::compute(&spec, &p, &cfg).unwrap();
            let q = Point::new(p.t, p.x.map(|v| factor * v));
            let b = Snapshot::compute(&scaled, &q, &cfg).unwrap();
            let la = classify(&a.bundle, &a.frame, 1e-6).unwrap().labels;
            let lb = classify(&b.bundle, &b.frame, 1e-6).unwrap().labels;
            prop_assert_eq!(la, lb, "at {}", p);
        }
    }
}
