use approx::assert_relative_eq;
use proptest::prelude::*;

use extremal_fields::geometry::{scale_set, AxisBox, JordanSet, ScalingPlan};
use extremal_fields::limit_law::{mixed_gumbel_cdf, specialization_coefficients, tail_constant_m, QuadratureSpec};
use extremal_fields::montecarlo::{lemma3_term, lemma_sums, wilson_interval, LemmaKind, LemmaSumConfig};

const H2: f64 = 0.564_189_583_547_756_3;

fn boxes_2d() -> impl Strategy<Value = Vec<AxisBox>> {
    // Box i sits in the column [2i, 2i + 2), so boxes never overlap.
    prop::collection::vec((0.0..0.1_f64, 0.0..4.0_f64, 0.05..1.9_f64, 0.05..2.0_f64), 1..4).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (x, y, w, h))| {
                let x = x + 2.0 * i as f64;
                AxisBox::new(vec![x, y], vec![x + w, y + h]).unwrap()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaled_measure_factorizes(boxes in boxes_2d(), x in prop::array::uniform2(0.1..3.0_f64), m in prop::array::uniform2(0.1..50.0_f64)) {
        let set = JordanSet::new(boxes).unwrap();
        let scaled = scale_set(&set, &x, &m).unwrap();
        assert_relative_eq!(scaled.measure(), set.measure() * x[0] * x[1] * m[0] * m[1], max_relative = 1e-12);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 1usize..100_000, frac in 0.0..=1.0_f64) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0, "{lo} {p} {hi}");
    }

    #[test]
    fn limit_law_is_a_decreasing_probability(c in 0.0..30.0_f64, dc in 0.01..5.0_f64, r in 0.0..2.0_f64, gamma in 0.05..0.5_f64) {
        let quad = QuadratureSpec::default();
        let a = mixed_gumbel_cdf(c, r, gamma, &quad).unwrap().value;
        let b = mixed_gumbel_cdf(c + dc, r, gamma, &quad).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn specialization_matches_its_definition(r in 0.0..5.0_f64, gamma in 0.01..0.5_f64) {
        let (a, b) = specialization_coefficients(r, gamma).unwrap();
        assert_relative_eq!(a, r / (2.0 * gamma), max_relative = 1e-15);
        assert_relative_eq!(b * b, r / gamma, max_relative = 1e-14, epsilon = 1e-300);
    }

    #[test]
    fn plan_scales_multiply_to_the_tail_scale(u in 1.5..8.0_f64, d in 1usize..5) {
        let alphas = vec![2.0; d];
        let hs = vec![H2; d];
        let plan = ScalingPlan::symmetric(d).unwrap();
        let ev = plan.evaluate_m_i(u, &alphas, &hs).unwrap();
        let log_product: f64 = ev.m_values.iter().map(|m| m.ln()).sum();
        let log_m = tail_constant_m(u, &alphas, &hs).unwrap().log_m;
        assert_relative_eq!(log_product, log_m, max_relative = 1e-12);
    }

    #[test]
    fn far_field_summand_is_nonnegative(r in -1.0..1.0_f64, rho in 0.0..1.0_f64, u in 0.1..6.0_f64, near in any::<bool>()) {
        prop_assert!(lemma3_term(r, u, rho, near) >= 0.0);
    }
}

#[test]
fn lemma_sums_are_nonnegative_and_vanish_without_long_range() {
    for lemma in [LemmaKind::Lemma2, LemmaKind::Lemma3] {
        for r in [0.0, 0.3] {
            let mut cfg = LemmaSumConfig::new(lemma, vec![2.0, 1.0], vec![2.0, 3.0], r);
            cfg.budget = 1 << 18;
            let rep = lemma_sums(&cfg).unwrap();
            assert!(
                rep.sum_values.iter().all(|&s| s >= 0.0),
                "{lemma:?} {r}: {:?}",
                rep.sum_values
            );
            if lemma == LemmaKind::Lemma2 && r == 0.0 {
                assert!(rep.sum_values.iter().all(|&s| s == 0.0));
            }
        }
    }
}
