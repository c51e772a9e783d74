//! Randomized invariants of the numeric kernels and metrics.

use mtkd_core::distill::{ft_loss, kd_loss, mtkd_loss, DistillConfig};
use mtkd_core::metrics::{bootstrap_ci, compute_metrics, confusion, ConfusionMatrix, Metric};
use mtkd_core::numerics::{
    cosine_similarity, kl_divergence, sharpen_weights, softmax_with_temperature, LogitVector,
};
use proptest::prelude::*;

fn logits(max: f64, k: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-max..max, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn softmax_is_a_distribution(l in logits(1e4, 2..9), t in 0.05f64..20.0) {
        let p = softmax_with_temperature(&LogitVector::new(l).unwrap(), t).unwrap();
        let sum: f64 = p.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(p.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn softmax_argmax_ignores_temperature(l in logits(50.0, 2..9), t in 0.1f64..10.0) {
        let lv = LogitVector::new(l).unwrap();
        let a = softmax_with_temperature(&lv, 1.0).unwrap();
        let b = softmax_with_temperature(&lv, t).unwrap();
        let am = |p: &[f64]| (0..p.len()).fold(0, |best, i| if p[i] > p[best] { i } else { best });
        prop_assert_eq!(am(a.as_slice()), am(b.as_slice()));
    }

    #[test]
    fn kl_of_identical_is_zero(l in logits(30.0, 2..9), t in 0.5f64..10.0) {
        let p = softmax_with_temperature(&LogitVector::new(l).unwrap(), t).unwrap();
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_is_non_negative(a in logits(10.0, 4..5), b in logits(10.0, 4..5)) {
        let p = softmax_with_temperature(&LogitVector::new(a).unwrap(), 1.0).unwrap();
        let q = softmax_with_temperature(&LogitVector::new(b).unwrap(), 1.0).unwrap();
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
    }

    #[test]
    fn cosine_ignores_positive_scale(a in logits(10.0, 4..5), b in logits(10.0, 4..5), s in 1e-3f64..1e3) {
        let (la, lb) = (LogitVector::new(a.clone()).unwrap(), LogitVector::new(b).unwrap());
        let scaled = LogitVector::new(a.iter().map(|x| x * s).collect()).unwrap();
        let c0 = cosine_similarity(&la, &lb).unwrap();
        let c1 = cosine_similarity(&scaled, &lb).unwrap();
        prop_assert!((c0.value - c1.value).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&c0.value));
    }

    #[test]
    fn sharpened_weights_sum_to_one(cs in prop::collection::vec(-1.0f64..1.0, 1..6), tau in 0.01f64..2.0) {
        let w = sharpen_weights(&cs, tau).unwrap();
        let sum: f64 = w.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mtkd_reductions(s in logits(8.0, 4..5), t in logits(8.0, 4..5), y in 0usize..4) {
        let s = LogitVector::new(s).unwrap();
        let t = LogitVector::new(t).unwrap();
        let ft_cfg = DistillConfig { lambda: 0.0, ..DistillConfig::default() };
        let (ft, ft_grad) = ft_loss(&s, y).unwrap();
        let m = mtkd_loss(&s, std::slice::from_ref(&t), y, &ft_cfg).unwrap();
        prop_assert_eq!(m.loss.to_bits(), ft.to_bits());
        prop_assert_eq!(m.grad, ft_grad);
        let cfg = DistillConfig::default();
        let kd = kd_loss(&s, &t, y, &cfg).unwrap();
        let one = mtkd_loss(&s, std::slice::from_ref(&t), y, &cfg).unwrap();
        prop_assert_eq!(kd.loss.to_bits(), one.loss.to_bits());
        prop_assert!(one.diag.per_teacher_kl.iter().all(|&k| k >= -1e-12));
    }

    #[test]
    fn wr_is_accuracy_and_ur_is_bounded(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)
    ) {
        let (preds, labels): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let cm = confusion(&preds, &labels, 4).unwrap();
        let r = compute_metrics(&cm).unwrap();
        let acc = 100.0 * cm.trace() as f64 / cm.total() as f64;
        prop_assert!((r.wr - acc).abs() < 1e-9);
        let recalls: Vec<f64> = r.per_class_recall.iter().flatten().copied().collect();
        let lo = recalls.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = recalls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-9 <= r.ur && r.ur <= hi + 1e-9);
    }
}

#[test]
fn bootstrap_interval_brackets_point_on_random_sets() {
    let mut rng = mtkd_core::rng::Rng64::new(77);
    for case in 0..100u64 {
        let n = 30 + rng.below(150);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(4)).collect();
        let preds: Vec<usize> = labels
            .iter()
            .map(|&l| if rng.next_f64() < 0.7 { l } else { rng.below(4) })
            .collect();
        let r = compute_metrics(&confusion(&preds, &labels, 4).unwrap())
            .unwrap()
            .with_confidence_intervals(&preds, &labels, 200, case)
            .unwrap();
        for m in Metric::ALL {
            let (lo, hi) = r.ci[&m];
            assert!(lo <= m.of(&r) && m.of(&r) <= hi, "case {case} {m:?}");
        }
        let again = bootstrap_ci(&preds, &labels, 4, Metric::UR, 200, case).unwrap();
        assert_eq!(again, bootstrap_ci(&preds, &labels, 4, Metric::UR, 200, case).unwrap());
    }
}

#[test]
fn exact_metric_fixture() {
    let r = compute_metrics(&ConfusionMatrix { counts: vec![vec![1, 1], vec![0, 3]] }).unwrap();
    assert_eq!((r.ur, r.wr, r.ua, r.wa), (75.0, 80.0, 80.0, 80.0));
}
