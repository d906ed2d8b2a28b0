use fcdd_core::metrics::{pixel_ap, pixel_auroc};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..120)
        .prop_flat_map(|n| (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(any::<bool>(), n)))
        .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
}

proptest! {
    #[test]
    fn invariant_under_increasing_transforms((s, l) in instance()) {
        let t: Vec<f64> = s.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
        prop_assert_eq!(pixel_auroc(&s, &l).unwrap(), pixel_auroc(&t, &l).unwrap());
        prop_assert_eq!(pixel_ap(&s, &l).unwrap(), pixel_ap(&t, &l).unwrap());
    }

    #[test]
    fn negation_complements_auroc((s, l) in instance()) {
        let mut sorted = s.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let sum = pixel_auroc(&s, &l).unwrap() + pixel_auroc(&neg, &l).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariant((s, l) in instance(), seed in any::<u64>()) {
        let n = s.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            idx.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let ps: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let pl: Vec<bool> = idx.iter().map(|&i| l[i]).collect();
        prop_assert_eq!(pixel_auroc(&s, &l).unwrap(), pixel_auroc(&ps, &pl).unwrap());
        prop_assert_eq!(pixel_ap(&s, &l).unwrap(), pixel_ap(&ps, &pl).unwrap());
    }

    #[test]
    fn ranges((s, l) in instance()) {
        let a = pixel_auroc(&s, &l).unwrap();
        let p = pixel_ap(&s, &l).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(p > 0.0 && p <= 1.0);
    }
}

mod pooling {
    use fcdd_core::heatmap::ScoreMap;
    use fcdd_core::metrics::{category_scores, mask_labels, pixel_auroc};
    use fcdd_core::Tensor;

    #[test]
    fn category_scores_pool_pixels_across_images() {
        // Per-image AUROCs are 1 and 1/3; the pooled value differs from their mean.
        let scores = vec![0.1, 0.2, 0.3, 0.9, 0.6, 0.7, 0.8, 0.65];
        let masks = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let s = ScoreMap::new(Tensor::new(&[2, 1, 2, 2], scores.clone()).unwrap()).unwrap();
        let m = Tensor::new(&[2, 1, 2, 2], masks.clone()).unwrap();
        let (auroc, _) = category_scores(&s, &m).unwrap();
        let labels = mask_labels(&m).unwrap();
        assert_eq!(auroc, pixel_auroc(&scores, &labels).unwrap());
        assert_eq!(auroc, 10.0 / 12.0);
        assert_eq!(pixel_auroc(&scores[..4], &labels[..4]).unwrap(), 1.0);
        assert_eq!(pixel_auroc(&scores[4..], &labels[4..]).unwrap(), 1.0 / 3.0);

        let swapped: Vec<f64> = scores[4..].iter().chain(&scores[..4]).copied().collect();
        let swapped_m: Vec<f64> = masks[4..].iter().chain(&masks[..4]).copied().collect();
        let s2 = ScoreMap::new(Tensor::new(&[2, 1, 2, 2], swapped).unwrap()).unwrap();
        let m2 = Tensor::new(&[2, 1, 2, 2], swapped_m).unwrap();
        assert_eq!(category_scores(&s2, &m2).unwrap(), category_scores(&s, &m).unwrap());
    }
}
