use alloc::vec::Vec;

use super::anomaly::{stamp_test_anomaly, AnomalyKind, StampConfig};
use super::category::{gen_normal_image, CategorySpec};
use crate::error::{invalid, Result};
use crate::rng::{Purpose, Rng};
use crate::tensor::Tensor;

/// Images per split of one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSample {
    pub image: Tensor,
    pub mask: Tensor,
    /// `None` for normal images.
    pub kind: Option<AnomalyKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryData {
    pub spec: CategorySpec,
    pub train: Vec<Tensor>,
    pub test: Vec<TestSample>,
}

/// Kind of test image `j`: even indices are normal, odd ones anomalous with
/// ellipses and strokes alternating.
pub fn test_kind(j: usize) -> Option<AnomalyKind> {
    if j.is_multiple_of(2) {
        None
    } else {
        Some(AnomalyKind::ALL[(j / 2) % AnomalyKind::ALL.len()])
    }
}

/// Generates one category. Train images use indices `0..train`, test base
/// images continue at `train..`.
pub fn gen_category(spec: &CategorySpec, rng: &Rng, counts: SplitCounts) -> Result<CategoryData> {
    let n = spec.image_size;
    let train = (0..counts.train as u64).map(|i| gen_normal_image(spec, rng, i)).collect();
    let stamps = StampConfig::for_size(n);
    let mut test = Vec::with_capacity(counts.test);
    for j in 0..counts.test {
        let base = gen_normal_image(spec, rng, (counts.train + j) as u64);
        let sample = match test_kind(j) {
            None => TestSample { image: base, mask: Tensor::zeros(&[1, n, n]), kind: None },
            Some(kind) => {
                let mut s = rng.stream(Purpose::TestStamp, spec.category_id as u64, j as u64);
                let (image, mask) = stamp_test_anomaly(&base, &mut s, kind, &stamps)?;
                TestSample { image, mask, kind: Some(kind) }
            }
        };
        test.push(sample);
    }
    Ok(CategoryData { spec: spec.clone(), train, test })
}

/// Picks one random anomalous test image per anomaly kind for
/// semi-supervised training. Returns the chosen test indices in kind order.
pub fn pick_semi_proxies(test: &[TestSample], rng: &Rng, category: u32) -> Result<Vec<usize>> {
    let mut picks = Vec::new();
    for (k, kind) in AnomalyKind::ALL.iter().enumerate() {
        let candidates: Vec<usize> = (0..test.len()).filter(|&j| test[j].kind == Some(*kind)).collect();
        if candidates.is_empty() {
            return Err(invalid!("category {} has no {} test anomaly to use as a proxy", category, kind.name()));
        }
        let r = rng.stream(Purpose::SemiPick, category as u64, u64::MAX - k as u64).index(candidates.len());
        picks.push(candidates[r]);
    }
    Ok(picks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_determinism() {
        let spec = CategorySpec::builtin(3).unwrap();
        let rng = Rng::new(11);
        let counts = SplitCounts { train: 4, test: 4 };
        let a = gen_category(&spec, &rng, counts).unwrap();
        assert_eq!(a, gen_category(&spec, &rng, counts).unwrap());
        assert_eq!(a.train.len() + a.test.len(), 8);
        for (j, t) in a.test.iter().enumerate() {
            assert_eq!(t.kind, test_kind(j));
            let ones = t.mask.sum();
            assert_eq!(ones > 0.0, t.kind.is_some());
        }
        assert_ne!(a.train[0], a.test[0].image);
    }

    #[test]
    fn semi_picks_one_per_kind() {
        let spec = CategorySpec::builtin(0).unwrap();
        let data = gen_category(&spec, &Rng::new(2), SplitCounts { train: 1, test: 8 }).unwrap();
        let picks = pick_semi_proxies(&data.test, &Rng::new(5), 0).unwrap();
        assert_eq!(picks.len(), 2);
        assert_eq!(data.test[picks[0]].kind, Some(AnomalyKind::Ellipse));
        assert_eq!(data.test[picks[1]].kind, Some(AnomalyKind::Stroke));
        assert!(pick_semi_proxies(&data.test[..2], &Rng::new(5), 0).is_err());
    }
}
