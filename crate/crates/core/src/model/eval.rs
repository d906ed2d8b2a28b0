use alloc::vec::Vec;

use super::params::FcnParams;
use crate::error::{invalid, Result};
use crate::heatmap::{score_map, ScoreMap};
use crate::metrics::category_scores;
use crate::synth::{preprocess_test, TestSample};
use crate::tensor::Tensor;

/// Images scored per forward pass.
const EVAL_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub auroc: f64,
    pub ap: f64,
    /// Heatmaps of all test images, `[n,1,size,size]`.
    pub scores: ScoreMap,
    pub masks: Tensor,
}

/// Scores a category test set after the test-time preprocessing chain and
/// computes pooled pixel AUROC/AP.
pub fn evaluate(params: &FcnParams, samples: &[TestSample], size: usize) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(invalid!("empty test set"));
    }
    let mut score_data = Vec::new();
    let mut mask_data = Vec::new();
    for chunk in samples.chunks(EVAL_CHUNK) {
        let mut images = Vec::with_capacity(chunk.len());
        for s in chunk {
            let (img, msk) = preprocess_test(&s.image, &s.mask, size)?;
            images.push(img);
            mask_data.extend_from_slice(msk.data());
        }
        let sm = score_map(params, &Tensor::stack(&images)?)?;
        score_data.extend_from_slice(sm.scores().data());
    }
    let shape = [samples.len(), 1, size, size];
    let scores = ScoreMap::new(Tensor::new(&shape, score_data)?)?;
    let masks = Tensor::new(&shape, mask_data)?;
    let (auroc, ap) = category_scores(&scores, &masks)?;
    Ok(Evaluation { auroc, ap, scores, masks })
}
