//! Pixel-wise AUROC and average precision over pooled test pixels.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid, numerical, shape_err, Result};
use crate::heatmap::ScoreMap;
use crate::tensor::Tensor;

fn sorted_pairs(scores: &[f64], labels: &[bool], descending: bool) -> Result<Vec<(f64, bool)>> {
    if scores.len() != labels.len() {
        return Err(shape_err!("{} scores but {} labels", scores.len(), labels.len()));
    }
    if let Some(k) = scores.iter().position(|s| s.is_nan()) {
        return Err(numerical!("score at index {} is NaN", k));
    }
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    if descending {
        pairs.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    } else {
        pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    }
    Ok(pairs)
}

/// Calls `f(positives, negatives)` once per group of equal scores, in sort order.
fn for_each_tie_group(pairs: &[(f64, bool)], mut f: impl FnMut(u64, u64)) {
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        f(pos, neg);
        i = j;
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
///
/// Needs at least one label of each class.
pub fn pixel_auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pairs = sorted_pairs(scores, labels, false)?;
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(invalid!("AUROC needs both classes, got {} positive and {} negative labels", positives, negatives));
    }
    // Twice the number of (positive, negative) pairs won, as an integer.
    let mut wins2: u128 = 0;
    let mut neg_below: u128 = 0;
    for_each_tie_group(&pairs, |pos, neg| {
        wins2 += 2 * pos as u128 * neg_below + pos as u128 * neg as u128;
        neg_below += neg as u128;
    });
    Ok(wins2 as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Step-wise average precision `sum_k (R_k - R_{k-1}) P_k` over descending
/// distinct score thresholds.
pub fn pixel_ap(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pairs = sorted_pairs(scores, labels, true)?;
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    if positives == 0 {
        return Err(invalid!("AP needs at least one positive label"));
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    for_each_tie_group(&pairs, |pos, neg| {
        tp += pos;
        fp += neg;
        if pos > 0 {
            ap += (pos as f64 / positives as f64) * (tp as f64 / (tp + fp) as f64);
        }
    });
    Ok(ap)
}

/// Flattens `[n,1,H,W]` masks (values 0/1) into boolean labels.
pub fn mask_labels(masks: &Tensor) -> Result<Vec<bool>> {
    masks
        .data()
        .iter()
        .enumerate()
        .map(|(k, &y)| match y {
            0.0 => Ok(false),
            1.0 => Ok(true),
            v => Err(invalid!("mask value {} at flat index {} is not 0/1", v, k)),
        })
        .collect()
}

/// Pixel AUROC and AP of a whole category test set, all pixels pooled.
pub fn category_scores(scores: &ScoreMap, masks: &Tensor) -> Result<(f64, f64)> {
    let s = scores.scores();
    if s.shape() != masks.shape() {
        return Err(shape_err!("score maps {:?} and masks {:?} differ", s.shape(), masks.shape()));
    }
    let labels = mask_labels(masks)?;
    Ok((pixel_auroc(s.data(), &labels)?, pixel_ap(s.data(), &labels)?))
}
