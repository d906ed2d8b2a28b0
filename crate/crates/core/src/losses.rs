//! The hypersphere loss family.
//!
//! * [`loss_deep_svdd`]: mean squared distance to a center.
//! * [`loss_hsc`]: pseudo-Huber distance for normal samples, `p(h(.))` for
//!   anomalous ones.
//! * [`loss_fcdd_baseline`]: per-image pull term plus a push on the
//!   per-image (1/m-normalized) sum of anomalous scores.
//! * [`loss_proposed`]: pull and push applied to every pixel, averaged over
//!   the whole batch, with the push term scaled by `|J0| / |J1|`.
//!
//! The two training losses return the gradient with respect to the score
//! map; the chain through upsampling and the network lives in `model`.
//!
//! The baseline's literal push term is `p(0) = +inf` for an image without
//! anomalous pixels, so it is dropped for such images.

use alloc::vec::Vec;

use crate::error::{invalid, numerical, shape_err, Result};
use crate::math;
use crate::tensor::Tensor;

/// `sqrt(z^2 + 1) - 1`, evaluated without cancellation near zero.
#[inline]
pub fn pseudo_huber(z: f64) -> f64 {
    let r = math::sqrt(z * z + 1.0);
    z * z / (r + 1.0)
}

#[inline]
pub fn pseudo_huber_grad(z: f64) -> f64 {
    z / math::sqrt(z * z + 1.0)
}

pub fn pseudo_huber_tensor(t: &Tensor) -> Tensor {
    t.map(pseudo_huber)
}

/// Vector form `sqrt(||v||^2 + 1) - 1`.
pub fn pseudo_huber_norm(v: &[f64]) -> f64 {
    let sq: f64 = v.iter().map(|x| x * x).sum();
    sq / (math::sqrt(sq + 1.0) + 1.0)
}

/// The push function `p(s) = -log(1 - exp(-s))` for `s > 0`.
///
/// Uses `expm1` below `ln 2` and `log1p` above it; the naive form loses all
/// precision once `exp(-s)` drops under machine epsilon.
pub fn push(s: f64) -> Result<f64> {
    if s.is_nan() || s <= 0.0 {
        return Err(numerical!("push function evaluated at s = {} (needs s > 0)", s));
    }
    if s < core::f64::consts::LN_2 {
        Ok(-math::ln(-math::expm1(-s)))
    } else {
        Ok(-math::ln_1p(-math::exp(-s)))
    }
}

/// `p'(s) = -1 / (exp(s) - 1)`.
#[inline]
pub fn push_grad(s: f64) -> f64 {
    -1.0 / math::expm1(s)
}

fn check_features(features: &Tensor, center: &Tensor) -> Result<(usize, usize)> {
    let [n, d] = match *features.shape() {
        [n, d] => [n, d],
        _ => return Err(shape_err!("features must be [n, d_F], got {:?}", features.shape())),
    };
    if center.shape() != [d] {
        return Err(shape_err!("center has shape {:?}, features have d_F = {}", center.shape(), d));
    }
    Ok((n, d))
}

fn offsets<'a>(features: &'a Tensor, center: &'a Tensor) -> impl Iterator<Item = Vec<f64>> + 'a {
    let d = center.len();
    features.data().chunks_exact(d).map(move |row| row.iter().zip(center.data()).map(|(a, b)| a - b).collect())
}

/// Mean squared Euclidean distance of feature vectors to `center`.
pub fn loss_deep_svdd(features: &Tensor, center: &Tensor) -> Result<f64> {
    let (n, _) = check_features(features, center)?;
    let total: f64 = offsets(features, center).map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum();
    Ok(total / n as f64)
}

/// Sample-level hypersphere classifier loss; `labels[i]` is 1 for anomalous.
pub fn loss_hsc(features: &Tensor, center: &Tensor, labels: &[u8]) -> Result<f64> {
    let (n, _) = check_features(features, center)?;
    if labels.len() != n {
        return Err(shape_err!("{} labels for {} samples", labels.len(), n));
    }
    let mut total = 0.0;
    for (i, (v, &y)) in offsets(features, center).zip(labels).enumerate() {
        let h = pseudo_huber_norm(&v);
        total += match y {
            0 => h,
            1 => push(h).map_err(|_| numerical!("anomalous sample {} lies on the center", i))?,
            other => return Err(invalid!("label {} is not 0/1", other)),
        };
    }
    Ok(total / n as f64)
}

/// Normal (`J0`) and anomalous (`J1`) `(image, pixel)` index sets of a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelIndexSets {
    pub normal: Vec<(usize, usize)>,
    pub anomalous: Vec<(usize, usize)>,
}

impl PixelIndexSets {
    pub fn from_masks(masks: &Tensor) -> Result<Self> {
        let n = masks.shape()[0];
        let m = masks.len() / n;
        let mut normal = Vec::new();
        let mut anomalous = Vec::new();
        for (k, &y) in masks.data().iter().enumerate() {
            let idx = (k / m, k % m);
            if y == 0.0 {
                normal.push(idx);
            } else if y == 1.0 {
                anomalous.push(idx);
            } else {
                return Err(invalid!("mask value {} at flat index {} is not 0/1", y, k));
            }
        }
        Ok(Self { normal, anomalous })
    }
}

/// Loss value together with its gradient with respect to the score map.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Tensor,
}

/// Validates scores/masks and returns `(n, m)`.
fn check_maps(scores: &Tensor, masks: &Tensor) -> Result<(usize, usize)> {
    if scores.shape() != masks.shape() {
        return Err(shape_err!("score map {:?} and masks {:?} differ", scores.shape(), masks.shape()));
    }
    if let Some(k) = masks.data().iter().position(|&y| y != 0.0 && y != 1.0) {
        return Err(invalid!("mask value {} at flat index {} is not 0/1", masks.data()[k], k));
    }
    if let Some(k) = scores.data().iter().position(|&a| !a.is_finite() || a < 0.0) {
        return Err(numerical!("score {} at flat index {} is not a finite non-negative value", scores.data()[k], k));
    }
    let n = scores.shape()[0];
    Ok((n, scores.len() / n))
}

/// Per-image pull on normal pixels plus a push on `(1/m) * sum_j Y_ij A_ij`.
///
/// Images with no anomalous pixel contribute only the pull term.
pub fn loss_fcdd_baseline(scores: &Tensor, masks: &Tensor) -> Result<LossOutput> {
    let (n, m) = check_maps(scores, masks)?;
    let inv_m = 1.0 / m as f64;
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut grad = Tensor::zeros(scores.shape());
    for i in 0..n {
        let a = scores.item(i);
        let y = masks.item(i);
        let mut pull = 0.0;
        let mut pooled = 0.0;
        let mut any_anomalous = false;
        for (&s, &l) in a.iter().zip(y) {
            if l == 1.0 {
                pooled += s;
                any_anomalous = true;
            } else {
                pull += s;
            }
        }
        pull *= inv_m;
        pooled *= inv_m;
        let push_grad_i = if any_anomalous {
            value += push(pooled)
                .map_err(|_| numerical!("image {} has anomalous pixels but zero pooled anomalous score", i))?;
            push_grad(pooled)
        } else {
            0.0
        };
        value += pull;
        for (g, &l) in grad.item_mut(i).iter_mut().zip(y) {
            *g = if l == 1.0 { push_grad_i * inv_m * inv_n } else { inv_m * inv_n };
        }
    }
    Ok(LossOutput { value: value * inv_n, grad })
}

/// `|J0| / |J1|`, or 1 when either set is empty.
pub fn balance_factor(normal: usize, anomalous: usize) -> f64 {
    if normal == 0 || anomalous == 0 {
        1.0
    } else {
        normal as f64 / anomalous as f64
    }
}

/// Batch-wide mean of per-pixel pull (normal) and balanced push (anomalous).
pub fn loss_proposed(scores: &Tensor, masks: &Tensor, balance: bool) -> Result<LossOutput> {
    check_maps(scores, masks)?;
    let total = scores.len();
    let anomalous = masks.data().iter().filter(|&&y| y == 1.0).count();
    let factor = if balance { balance_factor(total - anomalous, anomalous) } else { 1.0 };
    let inv = 1.0 / total as f64;
    let mut value = 0.0;
    let mut grad = Tensor::zeros(scores.shape());
    for (k, ((&a, &y), g)) in scores.data().iter().zip(masks.data()).zip(grad.data_mut()).enumerate() {
        if y == 1.0 {
            value += factor * push(a).map_err(|_| numerical!("anomalous pixel at flat index {} has score 0", k))?;
            *g = factor * push_grad(a) * inv;
        } else {
            value += a;
            *g = inv;
        }
    }
    Ok(LossOutput { value: value * inv, grad })
}
