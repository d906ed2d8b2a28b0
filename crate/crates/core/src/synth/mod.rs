//! Deterministic synthetic categories, training/test anomalies and the
//! preprocessing/augmentation chain.
//!
//! Everything here is a pure function of its configuration and an
//! [`Rng`](crate::Rng) key. Images are `[3,H,W]` tensors with values in
//! `[0,1]`; masks are `[1,H,W]` tensors with values in `{0,1}`.

mod anomaly;
mod category;
mod split;
mod transform;

pub use anomaly::{
    confetti_apply, paint_ellipse, paint_square, paint_stroke, stamp_test_anomaly, AnomalyKind, ConfettiConfig,
    StampConfig,
};
pub use category::{gen_normal_image, CategorySpec, Family, Orientation, NUM_CATEGORIES};
pub use split::{gen_category, pick_semi_proxies, test_kind, CategoryData, SplitCounts, TestSample};
pub use transform::{
    augment, color_jitter, lcn, minmax, preprocess_test, preprocess_train, resize_bilinear, resize_nearest,
    AugmentConfig, LCN_EPS,
};

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

pub(crate) fn image_dims(image: &Tensor) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(shape_err!("expected a [C,H,W] image, got {:?}", image.shape())),
    }
}
