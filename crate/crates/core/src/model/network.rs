use alloc::vec::Vec;

use super::params::{FcnParams, Layer};
use crate::error::{numerical, shape_err, Result};
use crate::heatmap::{gaussian_upsample, gaussian_upsample_backward, DEFAULT_FACTOR};
use crate::losses::{loss_fcdd_baseline, loss_proposed, pseudo_huber, pseudo_huber_grad};
use crate::tensor::pool::{maxpool2_argmax, maxpool2_scatter};
use crate::tensor::{conv2d, conv2d_backward, conv2d_backward_params, relu, relu_backward, Tensor};

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Tensor,
    z1: Tensor,
    p1: Tensor,
    arg1: Vec<usize>,
    z2: Tensor,
    p2: Tensor,
    arg2: Vec<usize>,
    z3: Tensor,
    r3: Tensor,
}

impl ForwardCache {
    /// True when both passes took the same ReLU and max-pool branches, i.e.
    /// the network is the same smooth function around both inputs.
    pub fn same_branches(&self, other: &ForwardCache) -> bool {
        let signs = |a: &Tensor, b: &Tensor| a.data().iter().zip(b.data()).all(|(x, y)| (*x > 0.0) == (*y > 0.0));
        self.arg1 == other.arg1
            && self.arg2 == other.arg2
            && signs(&self.z1, &other.z1)
            && signs(&self.z2, &other.z2)
            && signs(&self.z3, &other.z3)
    }

    /// Smallest `|pre-activation|` over all ReLUs.
    pub fn min_relu_margin(&self) -> f64 {
        [&self.z1, &self.z2, &self.z3].iter().flat_map(|t| t.data().iter()).fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

fn check_images(params: &FcnParams, images: &Tensor) -> Result<()> {
    match *images.shape() {
        [_, c, h, w] => {
            if c != params.conv1.spec.in_channels {
                return Err(shape_err!(
                    "images have {} channels, network expects {}",
                    c,
                    params.conv1.spec.in_channels
                ));
            }
            if h % 4 != 0 || w % 4 != 0 {
                return Err(shape_err!("image height {} and width {} must be divisible by 4", h, w));
            }
            Ok(())
        }
        _ => Err(shape_err!("expected an [n,3,H,W] batch, got {:?}", images.shape())),
    }
}

fn apply(layer: &Layer, x: &Tensor) -> Result<Tensor> {
    conv2d(x, &layer.weights, &layer.bias, &layer.spec)
}

/// Pre-scores `[n,1,H/4,W/4]` together with the backward cache.
pub fn forward_cached(params: &FcnParams, images: &Tensor) -> Result<(Tensor, ForwardCache)> {
    check_images(params, images)?;
    let z1 = apply(&params.conv1, images)?;
    let (p1, arg1) = maxpool2_argmax(&relu(&z1))?;
    let z2 = apply(&params.conv2, &p1)?;
    let (p2, arg2) = maxpool2_argmax(&relu(&z2))?;
    let z3 = apply(&params.conv3, &p2)?;
    let r3 = relu(&z3);
    let out = apply(&params.head, &r3)?;
    Ok((out, ForwardCache { input: images.clone(), z1, p1, arg1, z2, p2, arg2, z3, r3 }))
}

pub fn forward(params: &FcnParams, images: &Tensor) -> Result<Tensor> {
    forward_cached(params, images).map(|(out, _)| out)
}

/// Parameter gradients of `sum(grad_out * forward(images))`.
pub fn backward(params: &FcnParams, cache: &ForwardCache, grad_out: &Tensor) -> Result<FcnParams> {
    let mut grads = FcnParams::zeros(params.config());
    let step = |layer: &Layer, input: &Tensor, g: &Tensor, slot: &mut Layer| -> Result<Tensor> {
        let cg = conv2d_backward(g, input, &layer.weights, &layer.spec)?;
        slot.weights = cg.weights;
        slot.bias = cg.bias;
        Ok(cg.input)
    };
    let g = step(&params.head, &cache.r3, grad_out, &mut grads.head)?;
    let g = relu_backward(&g, &cache.z3)?;
    let g = step(&params.conv3, &cache.p2, &g, &mut grads.conv3)?;
    let g = maxpool2_scatter(&g, &cache.arg2, cache.z2.shape())?;
    let g = relu_backward(&g, &cache.z2)?;
    let g = step(&params.conv2, &cache.p1, &g, &mut grads.conv2)?;
    let g = maxpool2_scatter(&g, &cache.arg1, cache.z1.shape())?;
    let g = relu_backward(&g, &cache.z1)?;
    let cg = conv2d_backward_params(&g, &cache.input, &params.conv1.weights, &params.conv1.spec)?;
    grads.conv1.weights = cg.weights;
    grads.conv1.bias = cg.bias;
    Ok(grads)
}

/// Which training loss to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossVariant {
    /// Per-image pull plus push on the pooled anomalous score.
    Baseline,
    /// Per-pixel pull/push over the whole batch with `|J0|/|J1|` balancing.
    Proposed,
}

impl LossVariant {
    pub fn name(&self) -> &'static str {
        match self {
            LossVariant::Baseline => "baseline",
            LossVariant::Proposed => "proposed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(LossVariant::Baseline),
            "proposed" => Some(LossVariant::Proposed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: f64,
    pub grads: FcnParams,
    pub cache: ForwardCache,
}

/// Loss on the full-resolution score map and its parameter gradients.
pub fn objective(params: &FcnParams, images: &Tensor, masks: &Tensor, variant: LossVariant) -> Result<Objective> {
    let (pre, cache) = forward_cached(params, images)?;
    let low = pre.map(pseudo_huber);
    let scores = gaussian_upsample(&low, DEFAULT_FACTOR)?;
    if masks.shape() != scores.shape() {
        return Err(shape_err!("masks {:?} do not match the score map {:?}", masks.shape(), scores.shape()));
    }
    let out = match variant {
        LossVariant::Baseline => loss_fcdd_baseline(&scores, masks)?,
        LossVariant::Proposed => loss_proposed(&scores, masks, true)?,
    };
    if !out.value.is_finite() {
        return Err(numerical!("{} loss is {}", variant.name(), out.value));
    }
    let g_low = gaussian_upsample_backward(&out.grad, low.shape(), DEFAULT_FACTOR)?;
    let g_pre = Tensor::new(
        pre.shape(),
        g_low.data().iter().zip(pre.data()).map(|(g, z)| g * pseudo_huber_grad(*z)).collect(),
    )?;
    let grads = backward(params, &cache, &g_pre)?;
    Ok(Objective { loss: out.value, grads, cache })
}
