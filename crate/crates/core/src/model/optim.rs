use super::params::FcnParams;
use crate::error::{numerical, shape_err, Result};

pub const BASE_LR: f64 = 1e-3;
pub const MOMENTUM: f64 = 0.9;
pub const WEIGHT_DECAY: f64 = 1e-4;
/// Learning rate shrinks by 1.5% per epoch.
pub const LR_DECAY: f64 = 0.985;

/// `BASE_LR * LR_DECAY^epoch`.
pub fn lr_at_epoch(epoch: u32) -> f64 {
    BASE_LR * libm::pow(LR_DECAY, epoch as f64)
}

/// SGD with Nesterov momentum and L2 weight decay.
///
/// Per element: `g = grad + wd * w; v = mu * v + g; w -= lr * (g + mu * v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub velocity: FcnParams,
    pub epoch: u32,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub decay: f64,
}

impl OptState {
    pub fn new(params: &FcnParams) -> Self {
        Self {
            velocity: FcnParams::zeros(params.config()),
            epoch: 0,
            base_lr: BASE_LR,
            momentum: MOMENTUM,
            weight_decay: WEIGHT_DECAY,
            decay: LR_DECAY,
        }
    }

    pub fn lr(&self) -> f64 {
        self.base_lr * libm::pow(self.decay, self.epoch as f64)
    }
}

pub fn sgd_nesterov_step(params: &mut FcnParams, grads: &FcnParams, opt: &mut OptState) -> Result<()> {
    for (name, g) in grads.named_tensors() {
        if let Some(v) = g.data().iter().find(|v| !v.is_finite()) {
            return Err(numerical!("gradient of {} contains {}", name, v));
        }
    }
    let lr = opt.lr();
    let (mu, wd) = (opt.momentum, opt.weight_decay);
    let grads = grads.named_tensors();
    let vel = opt.velocity.tensors_mut();
    for ((w, v), (name, g)) in params.tensors_mut().into_iter().zip(vel).zip(grads) {
        if w.shape() != g.shape() || v.shape() != w.shape() {
            return Err(shape_err!(
                "{}: parameter {:?}, gradient {:?}, velocity {:?}",
                name,
                w.shape(),
                g.shape(),
                v.shape()
            ));
        }
        for ((wi, vi), gi) in w.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
            let g = gi + wd * *wi;
            *vi = mu * *vi + g;
            *wi -= lr * (g + mu * *vi);
        }
    }
    Ok(())
}
