//! Toy fully-convolutional one-class network and its training loop.
//!
//! `conv1(3->16) -> relu -> pool -> conv2(16->32) -> relu -> pool ->
//! conv3(32->64) -> relu -> head(64->1, 1x1)`. All 3x3 convolutions use
//! padding 1, so the output is one pre-score per 4x4 input block. The
//! hypersphere center is absorbed into the head bias.

mod eval;
mod network;
mod optim;
mod params;
mod train;

pub use eval::{evaluate, Evaluation};
pub use network::{backward, forward, forward_cached, objective, ForwardCache, LossVariant, Objective};
pub use optim::{lr_at_epoch, sgd_nesterov_step, OptState, BASE_LR, LR_DECAY, MOMENTUM, WEIGHT_DECAY};
pub use params::{init, init_with, FcnConfig, FcnParams, Layer};
pub use train::{train_run, train_run_with, EpochLog, ProxyImage, Supervision, TrainConfig, TrainSet};
