use alloc::vec::Vec;

use super::network::{objective, LossVariant};
use super::optim::{sgd_nesterov_step, OptState};
use super::params::{init_with, FcnConfig, FcnParams};
use crate::error::{invalid, numerical, Result};
use crate::rng::{Purpose, Rng};
use crate::synth::{confetti_apply, preprocess_train, AnomalyKind, AugmentConfig, ConfettiConfig};
use crate::tensor::Tensor;

/// Source of the anomalous images that replace normal ones during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Supervision {
    /// Confetti noise pasted on the normal image itself.
    Unsupervised,
    /// A few real (held-in) anomalous images, one per anomaly type.
    Semi,
}

impl Supervision {
    pub fn name(&self) -> &'static str {
        match self {
            Supervision::Unsupervised => "unsup",
            Supervision::Semi => "semi",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "unsup" | "unsupervised" => Some(Supervision::Unsupervised),
            "semi" => Some(Supervision::Semi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyImage {
    pub image: Tensor,
    pub mask: Tensor,
    pub kind: AnomalyKind,
}

/// In-memory training split of one category.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSet {
    pub category: u32,
    pub normals: Vec<Tensor>,
    pub proxies: Vec<ProxyImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: LossVariant,
    pub supervision: Supervision,
    pub epochs: u32,
    pub batch_size: usize,
    /// Passes over the training set per epoch.
    pub passes_per_epoch: u32,
    /// Probability that an image is swapped for an anomalous one.
    pub replace_prob: f64,
    pub augment: AugmentConfig,
    pub confetti: ConfettiConfig,
    pub net: FcnConfig,
}

impl TrainConfig {
    pub fn new(variant: LossVariant, supervision: Supervision) -> Self {
        let augment = AugmentConfig::default();
        Self {
            variant,
            supervision,
            epochs: 50,
            batch_size: 16,
            passes_per_epoch: 10,
            replace_prob: 0.5,
            confetti: ConfettiConfig::for_size(augment.base_size),
            augment,
            net: FcnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: u32,
    pub mean_loss: f64,
    pub lr: f64,
}

/// Draws, anomalizes and preprocesses training sample `idx` of iteration `key`.
fn sample(set: &TrainSet, cfg: &TrainConfig, rng: &Rng, key: u64, idx: usize) -> Result<(Tensor, Tensor)> {
    let normal = &set.normals[idx];
    let (h, w) = (normal.shape()[1], normal.shape()[2]);
    let replace = rng.stream(Purpose::Replace, key, idx as u64).bernoulli(cfg.replace_prob);
    let (image, mask) = match (replace, cfg.supervision) {
        (false, _) => (normal.clone(), Tensor::zeros(&[1, h, w])),
        (true, Supervision::Unsupervised) => {
            let confetti =
                ConfettiConfig { size: (cfg.confetti.size.0, cfg.confetti.size.1.min(h.min(w))), ..cfg.confetti };
            confetti_apply(normal, &mut rng.stream(Purpose::Confetti, key, idx as u64), &confetti)?
        }
        (true, Supervision::Semi) => {
            let pick = rng.stream(Purpose::SemiPick, key, idx as u64).index(set.proxies.len());
            let p = &set.proxies[pick];
            (p.image.clone(), p.mask.clone())
        }
    };
    preprocess_train(&image, &mask, &mut rng.stream(Purpose::Augment, key, idx as u64), &cfg.augment)
}

/// Trains a fresh network; see [`train_run_with`].
pub fn train_run(set: &TrainSet, cfg: &TrainConfig, seed: u64) -> Result<(FcnParams, Vec<EpochLog>)> {
    train_run_with(set, cfg, seed, |_| {})
}

/// Runs `cfg.epochs` epochs of `cfg.passes_per_epoch` shuffled passes, each
/// image independently replaced by an anomalous one with `replace_prob`
/// (re-drawn every pass), augmented, normalized and batched.
///
/// The result is a pure function of `(set, cfg, seed)`.
pub fn train_run_with(
    set: &TrainSet,
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(FcnParams, Vec<EpochLog>)> {
    if set.normals.is_empty() {
        return Err(invalid!("category {} has no training images", set.category));
    }
    if cfg.supervision == Supervision::Semi && set.proxies.is_empty() {
        return Err(invalid!("semi-supervised training of category {} needs anomalous proxy images", set.category));
    }
    if cfg.batch_size == 0 {
        return Err(invalid!("batch_size must be positive"));
    }
    let rng = Rng::new(seed);
    let mut params = init_with(&rng, cfg.net);
    let mut opt = OptState::new(&params);
    let mut log = Vec::with_capacity(cfg.epochs as usize);
    for epoch in 0..cfg.epochs {
        opt.epoch = epoch;
        let mut losses = Vec::new();
        for pass in 0..cfg.passes_per_epoch {
            let key = epoch as u64 * cfg.passes_per_epoch as u64 + pass as u64;
            let mut order: Vec<usize> = (0..set.normals.len()).collect();
            rng.stream(Purpose::Shuffle, key, 0).shuffle(&mut order);
            for chunk in order.chunks(cfg.batch_size) {
                let mut images = Vec::with_capacity(chunk.len());
                let mut masks = Vec::with_capacity(chunk.len());
                for &idx in chunk {
                    let (img, msk) = sample(set, cfg, &rng, key, idx)?;
                    images.push(img);
                    masks.push(msk);
                }
                let images = Tensor::stack(&images)?;
                let masks = Tensor::stack(&masks)?;
                let obj = objective(&params, &images, &masks, cfg.variant)?;
                sgd_nesterov_step(&mut params, &obj.grads, &mut opt)?;
                if !params.is_finite() {
                    return Err(numerical!("parameters became non-finite at epoch {}", epoch));
                }
                losses.push(obj.loss);
            }
        }
        let entry = EpochLog { epoch, mean_loss: losses.iter().sum::<f64>() / losses.len() as f64, lr: opt.lr() };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_normal_image, CategorySpec};

    fn tiny_set(n: usize) -> TrainSet {
        let spec = CategorySpec { image_size: 16, ..CategorySpec::builtin(0).unwrap() };
        let rng = Rng::new(1);
        TrainSet {
            category: 0,
            normals: (0..n as u64).map(|i| gen_normal_image(&spec, &rng, i)).collect(),
            proxies: Vec::new(),
        }
    }

    fn tiny_cfg(variant: LossVariant) -> TrainConfig {
        let mut cfg = TrainConfig::new(variant, Supervision::Unsupervised);
        cfg.augment.base_size = 18;
        cfg.augment.out_size = 16;
        cfg.confetti = ConfettiConfig::for_size(18);
        cfg.net = FcnConfig { widths: [4, 4, 4] };
        cfg.batch_size = 4;
        cfg.passes_per_epoch = 2;
        cfg
    }

    #[test]
    fn zero_epochs_returns_init() {
        let cfg = TrainConfig { epochs: 0, ..tiny_cfg(LossVariant::Proposed) };
        let (p, log) = train_run(&tiny_set(3), &cfg, 5).unwrap();
        assert!(log.is_empty());
        assert_eq!(p, init_with(&Rng::new(5), cfg.net));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = TrainConfig { epochs: 2, ..tiny_cfg(LossVariant::Baseline) };
        let set = tiny_set(5);
        let (a, la) = train_run(&set, &cfg, 9).unwrap();
        let (b, lb) = train_run(&set, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = train_run(&set, &cfg, 10).unwrap();
        assert_ne!(a, c);
        assert_eq!(la.len(), 2);
        assert!(la[1].lr < la[0].lr);
    }

    #[test]
    fn rejects_empty_inputs() {
        let cfg = tiny_cfg(LossVariant::Proposed);
        assert!(train_run(&tiny_set(0), &cfg, 1).is_err());
        let semi = TrainConfig { supervision: Supervision::Semi, ..cfg };
        assert!(train_run(&tiny_set(2), &semi, 1).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [LossVariant::Baseline, LossVariant::Proposed] {
            assert_eq!(LossVariant::from_name(v.name()), Some(v));
        }
        assert_eq!(LossVariant::from_name("other"), None);
        assert_eq!(Supervision::from_name("unsup"), Some(Supervision::Unsupervised));
        assert_eq!(Supervision::from_name("semi"), Some(Supervision::Semi));
    }
}
