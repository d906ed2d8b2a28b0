use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::math;
use crate::rng::{Purpose, Rng};
use crate::tensor::{ConvSpec, Tensor};

/// Channel widths of the three 3x3 stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcnConfig {
    pub widths: [usize; 3],
}

impl Default for FcnConfig {
    fn default() -> Self {
        Self { widths: [16, 32, 64] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: ConvSpec,
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Layer {
    fn zeros(spec: ConvSpec) -> Self {
        Self { weights: Tensor::zeros(&spec.weight_shape()), bias: Tensor::zeros(&[spec.out_channels]), spec }
    }
}

/// All learnable tensors of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnParams {
    pub conv1: Layer,
    pub conv2: Layer,
    pub conv3: Layer,
    pub head: Layer,
}

pub const LAYER_NAMES: [&str; 4] = ["conv1", "conv2", "conv3", "head"];

impl FcnParams {
    pub fn zeros(cfg: FcnConfig) -> Self {
        let [a, b, c] = cfg.widths;
        Self {
            conv1: Layer::zeros(ConvSpec::new(3, a, 3, 1)),
            conv2: Layer::zeros(ConvSpec::new(a, b, 3, 1)),
            conv3: Layer::zeros(ConvSpec::new(b, c, 3, 1)),
            head: Layer::zeros(ConvSpec::new(c, 1, 1, 0)),
        }
    }

    pub fn config(&self) -> FcnConfig {
        FcnConfig { widths: [self.conv1.spec.out_channels, self.conv2.spec.out_channels, self.conv3.spec.out_channels] }
    }

    pub fn layers(&self) -> [&Layer; 4] {
        [&self.conv1, &self.conv2, &self.conv3, &self.head]
    }

    pub fn layers_mut(&mut self) -> [&mut Layer; 4] {
        [&mut self.conv1, &mut self.conv2, &mut self.conv3, &mut self.head]
    }

    /// `(name, tensor)` pairs in a fixed order: weight then bias per layer.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(8);
        for (name, layer) in LAYER_NAMES.iter().zip(self.layers()) {
            out.push((alloc::format!("{name}.weight"), &layer.weights));
            out.push((alloc::format!("{name}.bias"), &layer.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(8);
        for layer in self.layers_mut() {
            out.push(&mut layer.weights);
            out.push(&mut layer.bias);
        }
        out
    }

    /// Rebuilds parameters from tensors in [`named_tensors`](Self::named_tensors) order.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != 8 {
            return Err(shape_err!("expected 8 parameter tensors, got {}", tensors.len()));
        }
        let widths = [tensors[0].shape()[0], tensors[2].shape()[0], tensors[4].shape()[0]];
        let mut params = Self::zeros(FcnConfig { widths });
        for (i, (slot, t)) in params.tensors_mut().into_iter().zip(tensors).enumerate() {
            if slot.shape() != t.shape() {
                return Err(shape_err!(
                    "{} tensor #{} has shape {:?}, architecture expects {:?}",
                    LAYER_NAMES[i / 2],
                    i,
                    t.shape(),
                    slot.shape()
                ));
            }
            *slot = t;
        }
        Ok(params)
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().iter().all(|l| l.weights.is_finite() && l.bias.is_finite())
    }
}

/// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases, head bias 1.
///
/// The head bias keeps initial scores away from the push singularity at 0.
pub fn init_with(rng: &Rng, cfg: FcnConfig) -> FcnParams {
    let mut params = FcnParams::zeros(cfg);
    for (i, layer) in params.layers_mut().into_iter().enumerate() {
        let fan_in = layer.spec.in_channels * layer.spec.kernel_size * layer.spec.kernel_size;
        let std = math::sqrt(2.0 / fan_in as f64);
        let mut s = rng.stream(Purpose::Init, i as u64, 0);
        for w in layer.weights.data_mut() {
            *w = std * s.normal();
        }
    }
    params.head.bias.data_mut()[0] = 1.0;
    params
}

pub fn init(rng: &Rng) -> FcnParams {
    init_with(rng, FcnConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        assert_eq!(init(&Rng::new(3)), init(&Rng::new(3)));
        assert_ne!(init(&Rng::new(3)), init(&Rng::new(4)));
    }

    #[test]
    fn head_bias_is_one() {
        let p = init(&Rng::new(0));
        assert_eq!(p.head.bias.data(), &[1.0]);
        assert_eq!(p.head.weights.shape(), &[1, 64, 1, 1]);
        assert!(p.conv1.bias.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn weight_scale_follows_fan_in() {
        let mut sums = [0.0f64; 4];
        let mut counts = [0usize; 4];
        for seed in 0..10 {
            let p = init(&Rng::new(seed));
            for (i, l) in p.layers().iter().enumerate() {
                sums[i] += l.weights.data().iter().map(|w| w * w).sum::<f64>();
                counts[i] += l.weights.len();
            }
        }
        let p = init(&Rng::new(0));
        for (i, l) in p.layers().iter().enumerate() {
            let fan_in = l.spec.in_channels * l.spec.kernel_size * l.spec.kernel_size;
            let expected = (2.0 / fan_in as f64).sqrt();
            let std = (sums[i] / counts[i] as f64).sqrt();
            assert!((std / expected - 1.0).abs() < 0.2, "layer {i}: {std} vs {expected}");
        }
    }

    #[test]
    fn from_tensors_round_trip_and_mismatch() {
        let p = init(&Rng::new(1));
        let ts: Vec<Tensor> = p.named_tensors().into_iter().map(|(_, t)| t.clone()).collect();
        assert_eq!(FcnParams::from_tensors(ts.clone()).unwrap(), p);
        let mut bad = ts;
        bad[7] = Tensor::zeros(&[2]);
        assert!(FcnParams::from_tensors(bad).is_err());
        assert_eq!(p.num_params(), 448 + 4640 + 18496 + 65);
    }
}
