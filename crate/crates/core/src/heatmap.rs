//! Full-resolution anomaly heatmaps: `A = upsample(h(phi(X)))`.
//!
//! Upsampling scatters every low-resolution value with a `(2f+1)^2`
//! Gaussian (sigma = f/2) at stride `f`, then divides each output pixel by
//! the kernel mass that reached it. Low pixel `i` is centered on output
//! pixel `f*i + f/2`. Because of the mass normalization a constant map stays
//! exactly constant, borders included, and the operator is linear with
//! non-negative weights.
//!
//! The 2-d kernel and its mass are separable, so the operator is applied as
//! two 1-d normalized passes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, numerical, shape_err, Result};
use crate::losses::pseudo_huber_tensor;
use crate::math;
use crate::model::{forward, FcnParams};
use crate::tensor::Tensor;

/// Upsampling factor matching the toy network's two 2x2 poolings.
pub const DEFAULT_FACTOR: usize = 4;

fn sigma(factor: usize) -> f64 {
    factor as f64 / 2.0
}

fn kernel_1d(factor: usize) -> Vec<f64> {
    let s = sigma(factor);
    let f = factor as isize;
    (-f..=f).map(|t| math::exp(-((t * t) as f64) / (2.0 * s * s))).collect()
}

/// Unnormalized isotropic Gaussian sampled at integer offsets `-f..=f`.
pub fn gaussian_kernel(factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(invalid!("upsampling factor must be >= 1"));
    }
    let s = sigma(factor);
    let size = 2 * factor + 1;
    let f = factor as isize;
    Tensor::new(
        &[size, size],
        (0..size * size)
            .map(|k| {
                let dy = (k / size) as isize - f;
                let dx = (k % size) as isize - f;
                math::exp(-((dx * dx + dy * dy) as f64) / (2.0 * s * s))
            })
            .collect(),
    )
}

/// Row-normalized 1-d interpolation weights: for every output index the
/// contributing `(low index, weight)` pairs, weights summing to one.
fn axis_weights(low: usize, factor: usize) -> Vec<Vec<(usize, f64)>> {
    let k = kernel_1d(factor);
    let f = factor as isize;
    let high = low * factor;
    let mut rows = vec![Vec::new(); high];
    for i in 0..low {
        let center = (factor * i + factor / 2) as isize;
        for t in -f..=f {
            let o = center + t;
            if o >= 0 && (o as usize) < high {
                rows[o as usize].push((i, k[(t + f) as usize]));
            }
        }
    }
    for row in &mut rows {
        let mass: f64 = row.iter().map(|&(_, w)| w).sum();
        for (_, w) in row.iter_mut() {
            *w /= mass;
        }
    }
    rows
}

fn check_low(low: &Tensor, factor: usize) -> Result<[usize; 4]> {
    if factor == 0 {
        return Err(invalid!("upsampling factor must be >= 1"));
    }
    match *low.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        _ => Err(shape_err!("expected a [n,C,h,w] map, got {:?}", low.shape())),
    }
}

/// Gaussian-kernel upsampling of `[n,C,h,w]` to `[n,C,f*h,f*w]`.
pub fn gaussian_upsample(low: &Tensor, factor: usize) -> Result<Tensor> {
    let [n, c, h, w] = check_low(low, factor)?;
    let (hh, hw) = (h * factor, w * factor);
    let wy = axis_weights(h, factor);
    let wx = axis_weights(w, factor);
    let mut out = vec![0.0; n * c * hh * hw];
    let mut tmp = vec![0.0; h * hw];
    for (plane, dst) in low.data().chunks_exact(h * w).zip(out.chunks_exact_mut(hh * hw)) {
        for y in 0..h {
            let src = &plane[y * w..(y + 1) * w];
            for (ox, row) in wx.iter().enumerate() {
                tmp[y * hw + ox] = row.iter().map(|&(i, wt)| wt * src[i]).sum();
            }
        }
        for (oy, row) in wy.iter().enumerate() {
            let line = &mut dst[oy * hw..(oy + 1) * hw];
            for &(j, wt) in row {
                for (d, s) in line.iter_mut().zip(&tmp[j * hw..(j + 1) * hw]) {
                    *d += wt * s;
                }
            }
        }
    }
    Tensor::new(&[n, c, hh, hw], out)
}

/// Adjoint of [`gaussian_upsample`] for a low-resolution map of `low_shape`.
pub fn gaussian_upsample_backward(grad_out: &Tensor, low_shape: &[usize], factor: usize) -> Result<Tensor> {
    let probe = Tensor::zeros(low_shape);
    let [n, c, h, w] = check_low(&probe, factor)?;
    let (hh, hw) = (h * factor, w * factor);
    if grad_out.shape() != [n, c, hh, hw] {
        return Err(shape_err!("grad_out has shape {:?}, upsampled shape is {:?}", grad_out.shape(), [n, c, hh, hw]));
    }
    let wy = axis_weights(h, factor);
    let wx = axis_weights(w, factor);
    let mut grad = vec![0.0; n * c * h * w];
    let mut tmp = vec![0.0; h * hw];
    for (g, dst) in grad_out.data().chunks_exact(hh * hw).zip(grad.chunks_exact_mut(h * w)) {
        tmp.fill(0.0);
        for (oy, row) in wy.iter().enumerate() {
            let line = &g[oy * hw..(oy + 1) * hw];
            for &(j, wt) in row {
                for (t, s) in tmp[j * hw..(j + 1) * hw].iter_mut().zip(line) {
                    *t += wt * s;
                }
            }
        }
        for y in 0..h {
            let src = &tmp[y * hw..(y + 1) * hw];
            let out = &mut dst[y * w..(y + 1) * w];
            for (ox, row) in wx.iter().enumerate() {
                for &(i, wt) in row {
                    out[i] += wt * src[ox];
                }
            }
        }
    }
    Tensor::new(low_shape, grad)
}

/// Non-negative anomaly heatmap at input resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    scores: Tensor,
}

impl ScoreMap {
    pub fn new(scores: Tensor) -> Result<Self> {
        if scores.ndim() != 4 || scores.shape()[1] != 1 {
            return Err(shape_err!("score map must be [n,1,H,W], got {:?}", scores.shape()));
        }
        if let Some(v) = scores.data().iter().find(|v| !v.is_finite()) {
            return Err(numerical!("score map contains non-finite value {}", v));
        }
        if let Some(v) = scores.data().iter().find(|&&v| v < 0.0) {
            return Err(invalid!("score map contains negative value {}", v));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &Tensor {
        &self.scores
    }

    pub fn into_tensor(self) -> Tensor {
        self.scores
    }
}

/// Network forward pass, pixel-wise pseudo-Huber, then Gaussian upsampling.
pub fn score_map(params: &FcnParams, images: &Tensor) -> Result<ScoreMap> {
    let pre = forward(params, images)?;
    let up = gaussian_upsample(&pseudo_huber_tensor(&pre), DEFAULT_FACTOR)?;
    ScoreMap::new(up)
}
