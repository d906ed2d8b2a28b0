//! Geometric and photometric transforms.
//!
//! Training chain: resize to `base_size`; resize or random-crop to
//! `out_size` (coin flip); color jitter with a strong or a faint strength
//! (coin flip); per-pixel gated Gaussian noise; then [`lcn`] and [`minmax`].
//! Test chain: resize to `out_size`, [`lcn`], [`minmax`].
//!
//! Color jitter applies, in this order, brightness `x*b`, contrast
//! `(x-m)*c + m` around the mean luma `m`, saturation `g + (x-g)*s` around
//! each pixel's luma `g`, and a hue rotation of `d` turns, with
//! `b, c, s ~ U[1-strength, 1+strength]` and `d ~ U[-strength, strength]`,
//! clamping to `[0,1]` after every step. Masks only ever see the geometric
//! steps.

use alloc::vec::Vec;

use super::image_dims;
use crate::error::{invalid, Result};
use crate::math;
use crate::rng::Stream;
use crate::tensor::Tensor;

pub const LCN_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub base_size: usize,
    pub out_size: usize,
    /// Probability of the random-crop branch (otherwise plain resize).
    pub crop_prob: f64,
    pub jitter_strong: f64,
    pub jitter_faint: f64,
    /// Probability of the strong jitter strength.
    pub jitter_strong_prob: f64,
    /// Probability that a pixel receives noise.
    pub noise_pixel_prob: f64,
    /// Noise sigma relative to the std of all image values.
    pub noise_rel_std: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            base_size: 69,
            out_size: 64,
            crop_prob: 0.5,
            jitter_strong: 0.04,
            jitter_faint: 0.0005,
            jitter_strong_prob: 0.5,
            noise_pixel_prob: 0.5,
            noise_rel_std: 0.1,
        }
    }
}

/// Bilinear resize with half-pixel centers (edge-clamped).
pub fn resize_bilinear(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = image_dims(image)?;
    if out_h == 0 || out_w == 0 {
        return Err(invalid!("target size must be positive, got {}x{}", out_h, out_w));
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = math::floor(src) as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let ty = taps(out_h, h);
    let tx = taps(out_w, w);
    let src = image.data();
    let mut out = Tensor::zeros(&[c, out_h, out_w]);
    let dst = out.data_mut();
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                dst[(ch * out_h + oy) * out_w + ox] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour resize (half-pixel centers); keeps masks binary.
pub fn resize_nearest(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = image_dims(image)?;
    if out_h == 0 || out_w == 0 {
        return Err(invalid!("target size must be positive, got {}x{}", out_h, out_w));
    }
    let pick = |o: usize, out: usize, inp: usize| {
        (math::floor((o as f64 + 0.5) * inp as f64 / out as f64) as usize).min(inp - 1)
    };
    let mut out = Tensor::zeros(&[c, out_h, out_w]);
    for ch in 0..c {
        for oy in 0..out_h {
            let y = pick(oy, out_h, h);
            for ox in 0..out_w {
                let x = pick(ox, out_w, w);
                out.data_mut()[(ch * out_h + oy) * out_w + ox] = image.data()[(ch * h + y) * w + x];
            }
        }
    }
    Ok(out)
}

fn crop(image: &Tensor, top: usize, left: usize, size: usize) -> Tensor {
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    debug_assert!(top + size <= h && left + size <= w);
    let mut out = Tensor::zeros(&[c, size, size]);
    for ch in 0..c {
        for y in 0..size {
            let src = &image.data()[(ch * h + top + y) * w + left..][..size];
            out.data_mut()[(ch * size + y) * size..][..size].copy_from_slice(src);
        }
    }
    out
}

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn luma(r: f64, g: f64, b: f64) -> f64 {
    LUMA[0] * r + LUMA[1] * g + LUMA[2] * b
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        math::rem_euclid((g - b) / d, 6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = math::rem_euclid(h, 1.0) * 6.0;
    let i = math::floor(h6);
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Random brightness, contrast, saturation and hue perturbation of `strength`.
pub fn color_jitter(image: &Tensor, strength: f64, rng: &mut Stream) -> Result<Tensor> {
    let (c, h, w) = image_dims(image)?;
    if c != 3 {
        return Err(invalid!("color jitter needs 3 channels, got {}", c));
    }
    if strength == 0.0 {
        return Ok(image.clone());
    }
    let brightness = rng.uniform_in(1.0 - strength, 1.0 + strength);
    let contrast = rng.uniform_in(1.0 - strength, 1.0 + strength);
    let saturation = rng.uniform_in(1.0 - strength, 1.0 + strength);
    let hue = rng.uniform_in(-strength, strength);
    let n = h * w;
    let mut px: Vec<[f64; 3]> = (0..n).map(|p| core::array::from_fn(|ch| image.data()[ch * n + p])).collect();
    for v in px.iter_mut().flatten() {
        *v = (*v * brightness).clamp(0.0, 1.0);
    }
    let m = px.iter().map(|p| luma(p[0], p[1], p[2])).sum::<f64>() / n as f64;
    for v in px.iter_mut().flatten() {
        *v = ((*v - m) * contrast + m).clamp(0.0, 1.0);
    }
    for p in px.iter_mut() {
        let g = luma(p[0], p[1], p[2]);
        for v in p.iter_mut() {
            *v = (g + (*v - g) * saturation).clamp(0.0, 1.0);
        }
    }
    for p in px.iter_mut() {
        let (hh, s, v) = rgb_to_hsv(p[0], p[1], p[2]);
        let (r, g, b) = hsv_to_rgb(hh + hue, s, v);
        *p = [r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0)];
    }
    let mut out = Tensor::zeros(&[3, h, w]);
    for (p, v) in px.iter().enumerate() {
        for (ch, &c) in v.iter().enumerate() {
            out.data_mut()[ch * n + p] = c;
        }
    }
    Ok(out)
}

/// Adds `N(0, (rel_std * std(image))^2)` to every channel of a pixel with
/// probability `pixel_prob` per pixel.
fn gated_noise(image: &mut Tensor, pixel_prob: f64, rel_std: f64, rng: &mut Stream) {
    if pixel_prob <= 0.0 || rel_std == 0.0 {
        return;
    }
    let sigma = rel_std * math::std_dev(image.data());
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let n = h * w;
    for p in 0..n {
        if rng.bernoulli(pixel_prob) {
            for ch in 0..c {
                image.data_mut()[ch * n + p] += sigma * rng.normal();
            }
        }
    }
}

/// Geometric + photometric augmentation (everything before normalization).
pub fn augment(image: &Tensor, mask: &Tensor, rng: &mut Stream, cfg: &AugmentConfig) -> Result<(Tensor, Tensor)> {
    if cfg.out_size > cfg.base_size {
        return Err(invalid!("out_size {} exceeds base_size {}", cfg.out_size, cfg.base_size));
    }
    let big = resize_bilinear(image, cfg.base_size, cfg.base_size)?;
    let big_mask = resize_nearest(mask, cfg.base_size, cfg.base_size)?;
    let (img, msk) = if rng.bernoulli(cfg.crop_prob) {
        let span = cfg.base_size - cfg.out_size;
        let top = rng.index(span + 1);
        let left = rng.index(span + 1);
        (crop(&big, top, left, cfg.out_size), crop(&big_mask, top, left, cfg.out_size))
    } else {
        (resize_bilinear(&big, cfg.out_size, cfg.out_size)?, resize_nearest(&big_mask, cfg.out_size, cfg.out_size)?)
    };
    let strength = if rng.bernoulli(cfg.jitter_strong_prob) { cfg.jitter_strong } else { cfg.jitter_faint };
    let mut img = color_jitter(&img, strength, rng)?;
    gated_noise(&mut img, cfg.noise_pixel_prob, cfg.noise_rel_std, rng);
    Ok((img, msk))
}

/// Global contrast normalization with all channels pooled:
/// `(x - mean) / max(mean |x - mean|, eps)`.
pub fn lcn(image: &Tensor) -> Tensor {
    let mu = image.mean();
    let mad = image.data().iter().map(|v| (v - mu).abs()).sum::<f64>() / image.len() as f64;
    let d = mad.max(LCN_EPS);
    image.map(|v| (v - mu) / d)
}

/// `(x - min) / (max - min)`; a constant image maps to 0.5 everywhere.
pub fn minmax(image: &Tensor) -> Tensor {
    let (lo, hi) = (image.min(), image.max());
    if hi > lo {
        image.map(|v| (v - lo) / (hi - lo))
    } else {
        image.map(|_| 0.5)
    }
}

/// Full training-time chain for one image/mask pair.
pub fn preprocess_train(
    image: &Tensor,
    mask: &Tensor,
    rng: &mut Stream,
    cfg: &AugmentConfig,
) -> Result<(Tensor, Tensor)> {
    let (img, msk) = augment(image, mask, rng, cfg)?;
    Ok((minmax(&lcn(&img)), msk))
}

/// Test-time chain: resize, then normalization only.
pub fn preprocess_test(image: &Tensor, mask: &Tensor, size: usize) -> Result<(Tensor, Tensor)> {
    let img = resize_bilinear(image, size, size)?;
    let msk = resize_nearest(mask, size, size)?;
    Ok((minmax(&lcn(&img)), msk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, Rng};
    use alloc::vec;

    fn random_image(seed: u64, c: usize, h: usize, w: usize) -> Tensor {
        let mut s = Rng::new(seed).stream(Purpose::Check, 0, 0);
        Tensor::from_fn(&[c, h, w], |_| s.uniform())
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = random_image(1, 3, 7, 9);
        assert_eq!(resize_bilinear(&img, 7, 9).unwrap(), img);
        assert_eq!(resize_nearest(&img, 7, 9).unwrap(), img);
        let c = Tensor::full(&[3, 5, 5], 0.3);
        for (h, w) in [(2, 3), (11, 17), (64, 64)] {
            let r = resize_bilinear(&c, h, w).unwrap();
            assert!(r.data().iter().all(|v| (v - 0.3).abs() < 1e-15));
        }
    }

    #[test]
    fn bilinear_two_to_four_hand_weights() {
        // half-pixel centers: output rows sample input rows at
        // -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1)
        let img = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = resize_bilinear(&img, 4, 4).unwrap();
        let wts = [(1.0, 0.0), (0.75, 0.25), (0.25, 0.75), (0.0, 1.0)];
        for (oy, &(ay, by)) in wts.iter().enumerate() {
            for (ox, &(ax, bx)) in wts.iter().enumerate() {
                let top = 1.0 * ax + 2.0 * bx;
                let bot = 3.0 * ax + 4.0 * bx;
                let e = top * ay + bot * by;
                assert!((r.data()[oy * 4 + ox] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nearest_keeps_masks_binary() {
        let mut s = Rng::new(2).stream(Purpose::Check, 0, 0);
        let m = Tensor::from_fn(&[1, 64, 64], |_| if s.bernoulli(0.2) { 1.0 } else { 0.0 });
        let r = resize_nearest(&m, 69, 69).unwrap();
        assert!(r.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn degenerate_augment_is_resize_chain() {
        let img = random_image(3, 3, 64, 64);
        let mask = Tensor::zeros(&[1, 64, 64]);
        let cfg = AugmentConfig {
            crop_prob: 0.0,
            jitter_strong: 0.0,
            jitter_faint: 0.0,
            noise_pixel_prob: 0.0,
            ..AugmentConfig::default()
        };
        let mut s = Rng::new(4).stream(Purpose::Augment, 0, 0);
        let (out, _) = augment(&img, &mask, &mut s, &cfg).unwrap();
        let expected = resize_bilinear(&resize_bilinear(&img, 69, 69).unwrap(), 64, 64).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn crop_moves_mask_with_image() {
        let img = random_image(5, 3, 64, 64);
        let mut mask = Tensor::zeros(&[1, 64, 64]);
        for p in [100, 200, 1000, 2080, 4000] {
            mask.data_mut()[p] = 1.0;
        }
        let cfg = AugmentConfig { crop_prob: 1.0, noise_pixel_prob: 0.0, ..AugmentConfig::default() };
        let big_mask = resize_nearest(&mask, 69, 69).unwrap();
        for i in 0..50 {
            let mut s = Rng::new(6).stream(Purpose::Augment, 0, i);
            let (_, m) = augment(&img, &mask, &mut s, &cfg).unwrap();
            // replay the crop offsets from an identical stream
            let mut r = Rng::new(6).stream(Purpose::Augment, 0, i);
            assert!(r.bernoulli(1.0));
            let (top, left) = (r.index(6), r.index(6));
            let window = crop(&big_mask, top, left, 64);
            assert_eq!(m, window);
            assert_eq!(m.sum(), window.sum());
        }
    }

    #[test]
    fn jitter_stays_in_range_and_zero_is_identity() {
        let img = random_image(7, 3, 16, 16);
        let mut s = Rng::new(8).stream(Purpose::Augment, 0, 0);
        assert_eq!(color_jitter(&img, 0.0, &mut s).unwrap(), img);
        let j = color_jitter(&img, 0.04, &mut s).unwrap();
        assert!(j.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let diff: f64 = j.data().iter().zip(img.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / img.len() as f64;
        assert!(diff > 0.0 && diff < 0.1);
    }

    #[test]
    fn hsv_round_trip() {
        let img = random_image(9, 3, 8, 8);
        for p in 0..64 {
            let (r, g, b) = (img.data()[p], img.data()[64 + p], img.data()[128 + p]);
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            assert!((r - r2).abs() < 1e-12 && (g - g2).abs() < 1e-12 && (b - b2).abs() < 1e-12);
        }
    }

    #[test]
    fn lcn_properties() {
        assert!(lcn(&Tensor::full(&[3, 4, 4], 0.7)).data().iter().all(|v| v.abs() < 1e-6));
        for seed in 0..20 {
            let img = random_image(seed, 3, 12, 12);
            let once = lcn(&img);
            assert!(once.mean().abs() < 1e-9);
            let mad = once.data().iter().map(|v| v.abs()).sum::<f64>() / once.len() as f64;
            assert!((mad - 1.0).abs() < 1e-9);
            let twice = lcn(&once);
            for (a, b) in once.data().iter().zip(twice.data()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn minmax_properties() {
        let t = Tensor::new(&[2], vec![-1.0, 3.0]).unwrap();
        assert_eq!(minmax(&t).data(), &[0.0, 1.0]);
        assert!(minmax(&Tensor::full(&[3], 2.0)).data().iter().all(|&v| v == 0.5));
        let r = minmax(&random_image(11, 3, 5, 5).scale(7.0));
        assert_eq!((r.min(), r.max()), (0.0, 1.0));
    }
}
