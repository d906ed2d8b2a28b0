//! Finite-difference verification of every hand-written adjoint.
//!
//! Each op is checked on randomized small instances: analytic gradients of a
//! random linear functional of the op output are compared to central
//! differences at sampled coordinates. Probes that cross a ReLU or max-pool
//! branch are discarded and redrawn.

use alloc::vec::Vec;

use crate::error::Result;
use crate::heatmap::{gaussian_upsample, gaussian_upsample_backward};
use crate::losses::{pseudo_huber, pseudo_huber_grad};
use crate::model::{forward_cached, init_with, objective, FcnConfig, FcnParams, LossVariant};
use crate::rng::{Purpose, Rng, Stream};
use crate::tensor::pool::maxpool2_argmax;
use crate::tensor::{conv2d, conv2d_backward, maxpool2_backward, ConvSpec, Tensor};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
/// Gradient magnitudes below this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-3;

pub const OPS: [&str; 6] = ["conv", "maxpool", "head", "upsample", "baseline", "proposed"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub cases_per_op: usize,
    pub coords_per_case: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { cases_per_op: 50, coords_per_case: 6, seed: 2024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpReport {
    pub op: &'static str,
    pub cases: usize,
    pub checked: usize,
    /// Probes discarded because they crossed a non-smooth point.
    pub skipped: usize,
    pub max_rel_err: f64,
}

impl OpReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_err <= REL_TOL
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn random_tensor(rng: &mut Stream, shape: &[usize], scale: f64) -> Tensor {
    Tensor::from_fn(shape, |_| scale * rng.normal())
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

struct Tally {
    op: &'static str,
    cases: usize,
    checked: usize,
    skipped: usize,
    max_rel_err: f64,
}

impl Tally {
    fn new(op: &'static str) -> Self {
        Self { op, cases: 0, checked: 0, skipped: 0, max_rel_err: 0.0 }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        let e = rel_error(analytic, numeric);
        if e.is_nan() || e > self.max_rel_err {
            self.max_rel_err = e;
        }
    }

    fn report(self) -> OpReport {
        OpReport {
            op: self.op,
            cases: self.cases,
            checked: self.checked,
            skipped: self.skipped,
            max_rel_err: self.max_rel_err,
        }
    }
}

/// Central difference of `f` along coordinate `k` of `x`.
fn central(x: &Tensor, k: usize, mut f: impl FnMut(&Tensor) -> Result<f64>) -> Result<f64> {
    let mut plus = x.clone();
    plus.data_mut()[k] += STEP;
    let mut minus = x.clone();
    minus.data_mut()[k] -= STEP;
    Ok((f(&plus)? - f(&minus)?) / (2.0 * STEP))
}

fn check_conv(rng: &mut Stream, cfg: &GradCheckConfig, t: &mut Tally) -> Result<()> {
    let k = if rng.bernoulli(0.5) { 3 } else { 1 };
    let pad = if rng.bernoulli(0.5) { k / 2 } else { 0 };
    let spec = ConvSpec::new(1 + rng.index(3), 1 + rng.index(3), k, pad);
    let n = 1 + rng.index(2);
    let (h, w) = (3 + rng.index(4), 3 + rng.index(4));
    let x = random_tensor(rng, &[n, spec.in_channels, h, w], 1.0);
    let wt = random_tensor(rng, &spec.weight_shape(), 0.5);
    let b = random_tensor(rng, &[spec.out_channels], 0.5);
    let out = conv2d(&x, &wt, &b, &spec)?;
    let r = random_tensor(rng, out.shape(), 1.0);
    let g = conv2d_backward(&r, &x, &wt, &spec)?;
    for _ in 0..cfg.coords_per_case {
        let i = rng.index(x.len());
        let num = central(&x, i, |xx| Ok(dot(&r, &conv2d(xx, &wt, &b, &spec)?)))?;
        t.record(g.input.data()[i], num);
        let i = rng.index(wt.len());
        let num = central(&wt, i, |ww| Ok(dot(&r, &conv2d(&x, ww, &b, &spec)?)))?;
        t.record(g.weights.data()[i], num);
        let i = rng.index(b.len());
        let num = central(&b, i, |bb| Ok(dot(&r, &conv2d(&x, &wt, bb, &spec)?)))?;
        t.record(g.bias.data()[i], num);
    }
    Ok(())
}

fn check_pool(rng: &mut Stream, cfg: &GradCheckConfig, t: &mut Tally) -> Result<()> {
    let shape = [1 + rng.index(2), 1 + rng.index(3), 2 * (1 + rng.index(3)), 2 * (1 + rng.index(3))];
    let x = random_tensor(rng, &shape, 1.0);
    let (out, arg) = maxpool2_argmax(&x)?;
    let r = random_tensor(rng, out.shape(), 1.0);
    let g = maxpool2_backward(&r, &x)?;
    let mut done = 0;
    let mut tries = 0;
    while done < cfg.coords_per_case && tries < 20 * cfg.coords_per_case {
        tries += 1;
        let i = rng.index(x.len());
        let mut same = true;
        let num = central(&x, i, |xx| {
            let (o, a) = maxpool2_argmax(xx)?;
            same &= a == arg;
            Ok(dot(&r, &o))
        })?;
        if !same {
            t.skipped += 1;
            continue;
        }
        t.record(g.data()[i], num);
        done += 1;
    }
    Ok(())
}

/// 1x1 projection to one channel followed by pseudo-Huber.
fn check_head(rng: &mut Stream, cfg: &GradCheckConfig, t: &mut Tally) -> Result<()> {
    let spec = ConvSpec::new(1 + rng.index(6), 1, 1, 0);
    let shape = [1 + rng.index(2), spec.in_channels, 1 + rng.index(4), 1 + rng.index(4)];
    let x = random_tensor(rng, &shape, 1.0);
    let wt = random_tensor(rng, &spec.weight_shape(), 1.0);
    let b = random_tensor(rng, &[1], 1.0);
    let f =
        |xx: &Tensor, ww: &Tensor, bb: &Tensor| -> Result<Tensor> { Ok(conv2d(xx, ww, bb, &spec)?.map(pseudo_huber)) };
    let z = conv2d(&x, &wt, &b, &spec)?;
    let r = random_tensor(rng, z.shape(), 1.0);
    let gz = Tensor::new(z.shape(), z.data().iter().zip(r.data()).map(|(z, r)| r * pseudo_huber_grad(*z)).collect())?;
    let g = conv2d_backward(&gz, &x, &wt, &spec)?;
    for _ in 0..cfg.coords_per_case {
        let i = rng.index(x.len());
        let num = central(&x, i, |xx| Ok(dot(&r, &f(xx, &wt, &b)?)))?;
        t.record(g.input.data()[i], num);
        let i = rng.index(wt.len());
        let num = central(&wt, i, |ww| Ok(dot(&r, &f(&x, ww, &b)?)))?;
        t.record(g.weights.data()[i], num);
        let num = central(&b, 0, |bb| Ok(dot(&r, &f(&x, &wt, bb)?)))?;
        t.record(g.bias.data()[0], num);
    }
    Ok(())
}

fn check_upsample(rng: &mut Stream, cfg: &GradCheckConfig, t: &mut Tally) -> Result<()> {
    let factor = 1 + rng.index(4);
    let shape = [1 + rng.index(2), 1 + rng.index(2), 1 + rng.index(4), 1 + rng.index(4)];
    let x = random_tensor(rng, &shape, 1.0);
    let out = gaussian_upsample(&x, factor)?;
    let r = random_tensor(rng, out.shape(), 1.0);
    let g = gaussian_upsample_backward(&r, &shape, factor)?;
    for _ in 0..cfg.coords_per_case {
        let i = rng.index(x.len());
        let num = central(&x, i, |xx| Ok(dot(&r, &gaussian_upsample(xx, factor)?)))?;
        t.record(g.data()[i], num);
    }
    Ok(())
}

fn random_masks(rng: &mut Stream, n: usize, h: usize, w: usize) -> Tensor {
    let mut masks = Tensor::zeros(&[n, 1, h, w]);
    for i in 0..n {
        if i > 0 && rng.bernoulli(0.5) {
            continue;
        }
        let (y0, x0) = (rng.index(h), rng.index(w));
        let (y1, x1) = (y0 + 1 + rng.index(h - y0), x0 + 1 + rng.index(w - x0));
        let item = masks.item_mut(i);
        for y in y0..y1 {
            for x in x0..x1 {
                item[y * w + x] = 1.0;
            }
        }
    }
    masks
}

fn check_end_to_end(
    rng: &mut Stream,
    cfg: &GradCheckConfig,
    t: &mut Tally,
    variant: LossVariant,
    case: u64,
) -> Result<()> {
    let net = FcnConfig { widths: [1 + rng.index(3), 1 + rng.index(3), 1 + rng.index(3)] };
    let params = init_with(&Rng::new(cfg.seed).child(Purpose::Check, case), net);
    let n = 1 + rng.index(3);
    let (h, w) = (4 * (1 + rng.index(3)), 4 * (1 + rng.index(3)));
    let images = Tensor::from_fn(&[n, 3, h, w], |_| rng.uniform());
    let masks = random_masks(rng, n, h, w);
    let base = objective(&params, &images, &masks, variant)?;
    let grads: Vec<Tensor> = base.grads.named_tensors().into_iter().map(|(_, g)| g.clone()).collect();
    let loss_at = |p: &FcnParams| -> Result<(f64, bool)> {
        let (_, cache) = forward_cached(p, &images)?;
        Ok((objective(p, &images, &masks, variant)?.loss, cache.same_branches(&base.cache)))
    };
    let mut done = 0;
    let mut tries = 0;
    while done < cfg.coords_per_case && tries < 20 * cfg.coords_per_case {
        tries += 1;
        let ti = rng.index(grads.len());
        let k = rng.index(grads[ti].len());
        let mut plus = params.clone();
        plus.tensors_mut()[ti].data_mut()[k] += STEP;
        let mut minus = params.clone();
        minus.tensors_mut()[ti].data_mut()[k] -= STEP;
        let (lp, sp) = loss_at(&plus)?;
        let (lm, sm) = loss_at(&minus)?;
        if !(sp && sm) {
            t.skipped += 1;
            continue;
        }
        t.record(grads[ti].data()[k], (lp - lm) / (2.0 * STEP));
        done += 1;
    }
    Ok(())
}

/// Runs one op's cases. `op` must be one of [`OPS`].
pub fn check_op(op: &'static str, cfg: &GradCheckConfig) -> Result<OpReport> {
    let id = OPS.iter().position(|o| *o == op).unwrap_or(OPS.len()) as u64;
    let mut tally = Tally::new(op);
    let rng = Rng::new(cfg.seed);
    for case in 0..cfg.cases_per_op as u64 {
        let mut s = rng.stream(Purpose::Check, id, case);
        match op {
            "conv" => check_conv(&mut s, cfg, &mut tally)?,
            "maxpool" => check_pool(&mut s, cfg, &mut tally)?,
            "head" => check_head(&mut s, cfg, &mut tally)?,
            "upsample" => check_upsample(&mut s, cfg, &mut tally)?,
            "baseline" => check_end_to_end(&mut s, cfg, &mut tally, LossVariant::Baseline, case)?,
            "proposed" => check_end_to_end(&mut s, cfg, &mut tally, LossVariant::Proposed, case)?,
            _ => return Err(crate::error::invalid!("unknown op {}", op)),
        }
        tally.cases += 1;
    }
    Ok(tally.report())
}

/// Checks every op in [`OPS`].
pub fn run_suite(cfg: &GradCheckConfig) -> Result<Vec<OpReport>> {
    OPS.iter().map(|op| check_op(op, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_error_floor() {
        assert_eq!(rel_error(2.0, 1.0), 0.5);
        assert_eq!(rel_error(0.0, 1e-6), 1e-3);
        assert_eq!(rel_error(1.0, 1.0), 0.0);
    }

    #[test]
    fn quick_suite_passes() {
        let cfg = GradCheckConfig { cases_per_op: 4, coords_per_case: 3, seed: 7 };
        for r in run_suite(&cfg).unwrap() {
            assert!(r.passed(), "{:?}", r);
            assert_eq!(r.cases, 4);
        }
        assert!(check_op("nope", &cfg).is_err());
    }

    #[test]
    fn catches_wrong_gradient() {
        let mut t = Tally::new("x");
        t.record(1.0, 1.001);
        assert!(!t.report().passed());
    }
}
