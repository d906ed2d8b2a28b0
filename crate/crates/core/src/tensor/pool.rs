use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{shape_err, Result};

fn pooled_shape(input: &Tensor) -> Result<(Vec<usize>, usize, usize, usize)> {
    let [n, c, h, w] = input.as_batch_dims()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err!("maxpool2 needs even spatial extents, got H = {}, W = {}", h, w));
    }
    let shape = if input.ndim() == 3 { vec![c, h / 2, w / 2] } else { vec![n, c, h / 2, w / 2] };
    Ok((shape, n * c, h, w))
}

/// Flat input index of the winning cell of every 2x2 window.
pub(crate) fn maxpool2_argmax(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (shape, planes, h, w) = pooled_shape(input)?;
    let (oh, ow) = (h / 2, w / 2);
    let src = input.data();
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut arg = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let first = base + 2 * oy * w + 2 * ox;
                let cells = [first, first + 1, first + w, first + w + 1];
                let mut best = cells[0];
                for &c in &cells[1..] {
                    // strict comparison keeps the first maximal cell on ties
                    if src[c] > src[best] {
                        best = c;
                    }
                }
                out.push(src[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(&shape, out)?, arg))
}

/// 2x2 non-overlapping max-pooling over `[C,H,W]` or `[N,C,H,W]`.
pub fn maxpool2(input: &Tensor) -> Result<Tensor> {
    maxpool2_argmax(input).map(|(t, _)| t)
}

pub(crate) fn maxpool2_scatter(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(shape_err!("grad_out has {} elements, pooled output has {}", grad_out.len(), argmax.len()));
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        g[idx] += v;
    }
    Ok(grad)
}

/// Adjoint of [`maxpool2`]: routes each output gradient to its window's argmax.
pub fn maxpool2_backward(grad_out: &Tensor, input: &Tensor) -> Result<Tensor> {
    let (out, arg) = maxpool2_argmax(input)?;
    if grad_out.shape() != out.shape() {
        return Err(shape_err!("grad_out has shape {:?}, pooled output has {:?}", grad_out.shape(), out.shape()));
    }
    maxpool2_scatter(grad_out, &arg, input.shape())
}
