use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{invalid, shape_err, Result};

/// Hyperparameters of a square 2-d convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub padding: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, padding: usize) -> Self {
        Self { in_channels, out_channels, kernel_size, padding, stride: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid!("channel counts must be positive: {:?}", self));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(invalid!("kernel_size must be a positive odd integer, got {}", self.kernel_size));
        }
        if self.stride == 0 {
            return Err(invalid!("stride must be positive"));
        }
        Ok(())
    }

    /// Output extent along one spatial axis, or an error if it would be empty.
    pub fn output_extent(&self, input: usize) -> Result<usize> {
        let padded = input + 2 * self.padding;
        if padded < self.kernel_size {
            return Err(shape_err!(
                "spatial extent {} (padded {}) is smaller than kernel {}",
                input,
                padded,
                self.kernel_size
            ));
        }
        Ok((padded - self.kernel_size) / self.stride + 1)
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_size, self.kernel_size]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }

    fn is_pointwise(&self) -> bool {
        self.kernel_size == 1 && self.padding == 0 && self.stride == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

struct Geometry {
    batch: usize,
    height: usize,
    width: usize,
    out_h: usize,
    out_w: usize,
    rank3: bool,
}

fn check_shapes(input: &Tensor, weights: &Tensor, spec: &ConvSpec) -> Result<Geometry> {
    spec.validate()?;
    let [n, c, h, w] = input.as_batch_dims()?;
    if c != spec.in_channels {
        return Err(shape_err!("input channel dimension is {}, spec expects in_channels = {}", c, spec.in_channels));
    }
    let ws = spec.weight_shape();
    if weights.shape() != ws {
        return Err(shape_err!(
            "weights have shape {:?}, expected [out_channels, in_channels, k, k] = {:?}",
            weights.shape(),
            ws
        ));
    }
    Ok(Geometry {
        batch: n,
        height: h,
        width: w,
        out_h: spec.output_extent(h)?,
        out_w: spec.output_extent(w)?,
        rank3: input.ndim() == 3,
    })
}

/// Slice of image `i`; rank-3 tensors are a single image.
fn image(t: &Tensor, batch: usize, i: usize) -> &[f64] {
    let stride = t.len() / batch;
    &t.data()[i * stride..(i + 1) * stride]
}

fn output_shape(g: &Geometry, channels: usize) -> Vec<usize> {
    if g.rank3 {
        vec![channels, g.out_h, g.out_w]
    } else {
        vec![g.batch, channels, g.out_h, g.out_w]
    }
}

/// Unfolds one image `[C,H,W]` into a `[C*k*k, H'*W']` column matrix.
fn im2col(img: &[f64], g: &Geometry, spec: &ConvSpec, col: &mut [f64]) {
    let k = spec.kernel_size;
    let pad = spec.padding as isize;
    let s = spec.stride;
    let plane = g.out_h * g.out_w;
    for c in 0..spec.in_channels {
        let src = &img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut col[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * s) as isize + ky as isize - pad;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src_row = &src[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * s) as isize + kx as isize - pad;
                        *v = if ix < 0 || ix >= g.width as isize { 0.0 } else { src_row[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates a column matrix back into an image.
fn col2im(col: &[f64], g: &Geometry, spec: &ConvSpec, img: &mut [f64]) {
    let k = spec.kernel_size;
    let pad = spec.padding as isize;
    let s = spec.stride;
    let plane = g.out_h * g.out_w;
    for c in 0..spec.in_channels {
        let dst = &mut img[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &col[row * plane..(row + 1) * plane];
                for oy in 0..g.out_h {
                    let iy = (oy * s) as isize + ky as isize - pad;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst_row = &mut dst[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let line = &src[oy * g.out_w..(oy + 1) * g.out_w];
                    for (ox, &v) in line.iter().enumerate() {
                        let ix = (ox * s) as isize + kx as isize - pad;
                        if ix >= 0 && ix < g.width as isize {
                            dst_row[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` for row-major operands.
///
/// `a` is `m x k` (or `k x m` when `trans_a`), `b` is `k x n` (or `n x k`).
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], trans_a: bool, b: &[f64], trans_b: bool, beta: f64, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold exactly m*k, k*n and m*n elements and the
    // strides above address them in row-major (or transposed) order.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// 2-d cross-correlation with zero padding.
///
/// Accepts `[C_in,H,W]` or a batch `[N,C_in,H,W]`; the output has the same rank.
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let g = check_shapes(input, weights, spec)?;
    if bias.shape() != [spec.out_channels] {
        return Err(shape_err!("bias has shape {:?}, expected [{}]", bias.shape(), spec.out_channels));
    }
    let plane = g.out_h * g.out_w;
    let kk = spec.patch_len();
    let co = spec.out_channels;
    let mut out = vec![0.0; g.batch * co * plane];
    let mut col = if spec.is_pointwise() { Vec::new() } else { vec![0.0; kk * plane] };
    for i in 0..g.batch {
        let img = image(input, g.batch, i);
        let dst = &mut out[i * co * plane..(i + 1) * co * plane];
        for (c, row) in dst.chunks_exact_mut(plane).enumerate() {
            row.fill(bias.data()[c]);
        }
        let cols: &[f64] = if spec.is_pointwise() {
            img
        } else {
            im2col(img, &g, spec, &mut col);
            &col
        };
        gemm(co, kk, plane, weights.data(), false, cols, false, 1.0, dst);
    }
    Tensor::new(&output_shape(&g, co), out)
}

/// Exact adjoints of [`conv2d`] with respect to input, weights and bias.
pub fn conv2d_backward(grad_out: &Tensor, input: &Tensor, weights: &Tensor, spec: &ConvSpec) -> Result<ConvGrads> {
    backward_impl(grad_out, input, weights, spec, true)
}

/// Like [`conv2d_backward`] but leaves the input gradient at zero.
pub(crate) fn conv2d_backward_params(
    grad_out: &Tensor,
    input: &Tensor,
    weights: &Tensor,
    spec: &ConvSpec,
) -> Result<ConvGrads> {
    backward_impl(grad_out, input, weights, spec, false)
}

fn backward_impl(
    grad_out: &Tensor,
    input: &Tensor,
    weights: &Tensor,
    spec: &ConvSpec,
    with_input: bool,
) -> Result<ConvGrads> {
    let g = check_shapes(input, weights, spec)?;
    let expected = output_shape(&g, spec.out_channels);
    if grad_out.shape() != expected.as_slice() {
        return Err(shape_err!("grad_out has shape {:?}, forward output shape is {:?}", grad_out.shape(), expected));
    }
    let plane = g.out_h * g.out_w;
    let kk = spec.patch_len();
    let co = spec.out_channels;
    let mut grad_w = vec![0.0; co * kk];
    let mut grad_b = vec![0.0; co];
    let mut grad_in = vec![0.0; input.len()];
    let pointwise = spec.is_pointwise();
    let mut col = vec![0.0; if pointwise { 0 } else { kk * plane }];
    let mut gcol = vec![0.0; if pointwise { 0 } else { kk * plane }];
    for i in 0..g.batch {
        let go = image(grad_out, g.batch, i);
        for (c, row) in go.chunks_exact(plane).enumerate() {
            grad_b[c] += row.iter().sum::<f64>();
        }
        let img = image(input, g.batch, i);
        let gin = &mut grad_in[i * img.len()..(i + 1) * img.len()];
        if pointwise {
            gemm(co, plane, kk, go, false, img, true, 1.0, &mut grad_w);
            if with_input {
                gemm(kk, co, plane, weights.data(), true, go, false, 0.0, gin);
            }
        } else {
            im2col(img, &g, spec, &mut col);
            gemm(co, plane, kk, go, false, &col, true, 1.0, &mut grad_w);
            if with_input {
                gemm(kk, co, plane, weights.data(), true, go, false, 0.0, &mut gcol);
                col2im(&gcol, &g, spec, gin);
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), grad_in)?,
        weights: Tensor::new(&spec.weight_shape(), grad_w)?,
        bias: Tensor::new(&[co], grad_b)?,
    })
}
