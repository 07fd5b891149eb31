//! 2-D convolution (stride 1, zero padding, square odd kernel) and its exact
//! adjoint. Implemented as explicit patch-matrix multiplication (im2col +
//! GEMM); agrees with the direct-sum definition to float rounding.

use rayon::prelude::*;

use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Samples per work unit when accumulating weight gradients in parallel.
/// Fixed (not derived from the thread count) so the floating-point reduction
/// order, and therefore the result, never depends on the machine.
const GRAD_CHUNK: usize = 8;

/// One convolution layer's parameters: weights of shape
/// (c_out, c_in, k, k), per-output-channel bias, and momentum velocity
/// buffers mirroring both.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<S: Scalar = f32> {
    pub weights: Tensor<S>,
    pub bias: Vec<S>,
    pub w_velocity: Tensor<S>,
    pub b_velocity: Vec<S>,
}

impl<S: Scalar> ConvParams<S> {
    /// Zero-initialised parameters. `k` must be odd so that padding
    /// (k-1)/2 preserves spatial extent.
    pub fn zeroed(c_out: usize, c_in: usize, k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "kernel size must be odd, got {k}"
            )));
        }
        let shape = Shape::new(c_out, c_in, k, k)?;
        Ok(ConvParams {
            weights: Tensor::zeros(shape),
            bias: vec![S::ZERO; c_out],
            w_velocity: Tensor::zeros(shape),
            b_velocity: vec![S::ZERO; c_out],
        })
    }

    #[inline]
    pub fn c_out(&self) -> usize {
        self.weights.shape().n
    }
    #[inline]
    pub fn c_in(&self) -> usize {
        self.weights.shape().c
    }
    #[inline]
    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }
    #[inline]
    pub fn padding(&self) -> usize {
        (self.kernel() - 1) / 2
    }

    /// Weights + biases (velocities are optimizer state, not parameters).
    pub fn parameter_count(&self) -> usize {
        self.weights.shape().len() + self.bias.len()
    }
}

/// Gradients of a scalar loss w.r.t. one layer's weights and bias.
#[derive(Clone, Debug)]
pub struct ConvGrads<S: Scalar = f32> {
    pub weights: Tensor<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> ConvGrads<S> {
    pub fn zeroed_like(params: &ConvParams<S>) -> Self {
        ConvGrads {
            weights: Tensor::zeros(params.weights.shape()),
            bias: vec![S::ZERO; params.bias.len()],
        }
    }

    pub fn non_finite_index(&self) -> Option<usize> {
        self.weights
            .non_finite_index()
            .or_else(|| self.bias.iter().position(|v| !v.is_finite()))
    }
}

fn check_conv_pre<S: Scalar>(
    op: &'static str,
    input: &Tensor<S>,
    params: &ConvParams<S>,
    padding: usize,
) -> Result<()> {
    if input.shape().c != params.c_in() {
        return Err(Error::shape(
            op,
            format!("input with {} channels (weights {})", params.c_in(), params.weights.shape()),
            format!("input {}", input.shape()),
        ));
    }
    if padding != params.padding() {
        return Err(Error::InvalidConfig(format!(
            "{op}: padding must be (k-1)/2 = {}, got {padding}",
            params.padding()
        )));
    }
    Ok(())
}

/// Scatter one sample into the patch matrix: row (c*k+ky)*k+kx of `col`
/// holds the input plane `c` shifted by (ky-pad, kx-pad), zero outside.
fn im2col<S: Scalar>(sample: &[S], c_in: usize, h: usize, w: usize, k: usize, pad: usize, col: &mut [S]) {
    let hw = h * w;
    debug_assert_eq!(col.len(), c_in * k * k * hw);
    let mut row = 0usize;
    for c in 0..c_in {
        let plane = &sample[c * hw..(c + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let dst_rows = &mut col[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let dst = &mut dst_rows[y * w..(y + 1) * w];
                    let in_y = y as isize + ky as isize - pad as isize;
                    if in_y < 0 || in_y >= h as isize {
                        dst.fill(S::ZERO);
                        continue;
                    }
                    let src = &plane[in_y as usize * w..(in_y as usize + 1) * w];
                    // in_x = x + kx - pad is valid for x in [x_lo, x_hi)
                    let x_lo = pad.saturating_sub(kx);
                    let x_hi = (w + pad - kx).min(w);
                    dst[..x_lo].fill(S::ZERO);
                    dst[x_lo..x_hi].copy_from_slice(&src[x_lo + kx - pad..x_hi + kx - pad]);
                    dst[x_hi..].fill(S::ZERO);
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulate patch-matrix gradients back onto the
/// input gradient sample.
fn col2im_acc<S: Scalar>(col: &[S], c_in: usize, h: usize, w: usize, k: usize, pad: usize, sample: &mut [S]) {
    let hw = h * w;
    let mut row = 0usize;
    for c in 0..c_in {
        let plane = &mut sample[c * hw..(c + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let src_rows = &col[row * hw..(row + 1) * hw];
                for y in 0..h {
                    let in_y = y as isize + ky as isize - pad as isize;
                    if in_y < 0 || in_y >= h as isize {
                        continue;
                    }
                    let src = &src_rows[y * w..(y + 1) * w];
                    let dst = &mut plane[in_y as usize * w..(in_y as usize + 1) * w];
                    let x_lo = pad.saturating_sub(kx);
                    let x_hi = (w + pad - kx).min(w);
                    for x in x_lo..x_hi {
                        dst[x + kx - pad] += src[x];
                    }
                }
                row += 1;
            }
        }
    }
}

/// output[n,o,y,x] = bias[o] + sum over (i,u,v) of
/// weights[o,i,u,v] * input[n,i,y+u-pad,x+v-pad], zero outside the input.
/// Spatial extent is preserved (stride 1, padding (k-1)/2).
pub fn conv2d_forward<S: Scalar>(
    input: &Tensor<S>,
    params: &ConvParams<S>,
    padding: usize,
) -> Result<Tensor<S>> {
    check_conv_pre("conv2d_forward", input, params, padding)?;
    let (n, c_in, h, w) = {
        let s = input.shape();
        (s.n, s.c, s.h, s.w)
    };
    let (c_out, k) = (params.c_out(), params.kernel());
    let hw = h * w;
    let ckk = c_in * k * k;

    let mut out = Tensor::zeros(Shape::new(n, c_out, h, w)?);
    let out_sample_len = c_out * hw;
    out.data_mut()
        .par_chunks_mut(out_sample_len)
        .enumerate()
        .for_each(|(s_idx, out_sample)| {
            let mut col = vec![S::ZERO; ckk * hw];
            im2col(input.sample(s_idx), c_in, h, w, k, padding, &mut col);
            unsafe {
                S::gemm(
                    c_out,
                    ckk,
                    hw,
                    S::ONE,
                    params.weights.data().as_ptr(),
                    ckk as isize,
                    1,
                    col.as_ptr(),
                    hw as isize,
                    1,
                    S::ZERO,
                    out_sample.as_mut_ptr(),
                    hw as isize,
                    1,
                );
            }
            for o in 0..c_out {
                let b = params.bias[o];
                for v in &mut out_sample[o * hw..(o + 1) * hw] {
                    *v += b;
                }
            }
        });
    out.debug_check();
    Ok(out)
}

/// Exact analytic gradients of sum(grad_out ⊙ output) w.r.t. the input, the
/// weights and the bias.
pub fn conv2d_backward<S: Scalar>(
    input: &Tensor<S>,
    params: &ConvParams<S>,
    grad_out: &Tensor<S>,
) -> Result<(Tensor<S>, Tensor<S>, Vec<S>)> {
    let padding = params.padding();
    check_conv_pre("conv2d_backward", input, params, padding)?;
    let (n, c_in, h, w) = {
        let s = input.shape();
        (s.n, s.c, s.h, s.w)
    };
    let (c_out, k) = (params.c_out(), params.kernel());
    let expected = Shape::new(n, c_out, h, w)?;
    if grad_out.shape() != expected {
        return Err(Error::shape("conv2d_backward", expected, grad_out.shape()));
    }
    let hw = h * w;
    let ckk = c_in * k * k;

    // grad_bias[o] = sum of grad_out over batch and spatial axes.
    let mut grad_bias = vec![S::ZERO; c_out];
    for s_idx in 0..n {
        let g = grad_out.sample(s_idx);
        for o in 0..c_out {
            let mut acc = S::ZERO;
            for &v in &g[o * hw..(o + 1) * hw] {
                acc += v;
            }
            grad_bias[o] += acc;
        }
    }

    // grad_weights = sum over samples of grad_out_n x col_n^T, accumulated in
    // fixed-size chunks and reduced in index order for determinism.
    let sample_ids: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<S>> = sample_ids
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut gw = vec![S::ZERO; c_out * ckk];
            let mut col = vec![S::ZERO; ckk * hw];
            for &s_idx in chunk {
                im2col(input.sample(s_idx), c_in, h, w, k, padding, &mut col);
                unsafe {
                    // gw(c_out, ckk) += G(c_out, hw) * col(ckk, hw)^T
                    S::gemm(
                        c_out,
                        hw,
                        ckk,
                        S::ONE,
                        grad_out.sample(s_idx).as_ptr(),
                        hw as isize,
                        1,
                        col.as_ptr(),
                        1,
                        hw as isize,
                        S::ONE,
                        gw.as_mut_ptr(),
                        ckk as isize,
                        1,
                    );
                }
            }
            gw
        })
        .collect();
    let mut grad_weights = Tensor::zeros(params.weights.shape());
    for partial in &partials {
        for (dst, &src) in grad_weights.data_mut().iter_mut().zip(partial) {
            *dst += src;
        }
    }

    // grad_input: col-space gradient W^T x grad_out, scattered back per sample.
    let mut grad_input = Tensor::zeros(input.shape());
    let in_sample_len = c_in * hw;
    grad_input
        .data_mut()
        .par_chunks_mut(in_sample_len)
        .enumerate()
        .for_each(|(s_idx, gi_sample)| {
            let mut col_grad = vec![S::ZERO; ckk * hw];
            unsafe {
                // col_grad(ckk, hw) = W^T(ckk, c_out) * G(c_out, hw)
                S::gemm(
                    ckk,
                    c_out,
                    hw,
                    S::ONE,
                    params.weights.data().as_ptr(),
                    1,
                    ckk as isize,
                    grad_out.sample(s_idx).as_ptr(),
                    hw as isize,
                    1,
                    S::ZERO,
                    col_grad.as_mut_ptr(),
                    hw as isize,
                    1,
                );
            }
            col2im_acc(&col_grad, c_in, h, w, k, padding, gi_sample);
        });

    grad_input.debug_check();
    grad_weights.debug_check();
    Ok((grad_input, grad_weights, grad_bias))
}
