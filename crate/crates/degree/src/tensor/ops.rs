//! Elementwise and channel-structural primitives with their adjoints.

use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Elementwise max(0, x).
pub fn relu_forward<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let out = input.map(|v| if v > S::ZERO { v } else { S::ZERO });
    out.debug_check();
    out
}

/// grad_in = grad_out where input > 0, else 0. The subgradient at exactly 0
/// is taken as 0. Note max(0,x) > 0 iff x > 0, so passing the rectifier's
/// *output* as `input` yields the identical mask.
pub fn relu_backward<S: Scalar>(input: &Tensor<S>, grad_out: &Tensor<S>) -> Result<Tensor<S>> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape("relu_backward", input.shape(), grad_out.shape()));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > S::ZERO { g } else { S::ZERO })
        .collect();
    Tensor::new(input.shape(), data)
}

/// Elementwise sum. The adjoint routes the incoming gradient unchanged to
/// both summands.
pub fn add<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.shape() != b.shape() {
        return Err(Error::shape("add", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    let out = Tensor::new(a.shape(), data)?;
    out.debug_check();
    Ok(out)
}

/// Stack tensors along the channel axis in argument order. All parts must
/// agree on batch and spatial extents. The adjoint splits the gradient back
/// into channel blocks ([`slice_channels`]).
pub fn concat_channels<S: Scalar>(parts: &[&Tensor<S>]) -> Result<Tensor<S>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidConfig("concat_channels: no parts".into()))?;
    let (n, h, w) = {
        let s = first.shape();
        (s.n, s.h, s.w)
    };
    let mut c_total = 0;
    for p in parts {
        let s = p.shape();
        if (s.n, s.h, s.w) != (n, h, w) {
            return Err(Error::shape("concat_channels", first.shape(), s));
        }
        c_total += s.c;
    }
    let shape = Shape::new(n, c_total, h, w)?;
    let mut data = Vec::with_capacity(shape.len());
    for s_idx in 0..n {
        for p in parts {
            data.extend_from_slice(p.sample(s_idx));
        }
    }
    Tensor::new(shape, data)
}

/// Copy of a contiguous channel block, `range` in [0, c).
pub fn slice_channels<S: Scalar>(t: &Tensor<S>, range: std::ops::Range<usize>) -> Result<Tensor<S>> {
    let s = t.shape();
    if range.start >= range.end || range.end > s.c {
        return Err(Error::shape(
            "slice_channels",
            format!("channel range within 0..{}", s.c),
            format!("{}..{}", range.start, range.end),
        ));
    }
    let plane = s.plane_len();
    let shape = Shape::new(s.n, range.end - range.start, s.h, s.w)?;
    let mut data = Vec::with_capacity(shape.len());
    for n in 0..s.n {
        let sample = t.sample(n);
        data.extend_from_slice(&sample[range.start * plane..range.end * plane]);
    }
    Tensor::new(shape, data)
}
