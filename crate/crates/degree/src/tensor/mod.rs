//! Minimal dense-tensor engine.
//!
//! Exactly the five layer primitives the network topology needs (convolution,
//! rectification, addition, channel concatenation/slicing), each with an exact
//! analytic backward pass, plus SGD with classical momentum and a
//! finite-difference gradient checker. Training runs in `f32`; every kernel is
//! also instantiated for `f64` so gradients can be checked against central
//! differences at full precision.

mod conv;
mod gradcheck;
mod ops;
mod optim;

pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams};
pub use gradcheck::{finite_difference_check, GradCheck};
pub use ops::{add, concat_channels, relu_backward, relu_forward, slice_channels};
pub use optim::sgd_momentum_step;

use std::fmt;

use crate::error::{Error, Result};

/// Element type of the numeric engine. `f32` is the training/inference
/// precision, `f64` exists for gradient checking.
pub trait Scalar:
    Copy
    + PartialOrd
    + fmt::Debug
    + Send
    + Sync
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;

    /// C := alpha * A(m×k) * B(k×n) + beta * C. Strides are in elements.
    ///
    /// # Safety
    /// Pointers must reference buffers valid for the given dimensions and
    /// strides; `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// (batch, channel, row, column) extents of a [`Tensor`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidConfig(format!(
                "tensor extents must all be >= 1, got {n}x{c}x{h}x{w}"
            )));
        }
        Ok(Shape { n, c, h, w })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // all extents are >= 1 by construction
    }

    /// Elements per sample.
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.c * self.h * self.w
    }

    /// Elements per channel plane.
    #[inline]
    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense 4-D array in (batch, channel, row, column) order, row-major
/// contiguous. The sole currency of the numeric core: feature maps, parameter
/// blocks and gradients are all tensors.
///
/// Tensors are immutable once produced by an operation; operations return
/// fresh tensors and may parallelize internally over samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S: Scalar = f32> {
    shape: Shape,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Shape, data: Vec<S>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("{} elements for shape {shape}", shape.len()),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![S::ZERO; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> S {
        let s = &self.shape;
        self.data[((n * s.c + c) * s.h + y) * s.w + x]
    }

    /// Contiguous slice holding sample `n`.
    #[inline]
    pub fn sample(&self, n: usize) -> &[S] {
        let len = self.shape.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: S) -> Self {
        self.map(|v| v * factor)
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.to_f64().abs()))
    }

    /// First non-finite element, if any.
    pub fn non_finite_index(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    /// Completed operations must never leave NaN behind; checked in debug
    /// builds at every op exit.
    #[inline]
    pub(crate) fn debug_check(&self) -> &Self {
        debug_assert!(
            self.non_finite_index().is_none(),
            "tensor of shape {} holds a non-finite value at index {:?}",
            self.shape,
            self.non_finite_index()
        );
        self
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| v.to_f64()).collect(),
        }
    }

    pub fn to_f32(&self) -> Tensor<f32> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| v.to_f64() as f32).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rejects_zero_extent() {
        assert!(Shape::new(1, 0, 3, 3).is_err());
        assert!(Shape::new(2, 3, 4, 5).is_ok());
    }

    #[test]
    fn new_rejects_wrong_data_length() {
        let s = Shape::new(1, 1, 2, 2).unwrap();
        assert!(Tensor::new(s, vec![0.0f32; 3]).is_err());
        assert!(Tensor::new(s, vec![0.0f32; 4]).is_ok());
    }

    #[test]
    fn indexing_is_row_major() {
        let s = Shape::new(2, 2, 2, 2).unwrap();
        let t = Tensor::from_fn(s, |n, c, y, x| (n * 1000 + c * 100 + y * 10 + x) as f32);
        assert_eq!(t.at(1, 0, 1, 0), 1010.0);
        assert_eq!(t.data()[15], 1111.0);
        assert_eq!(t.sample(1)[0], 1000.0);
    }
}
