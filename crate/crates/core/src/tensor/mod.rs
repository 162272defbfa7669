//! Minimal deterministic tensor and reverse-mode differentiation engine.
//!
//! The architectures in this crate are small and fixed, so there is no tape:
//! each layer exposes an explicit `forward` that returns whatever cache its
//! `backward` needs, and models compose the calls by hand. Everything is
//! generic over [`Scalar`] so training runs in f32 while gradient checks can
//! run the identical code in f64.
//!
//! Loss reductions accumulate in f64 regardless of the scalar type; this
//! keeps finite-difference checks meaningful in f32 mode and costs nothing
//! measurable.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

mod gradcheck;
pub mod layers;
mod loss;
mod optim;

pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{relu, relu_backward, sigmoid, sigmoid_backward, Conv2d, Dense, Init, Upsample2x};
pub use loss::{bce, bce_backward, mse, mse_backward};
pub use optim::{AdamParams, AdamState};

/// Floating-point scalar the engine is generic over.
pub trait Scalar:
    Copy
    + Default
    + PartialOrd
    + Debug
    + Display
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    /// Central-difference step for gradient checks.
    const FD_STEP: f64;
    /// Max relative error tolerated by gradient checks.
    const FD_TOL: f64;
    /// Denominator floor for the relative-error computation.
    const FD_FLOOR: f64;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;
    fn maximum(self, other: Self) -> Self;
    fn minimum(self, other: Self) -> Self;
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const FD_STEP: f64 = 1e-3;
    const FD_TOL: f64 = 1e-3;
    const FD_FLOOR: f64 = 1e-2;

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn ln(self) -> Self {
        f32::ln(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn maximum(self, other: Self) -> Self {
        f32::max(self, other)
    }
    fn minimum(self, other: Self) -> Self {
        f32::min(self, other)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const FD_STEP: f64 = 1e-6;
    const FD_TOL: f64 = 1e-6;
    const FD_FLOOR: f64 = 1e-8;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn maximum(self, other: Self) -> Self {
        f64::max(self, other)
    }
    fn minimum(self, other: Self) -> Self {
        f64::min(self, other)
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::ZERO; numel],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} elements",
            data.len()
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn reshaped(mut self, shape: &[usize]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape.to_vec();
        self
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `c += a · b` for row-major slices: `a` is m×k, `b` is k×n, `c` is m×n.
pub(crate) fn gemm_acc<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += a_ip * bv;
            }
        }
    }
}

/// `c += a · bᵀ`: `a` is m×len, `b` is n×len, `c` is m×n. Row-dot form.
pub(crate) fn gemm_abt<T: Scalar>(m: usize, len: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * len);
    debug_assert_eq!(b.len(), n * len);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * len..(i + 1) * len];
        for j in 0..n {
            let b_row = &b[j * len..(j + 1) * len];
            // four partial sums so the reduction vectorizes
            let mut acc = [T::ZERO; 4];
            let chunks = len / 4;
            for q in 0..chunks {
                let base = q * 4;
                acc[0] += a_row[base] * b_row[base];
                acc[1] += a_row[base + 1] * b_row[base + 1];
                acc[2] += a_row[base + 2] * b_row[base + 2];
                acc[3] += a_row[base + 3] * b_row[base + 3];
            }
            let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for q in chunks * 4..len {
                sum += a_row[q] * b_row[q];
            }
            c[i * n + j] += sum;
        }
    }
}

/// `c += aᵀ · b`: `a` is k×m, `b` is k×n, `c` is m×n.
pub(crate) fn gemm_atb<T: Scalar>(k: usize, m: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for (i, &a_pi) in a_row.iter().enumerate() {
            let c_row = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += a_pi * bv;
            }
        }
    }
}
