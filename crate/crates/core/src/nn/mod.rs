//! Minimal manually-differentiated neural toolkit: dense layers, a GRU cell
//! with backpropagation through time, an adaptive first-order optimizer, soft
//! target updates, flat-file checkpoints, and finite-difference gradient
//! checking.
//!
//! Kernels are generic over the scalar type; the rest of the crate
//! instantiates them at [`crate::Real`] (64-bit), which keeps gradient checks
//! tight at desk scale.

pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod opt;

pub use dense::{Activation, Dense, Mlp, MlpCache};
pub use gru::{GruCache, GruCell};
pub use opt::{clip_global_norm, soft_update, Adam};

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;

/// Scalar bound for every kernel in this module.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + 'static {}
impl<T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + 'static> Scalar for T {}

/// Dense row-major matrix (vectors are `n x 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Uniform entries in `(-scale, scale)`.
    pub fn uniform<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| {
            F::from_f64(rng.gen_range(-scale..scale)).expect("scalar from f64")
        })
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut F {
        &mut self.data[r * self.cols + c]
    }

    pub fn fill(&mut self, v: F) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        assert_eq!(
            self.cols,
            x.len(),
            "matvec shape mismatch: matrix {}x{} vs vector {}",
            self.rows,
            self.cols,
            x.len()
        );
        let mut y = vec![F::zero(); self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = F::zero();
            for (w, xv) in row.iter().zip(x) {
                acc = acc + *w * *xv;
            }
            y[r] = acc;
        }
        y
    }

    /// `y = M^T x`.
    pub fn matvec_t(&self, x: &[F]) -> Vec<F> {
        assert_eq!(
            self.rows,
            x.len(),
            "matvec_t shape mismatch: matrix {}x{} vs vector {}",
            self.rows,
            self.cols,
            x.len()
        );
        let mut y = vec![F::zero(); self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let xv = x[r];
            for (out, w) in y.iter_mut().zip(row) {
                *out = *out + *w * xv;
            }
        }
        y
    }
}

/// A parameter tensor with its gradient buffer and optimizer moment buffers.
#[derive(Debug, Clone)]
pub struct Param<F> {
    pub value: Mat<F>,
    pub grad: Mat<F>,
    pub m: Mat<F>,
    pub v: Mat<F>,
}

impl<F: Scalar> Param<F> {
    pub fn new(value: Mat<F>) -> Self {
        let (r, c) = (value.rows, value.cols);
        Self {
            value,
            grad: Mat::zeros(r, c),
            m: Mat::zeros(r, c),
            v: Mat::zeros(r, c),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }

    pub fn len(&self) -> usize {
        self.value.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.data.is_empty()
    }

    /// Accumulate the outer product `dy x^T` into the gradient.
    pub fn add_outer(&mut self, dy: &[F], x: &[F]) {
        assert_eq!(self.grad.rows, dy.len());
        assert_eq!(self.grad.cols, x.len());
        for (r, dyv) in dy.iter().enumerate() {
            let row = &mut self.grad.data[r * x.len()..(r + 1) * x.len()];
            for (g, xv) in row.iter_mut().zip(x) {
                *g = *g + *dyv * *xv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Mat::<f64>::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(m.matvec_t(&[1.0, 1.0]), vec![3.0, 5.0, 7.0]);
    }

    #[test]
    #[should_panic(expected = "matvec shape mismatch: matrix 2x3 vs vector 2")]
    fn shape_mismatch_names_both_shapes() {
        let m = Mat::<f64>::zeros(2, 3);
        let _ = m.matvec(&[0.0, 0.0]);
    }

    #[test]
    fn param_buffers_share_shape() {
        let p = Param::new(Mat::<f64>::zeros(4, 2));
        assert_eq!(p.grad.rows, 4);
        assert_eq!(p.grad.cols, 2);
        assert_eq!(p.m.data.len(), 8);
    }
}
