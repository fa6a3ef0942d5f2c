//! First-order optimization: bias-corrected adaptive updates, soft target
//! tracking, and global-norm gradient clipping.

use super::{Param, Scalar};

/// Adaptive moment estimation with bias correction. Updates consume and zero
/// the gradient buffers; steps with any non-finite gradient entry are skipped
/// and counted instead of applied.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    t: u64,
    skipped: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: F) -> Self {
        Self {
            lr,
            beta1: F::from_f64(0.9).unwrap(),
            beta2: F::from_f64(0.999).unwrap(),
            eps: F::from_f64(1e-8).unwrap(),
            t: 0,
            skipped: 0,
        }
    }

    pub fn skipped_steps(&self) -> u64 {
        self.skipped
    }

    /// Returns false when the step was skipped because of non-finite gradients.
    pub fn step(&mut self, params: &mut [&mut Param<F>]) -> bool {
        let finite = params
            .iter()
            .all(|p| p.grad.data.iter().all(|g| g.is_finite()));
        if !finite {
            self.skipped += 1;
            for p in params.iter_mut() {
                p.zero_grad();
            }
            return false;
        }
        self.t += 1;
        let t = F::from_u64(self.t).unwrap();
        let bc1 = F::one() - self.beta1.powf(t);
        let bc2 = F::one() - self.beta2.powf(t);
        for p in params.iter_mut() {
            for i in 0..p.grad.data.len() {
                let g = p.grad.data[i];
                let m = self.beta1 * p.m.data[i] + (F::one() - self.beta1) * g;
                let v = self.beta2 * p.v.data[i] + (F::one() - self.beta2) * g * g;
                p.m.data[i] = m;
                p.v.data[i] = v;
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                p.value.data[i] = p.value.data[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.zero_grad();
        }
        true
    }
}

/// `target <- tau * source + (1 - tau) * target`, elementwise.
pub fn soft_update<F: Scalar>(target: &mut [&mut Param<F>], source: &[&Param<F>], tau: F) {
    assert!(
        tau > F::zero() && tau <= F::one(),
        "tau must be in (0, 1]"
    );
    assert_eq!(target.len(), source.len(), "parameter lists differ in length");
    for (t, s) in target.iter_mut().zip(source) {
        assert_eq!(t.value.data.len(), s.value.data.len());
        for (tv, sv) in t.value.data.iter_mut().zip(&s.value.data) {
            *tv = tau * *sv + (F::one() - tau) * *tv;
        }
    }
}

/// Scale all gradients down so their joint L2 norm is at most `max_norm`;
/// returns the pre-clip norm.
pub fn clip_global_norm<F: Scalar>(params: &mut [&mut Param<F>], max_norm: F) -> F {
    let mut sq = F::zero();
    for p in params.iter() {
        for g in &p.grad.data {
            sq = sq + *g * *g;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > F::zero() {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            for g in p.grad.data.iter_mut() {
                *g = *g * scale;
            }
        }
    }
    norm
}
