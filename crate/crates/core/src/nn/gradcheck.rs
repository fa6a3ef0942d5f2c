//! Central finite-difference gradient checking.
//!
//! The checker perturbs sampled parameter entries by `EPS`, recomputes a
//! scalar loss, and compares the symmetric difference quotient against the
//! analytic gradient. Callers must disable gradient clipping in the backward
//! pass they hand in, otherwise the analytic side is scaled.

use rand::Rng;

use super::Param;

/// Perturbation used by the symmetric difference quotient.
pub const EPS: f64 = 1e-5;
/// Acceptance threshold on the relative error at 64-bit precision.
pub const REL_TOL: f64 = 1e-4;

pub fn rel_error(a: f64, b: f64) -> f64 {
    let denom = (a.abs() + b.abs()).max(1e-6);
    (a - b).abs() / denom
}

/// Check analytic gradients of `subject` against central finite differences.
///
/// `loss` evaluates the scalar objective without touching gradient buffers;
/// `backprop` zeroes gradients and accumulates fresh ones; `params` returns
/// the parameter list in a stable order. Up to `samples_per_param` entries of
/// each parameter are probed. Returns the worst relative error seen.
pub fn check_gradients<T, R: Rng>(
    subject: &mut T,
    mut loss: impl FnMut(&mut T) -> f64,
    mut backprop: impl FnMut(&mut T),
    params: impl Fn(&mut T) -> Vec<&mut Param<f64>>,
    samples_per_param: usize,
    rng: &mut R,
) -> f64 {
    backprop(subject);
    let analytic: Vec<Vec<f64>> = params(subject)
        .iter()
        .map(|p| p.grad.data.clone())
        .collect();
    let sizes: Vec<usize> = analytic.iter().map(|g| g.len()).collect();

    let mut worst = 0.0f64;
    for (pi, &len) in sizes.iter().enumerate() {
        let probes: Vec<usize> = if len <= samples_per_param {
            (0..len).collect()
        } else {
            (0..samples_per_param).map(|_| rng.gen_range(0..len)).collect()
        };
        for idx in probes {
            let orig = params(subject)[pi].value.data[idx];
            params(subject)[pi].value.data[idx] = orig + EPS;
            let plus = loss(subject);
            params(subject)[pi].value.data[idx] = orig - EPS;
            let minus = loss(subject);
            params(subject)[pi].value.data[idx] = orig;
            let fd = (plus - minus) / (2.0 * EPS);
            worst = worst.max(rel_error(analytic[pi][idx], fd));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mat;
    use rand::SeedableRng;

    #[test]
    fn detects_a_wrong_gradient() {
        // subject: single scalar parameter w with loss w^2
        let mut p = Param::new(Mat {
            rows: 1,
            cols: 1,
            data: vec![1.3f64],
        });
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let ok = check_gradients(
            &mut p,
            |p| p.value.data[0] * p.value.data[0],
            |p| p.grad.data[0] = 2.0 * p.value.data[0],
            |p| vec![p],
            4,
            &mut rng,
        );
        assert!(ok < REL_TOL);
        let bad = check_gradients(
            &mut p,
            |p| p.value.data[0] * p.value.data[0],
            |p| p.grad.data[0] = 3.0 * p.value.data[0],
            |p| vec![p],
            4,
            &mut rng,
        );
        assert!(bad > REL_TOL);
    }
}
