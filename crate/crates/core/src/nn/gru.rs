//! A gated recurrent unit with full backpropagation through time.
//!
//! Recurrence: `z = sigmoid(Wz x + Uz h + bz)`, `r = sigmoid(Wr x + Ur h + br)`,
//! `hcand = tanh(Wh x + Uh (r . h) + bh)`, `h' = (1 - z) . h + z . hcand`.

use rand::Rng;

use super::{Mat, Param, Scalar};

#[derive(Debug, Clone)]
pub struct GruCell<F> {
    pub wz: Param<F>,
    pub uz: Param<F>,
    pub bz: Param<F>,
    pub wr: Param<F>,
    pub ur: Param<F>,
    pub br: Param<F>,
    pub wh: Param<F>,
    pub uh: Param<F>,
    pub bh: Param<F>,
    input: usize,
    hidden: usize,
}

#[derive(Debug, Clone)]
struct StepCache<F> {
    x: Vec<F>,
    h_prev: Vec<F>,
    z: Vec<F>,
    r: Vec<F>,
    hcand: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct GruCache<F> {
    steps: Vec<StepCache<F>>,
}

fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Scalar> GruCell<F> {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (hidden.max(1) as f64).sqrt();
        let mat = |r: usize, c: usize, rng: &mut R| Param::new(Mat::uniform(r, c, scale, rng));
        Self {
            wz: mat(hidden, input, rng),
            uz: mat(hidden, hidden, rng),
            bz: mat(hidden, 1, rng),
            wr: mat(hidden, input, rng),
            ur: mat(hidden, hidden, rng),
            br: mat(hidden, 1, rng),
            wh: mat(hidden, input, rng),
            uh: mat(hidden, hidden, rng),
            bh: mat(hidden, 1, rng),
            input,
            hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    fn gate(&self, w: &Param<F>, u: &Param<F>, b: &Param<F>, x: &[F], h: &[F]) -> Vec<F> {
        let mut pre = w.value.matvec(x);
        let uh = u.value.matvec(h);
        for ((p, uv), bv) in pre.iter_mut().zip(&uh).zip(&b.value.data) {
            *p = *p + *uv + *bv;
        }
        pre
    }

    pub fn step(&self, x: &[F], h: &[F]) -> Vec<F> {
        assert_eq!(
            x.len(),
            self.input,
            "gru input mismatch: cell expects {} got {}",
            self.input,
            x.len()
        );
        let z: Vec<F> = self
            .gate(&self.wz, &self.uz, &self.bz, x, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<F> = self
            .gate(&self.wr, &self.ur, &self.br, x, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        let rh: Vec<F> = r.iter().zip(h).map(|(rv, hv)| *rv * *hv).collect();
        let hcand: Vec<F> = self
            .gate(&self.wh, &self.uh, &self.bh, x, &rh)
            .into_iter()
            .map(|v| v.tanh())
            .collect();
        z.iter()
            .zip(h)
            .zip(&hcand)
            .map(|((zv, hv), cv)| (F::one() - *zv) * *hv + *zv * *cv)
            .collect()
    }

    /// Run the whole sequence, returning the final hidden state.
    pub fn forward_seq(&self, xs: &[Vec<F>], h0: &[F]) -> Vec<F> {
        let mut h = h0.to_vec();
        for x in xs {
            h = self.step(x, &h);
        }
        h
    }

    pub fn forward_seq_cache(&self, xs: &[Vec<F>], h0: &[F]) -> (Vec<F>, GruCache<F>) {
        let mut steps = Vec::with_capacity(xs.len());
        let mut h = h0.to_vec();
        for x in xs {
            let z: Vec<F> = self
                .gate(&self.wz, &self.uz, &self.bz, x, &h)
                .into_iter()
                .map(sigmoid)
                .collect();
            let r: Vec<F> = self
                .gate(&self.wr, &self.ur, &self.br, x, &h)
                .into_iter()
                .map(sigmoid)
                .collect();
            let rh: Vec<F> = r.iter().zip(&h).map(|(rv, hv)| *rv * *hv).collect();
            let hcand: Vec<F> = self
                .gate(&self.wh, &self.uh, &self.bh, x, &rh)
                .into_iter()
                .map(|v| v.tanh())
                .collect();
            let h_next: Vec<F> = z
                .iter()
                .zip(&h)
                .zip(&hcand)
                .map(|((zv, hv), cv)| (F::one() - *zv) * *hv + *zv * *cv)
                .collect();
            steps.push(StepCache {
                x: x.clone(),
                h_prev: h,
                z,
                r,
                hcand,
            });
            h = h_next;
        }
        (h, GruCache { steps })
    }

    /// Backpropagate `d_h_final` through the cached sequence, accumulating
    /// parameter gradients; returns the gradient at `h0`.
    pub fn backward_seq(&mut self, cache: &GruCache<F>, d_h_final: &[F]) -> Vec<F> {
        let mut dh = d_h_final.to_vec();
        for sc in cache.steps.iter().rev() {
            let n = self.hidden;
            let mut dz = vec![F::zero(); n];
            let mut dhcand = vec![F::zero(); n];
            let mut dh_prev = vec![F::zero(); n];
            for i in 0..n {
                dz[i] = dh[i] * (sc.hcand[i] - sc.h_prev[i]);
                dhcand[i] = dh[i] * sc.z[i];
                dh_prev[i] = dh[i] * (F::one() - sc.z[i]);
            }
            // candidate pre-activation
            let da_h: Vec<F> = dhcand
                .iter()
                .zip(&sc.hcand)
                .map(|(d, c)| *d * (F::one() - *c * *c))
                .collect();
            let rh: Vec<F> = sc
                .r
                .iter()
                .zip(&sc.h_prev)
                .map(|(rv, hv)| *rv * *hv)
                .collect();
            self.wh.add_outer(&da_h, &sc.x);
            self.uh.add_outer(&da_h, &rh);
            for (g, d) in self.bh.grad.data.iter_mut().zip(&da_h) {
                *g = *g + *d;
            }
            let drh = self.uh.value.matvec_t(&da_h);
            let mut dr = vec![F::zero(); n];
            for i in 0..n {
                dr[i] = drh[i] * sc.h_prev[i];
                dh_prev[i] = dh_prev[i] + drh[i] * sc.r[i];
            }
            // gate pre-activations
            let da_z: Vec<F> = dz
                .iter()
                .zip(&sc.z)
                .map(|(d, z)| *d * *z * (F::one() - *z))
                .collect();
            let da_r: Vec<F> = dr
                .iter()
                .zip(&sc.r)
                .map(|(d, r)| *d * *r * (F::one() - *r))
                .collect();
            self.wz.add_outer(&da_z, &sc.x);
            self.uz.add_outer(&da_z, &sc.h_prev);
            for (g, d) in self.bz.grad.data.iter_mut().zip(&da_z) {
                *g = *g + *d;
            }
            self.wr.add_outer(&da_r, &sc.x);
            self.ur.add_outer(&da_r, &sc.h_prev);
            for (g, d) in self.br.grad.data.iter_mut().zip(&da_r) {
                *g = *g + *d;
            }
            let uz_t = self.uz.value.matvec_t(&da_z);
            let ur_t = self.ur.value.matvec_t(&da_r);
            for i in 0..n {
                dh_prev[i] = dh_prev[i] + uz_t[i] + ur_t[i];
            }
            dh = dh_prev;
        }
        dh
    }

    pub fn params(&self) -> Vec<&Param<F>> {
        vec![
            &self.wz, &self.uz, &self.bz, &self.wr, &self.ur, &self.br, &self.wh, &self.uh,
            &self.bh,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![
            &mut self.wz,
            &mut self.uz,
            &mut self.bz,
            &mut self.wr,
            &mut self.ur,
            &mut self.br,
            &mut self.wh,
            &mut self.uh,
            &mut self.bh,
        ]
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}
