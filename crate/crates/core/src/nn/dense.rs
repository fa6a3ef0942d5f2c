//! Dense layers, activations, and the multi-layer perceptron used for actor
//! and critic networks.

use rand::Rng;

use super::{Mat, Param, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn forward<F: Scalar>(&self, x: &[F]) -> Vec<F> {
        match self {
            Activation::Tanh => x.iter().map(|v| v.tanh()).collect(),
            Activation::Relu => x.iter().map(|v| v.max(F::zero())).collect(),
            Activation::Identity => x.to_vec(),
        }
    }

    /// Gradient given the pre-activation `x`, the output `y`, and the output
    /// gradient `dy`.
    pub fn backward<F: Scalar>(&self, x: &[F], y: &[F], dy: &[F]) -> Vec<F> {
        match self {
            Activation::Tanh => y
                .iter()
                .zip(dy)
                .map(|(yv, dv)| *dv * (F::one() - *yv * *yv))
                .collect(),
            Activation::Relu => x
                .iter()
                .zip(dy)
                .map(|(xv, dv)| if *xv > F::zero() { *dv } else { F::zero() })
                .collect(),
            Activation::Identity => dy.to_vec(),
        }
    }
}

/// Fully-connected layer `y = W x + b` with fan-in scaled uniform init.
#[derive(Debug, Clone)]
pub struct Dense<F> {
    pub w: Param<F>,
    pub b: Param<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (in_dim.max(1) as f64).sqrt();
        Self {
            w: Param::new(Mat::uniform(out_dim, in_dim, scale, rng)),
            b: Param::new(Mat::uniform(out_dim, 1, scale, rng)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.value.cols
    }

    pub fn out_dim(&self) -> usize {
        self.w.value.rows
    }

    pub fn forward(&self, x: &[F]) -> Vec<F> {
        let mut y = self.w.value.matvec(x);
        for (yv, bv) in y.iter_mut().zip(&self.b.value.data) {
            *yv = *yv + *bv;
        }
        y
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &[F], dy: &[F]) -> Vec<F> {
        assert_eq!(
            dy.len(),
            self.out_dim(),
            "dense backward shape mismatch: layer {}x{} vs dy {}",
            self.out_dim(),
            self.in_dim(),
            dy.len()
        );
        self.w.add_outer(dy, x);
        for (g, dv) in self.b.grad.data.iter_mut().zip(dy) {
            *g = *g + *dv;
        }
        self.w.value.matvec_t(dy)
    }
}

#[derive(Debug, Clone)]
pub struct MlpCache<F> {
    /// Input to each layer (so `inputs[0]` is the network input).
    inputs: Vec<Vec<F>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<F>>,
    /// Post-activation output of each layer.
    post: Vec<Vec<F>>,
}

/// A stack of dense layers with a shared hidden activation and a separate
/// output activation.
#[derive(Debug, Clone)]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
    pub hidden_act: Activation,
    pub out_act: Activation,
}

impl<F: Scalar> Mlp<F> {
    /// `dims` lists the layer widths, input first, output last.
    pub fn new<R: Rng>(
        dims: &[usize],
        hidden_act: Activation,
        out_act: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|w| Dense::new(w[0], w[1], rng))
            .collect();
        Self {
            layers,
            hidden_act,
            out_act,
        }
    }

    fn act(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.out_act
        } else {
            self.hidden_act
        }
    }

    pub fn forward(&self, x: &[F]) -> Vec<F> {
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = self.act(i).forward(&layer.forward(&cur));
        }
        cur
    }

    pub fn forward_cache(&self, x: &[F]) -> (Vec<F>, MlpCache<F>) {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
        };
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            cache.inputs.push(cur.clone());
            let pre = layer.forward(&cur);
            cur = self.act(i).forward(&pre);
            cache.pre.push(pre);
            cache.post.push(cur.clone());
        }
        (cur, cache)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &MlpCache<F>, dy: &[F]) -> Vec<F> {
        let mut grad = dy.to_vec();
        for i in (0..self.layers.len()).rev() {
            let act = self.act(i);
            let dpre = act.backward(&cache.pre[i], &cache.post[i], &grad);
            grad = self.layers[i].backward(&cache.inputs[i], &dpre);
        }
        grad
    }

    pub fn params(&self) -> Vec<&Param<F>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.w, &l.b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}
