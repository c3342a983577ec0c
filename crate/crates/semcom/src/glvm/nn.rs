//! Minimal fully-connected network machinery: batched forward/backward and
//! Adam. Generic over the float type so training runs in `f32` while
//! gradient verification runs in `f64`; all random draws are made in `f64`
//! and cast, keeping both precisions on the same sample path.

use ndarray::{Array1, Array2, Axis, NdFloat};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub(crate) fn c<F: NdFloat>(x: f64) -> F {
    F::from(x).expect("constant fits the float type")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    fn apply<F: NdFloat>(self, pre: &Array2<F>) -> Array2<F> {
        match self {
            Activation::Identity => pre.clone(),
            Activation::Relu => pre.mapv(|v| if v > F::zero() { v } else { F::zero() }),
            Activation::Sigmoid => pre.mapv(|v| c::<F>(1.0) / (c::<F>(1.0) + (-v).exp())),
        }
    }

    /// Derivative with respect to the pre-activation, given both tensors.
    fn derivative<F: NdFloat>(self, pre: &Array2<F>, post: &Array2<F>) -> Array2<F> {
        match self {
            Activation::Identity => Array2::ones(pre.raw_dim()),
            Activation::Relu => pre.mapv(|v| if v > F::zero() { F::one() } else { F::zero() }),
            Activation::Sigmoid => post.mapv(|s| s * (F::one() - s)),
        }
    }
}

/// One dense layer: `post = act(x W + b)` with `W` stored `in x out`.
#[derive(Debug, Clone)]
pub struct Linear<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
    pub activation: Activation,
}

impl<F: NdFloat> Linear<F> {
    /// He initialization for ReLU layers, Glorot otherwise; biases zero.
    fn random(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let std = match activation {
            Activation::Relu => (2.0 / fan_in as f64).sqrt(),
            _ => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
            let g: f64 = StandardNormal.sample(rng);
            c::<F>(g * std)
        });
        Linear {
            w,
            b: Array1::zeros(fan_out),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Per-layer parameter gradients, same shapes as the layer.
#[derive(Debug, Clone)]
pub struct LayerGrad<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

/// Dense stack. The activation of the final layer is whatever its `Linear`
/// declares (identity for heads that feed a loss directly).
#[derive(Debug, Clone)]
pub struct Mlp<F> {
    pub layers: Vec<Linear<F>>,
}

/// Intermediate tensors kept for the backward pass.
pub struct ForwardCache<F> {
    /// Input to each layer.
    inputs: Vec<Array2<F>>,
    pres: Vec<Array2<F>>,
    posts: Vec<Array2<F>>,
}

impl<F> ForwardCache<F> {
    pub fn output(&self) -> &Array2<F> {
        self.posts.last().expect("at least one layer")
    }
}

impl<F: NdFloat> Mlp<F> {
    /// Builds a stack with the given layer widths; all hidden layers use
    /// ReLU and the final layer uses `final_activation`.
    pub fn new(dims: &[usize], final_activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let act = if i + 2 == dims.len() {
                final_activation
            } else {
                Activation::Relu
            };
            layers.push(Linear::random(dims[i], dims[i + 1], act, rng));
        }
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let mut cur = x.clone();
        for layer in &self.layers {
            let pre = cur.dot(&layer.w) + &layer.b;
            cur = layer.activation.apply(&pre);
        }
        cur
    }

    pub fn forward_cached(&self, x: &Array2<F>) -> ForwardCache<F> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut posts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            inputs.push(cur.clone());
            let pre = cur.dot(&layer.w) + &layer.b;
            let post = layer.activation.apply(&pre);
            pres.push(pre);
            posts.push(post.clone());
            cur = post;
        }
        ForwardCache {
            inputs,
            pres,
            posts,
        }
    }

    /// Backpropagates. `d_last` is the loss gradient with respect to the
    /// final layer's post-activation output, or to its pre-activation when
    /// `from_pre` is set (fused softmax/sigmoid losses). Returns per-layer
    /// parameter gradients and the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        d_last: Array2<F>,
        from_pre: bool,
    ) -> (Vec<LayerGrad<F>>, Array2<F>) {
        let n = self.layers.len();
        let mut grads: Vec<Option<LayerGrad<F>>> = (0..n).map(|_| None).collect();
        let mut d_post = d_last;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let d_pre = if i + 1 == n && from_pre {
                d_post
            } else {
                let deriv = layer.activation.derivative(&cache.pres[i], &cache.posts[i]);
                d_post * deriv
            };
            let dw = cache.inputs[i].t().dot(&d_pre);
            let db = d_pre.sum_axis(Axis(0));
            d_post = d_pre.dot(&layer.w.t());
            grads[i] = Some(LayerGrad { w: dw, b: db });
        }
        (grads.into_iter().map(|g| g.expect("filled")).collect(), d_post)
    }

}

/// Adam with the usual defaults (0.9, 0.999, 1e-8) and bias correction.
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    t: i32,
    m: Vec<LayerGrad<F>>,
    v: Vec<LayerGrad<F>>,
}

impl<F: NdFloat> Adam<F> {
    pub fn new(mlp: &Mlp<F>, lr: f64) -> Self {
        let zero_like = |l: &Linear<F>| LayerGrad {
            w: Array2::zeros(l.w.raw_dim()),
            b: Array1::zeros(l.b.raw_dim()),
        };
        Adam {
            lr: c(lr),
            beta1: c(0.9),
            beta2: c(0.999),
            eps: c(1e-8),
            t: 0,
            m: mlp.layers.iter().map(zero_like).collect(),
            v: mlp.layers.iter().map(zero_like).collect(),
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp<F>, grads: &[LayerGrad<F>]) {
        self.t += 1;
        let bc1 = F::one() - self.beta1.powi(self.t);
        let bc2 = F::one() - self.beta2.powi(self.t);
        for ((layer, grad), (m, v)) in mlp
            .layers
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            update(
                &mut layer.w,
                &grad.w,
                &mut m.w,
                &mut v.w,
                self.beta1,
                self.beta2,
                self.lr,
                self.eps,
                bc1,
                bc2,
            );
            update1(
                &mut layer.b,
                &grad.b,
                &mut m.b,
                &mut v.b,
                self.beta1,
                self.beta2,
                self.lr,
                self.eps,
                bc1,
                bc2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<F: NdFloat>(
    p: &mut Array2<F>,
    g: &Array2<F>,
    m: &mut Array2<F>,
    v: &mut Array2<F>,
    b1: F,
    b2: F,
    lr: F,
    eps: F,
    bc1: F,
    bc2: F,
) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = b1 * *m + (F::one() - b1) * g;
            *v = b2 * *v + (F::one() - b2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        });
}

#[allow(clippy::too_many_arguments)]
fn update1<F: NdFloat>(
    p: &mut Array1<F>,
    g: &Array1<F>,
    m: &mut Array1<F>,
    v: &mut Array1<F>,
    b1: F,
    b2: F,
    lr: F,
    eps: F,
    bc1: F,
    bc2: F,
) {
    ndarray::Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = b1 * *m + (F::one() - b1) * g;
            *v = b2 * *v + (F::one() - b2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn forward_shapes_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::<f32>::new(&[6, 8, 3], Activation::Identity, &mut rng);
        let x = Array2::<f32>::zeros((5, 6));
        let y = mlp.forward(&x);
        assert_eq!(y.dim(), (5, 3));
    }

    #[test]
    fn backward_matches_finite_differences_on_quadratic_loss() {
        // Loss = 0.5 ||mlp(x)||^2; checks the plain MLP backward in f64.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mlp = Mlp::<f64>::new(&[4, 8, 8, 2], Activation::Sigmoid, &mut rng);
        let x = Array2::from_shape_fn((10, 4), |_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g
        });
        let cache = mlp.forward_cached(&x);
        let d_out = cache.output().clone();
        let (grads, _) = mlp.backward(&cache, d_out, false);

        let loss = |mlp: &Mlp<f64>| -> f64 {
            let y = mlp.forward(&x);
            0.5 * y.iter().map(|v| v * v).sum::<f64>()
        };
        let h = 1e-6;
        for li in 0..mlp.layers.len() {
            for idx in [(0, 0), (1, 0)] {
                let orig = mlp.layers[li].w[idx];
                mlp.layers[li].w[idx] = orig + h;
                let fp = loss(&mlp);
                mlp.layers[li].w[idx] = orig - h;
                let fm = loss(&mlp);
                mlp.layers[li].w[idx] = orig;
                let fd = (fp - fm) / (2.0 * h);
                let an = grads[li].w[idx];
                assert!(
                    (an - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                    "layer {li} w{idx:?}: analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn adam_reduces_a_simple_regression_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::<f32>::new(&[3, 16, 1], Activation::Identity, &mut rng);
        let x = Array2::from_shape_fn((64, 3), |_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g as f32
        });
        let target = x.map_axis(Axis(1), |r| r.sum()).insert_axis(Axis(1));
        let mut opt = Adam::new(&mlp, 1e-2);
        let mut first = None;
        let mut last = 0.0;
        for _ in 0..200 {
            let cache = mlp.forward_cached(&x);
            let diff = cache.output() - &target;
            last = diff.iter().map(|v| v * v).sum::<f32>() / 64.0;
            first.get_or_insert(last);
            let (grads, _) = mlp.backward(&cache, diff * (2.0 / 64.0), false);
            opt.step(&mut mlp, &grads);
        }
        assert!(last < 0.05 * first.unwrap(), "loss {last} from {first:?}");
    }
}
