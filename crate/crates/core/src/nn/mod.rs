//! Dense feed-forward networks with hand-derived gradients.
//!
//! Networks act on batches stored as [`Matrix`] rows. Every layer computes
//! `act(x Wᵀ + b)` with `W` of shape `out × in`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{axpy, dot, Matrix};
use crate::{Error, Result};

mod gradcheck;
mod optim;
mod penalty;

pub use gradcheck::{check_gradient, finite_diff_check, GradCheckReport};
pub use optim::{apply_update, OptimizerKind, OptimizerState};
pub use penalty::{input_gradients, penalty_param_grads};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => libm::tanh(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`. Kinks take the left-hand slope.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => {
                let t = libm::tanh(z);
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Layer widths and activations, starting from the input width.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub input: usize,
    pub layers: Vec<(usize, Activation)>,
}

impl MlpSpec {
    /// `input → hidden… → output`, with one activation for all hidden layers.
    pub fn new(input: usize, hidden: &[usize], hidden_act: Activation, output: usize, output_act: Activation) -> Self {
        let mut layers: Vec<(usize, Activation)> = hidden.iter().map(|&h| (h, hidden_act)).collect();
        layers.push((output, output_act));
        MlpSpec { input, layers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations recorded by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }
}

/// Gradients laid out exactly like the parameters of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

impl Grads {
    pub fn zeros_like(m: &Mlp) -> Self {
        Grads {
            layers: m
                .layers
                .iter()
                .map(|l| (Matrix::zeros(l.out_dim(), l.in_dim()), vec![0.0; l.out_dim()]))
                .collect(),
        }
    }

    /// Flat views in the same order as [`Mlp::params_mut`].
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Grads) {
        for (a, b) in self.blocks_mut().zip(other.blocks()) {
            axpy(alpha, b, a);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for blk in self.blocks_mut() {
            for v in blk {
                *v *= alpha;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().flat_map(|b| b.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn shape_matches(&self, m: &Mlp) -> bool {
        self.layers.len() == m.layers.len()
            && self.layers.iter().zip(&m.layers).all(|((w, b), l)| {
                w.rows() == l.out_dim() && w.cols() == l.in_dim() && b.len() == l.out_dim()
            })
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<Self> {
        if spec.layers.is_empty() {
            return Err(Error::Empty("network needs at least one layer"));
        }
        if spec.input == 0 || spec.layers.iter().any(|(w, _)| *w == 0) {
            return Err(Error::Config("layer widths must be at least 1".into()));
        }
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut fan_in = spec.input;
        for &(fan_out, activation) in &spec.layers {
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            layers.push(Dense {
                weights: Matrix::from_vec(fan_out, fan_in, data)?,
                bias: vec![0.0; fan_out],
                activation,
            });
            fan_in = fan_out;
        }
        Ok(Mlp { layers })
    }

    /// Assembles a network from explicit layers, checking the shape chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() || l.in_dim() == 0 || l.out_dim() == 0 {
                return Err(Error::Shape(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && layers[i - 1].out_dim() != l.in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    l.in_dim(),
                    i - 1,
                    layers[i - 1].out_dim()
                )));
            }
            if !l.weights.is_finite() || !l.bias.iter().all(|b| b.is_finite()) {
                return Err(Error::InvalidValue(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Mlp { layers })
    }

    /// Single identity layer `x ↦ x`.
    pub fn identity(dim: usize) -> Self {
        Mlp {
            layers: vec![Dense {
                weights: Matrix::identity(dim),
                bias: vec![0.0; dim],
                activation: Activation::Identity,
            }],
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.rows() * l.weights.cols() + l.bias.len()).sum()
    }

    /// Flat parameter views: each layer's weights (row-major) then bias.
    pub fn params(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    /// Clamps every parameter to `[-c, c]`.
    pub fn clip_params(&mut self, c: f64) {
        for blk in self.params_mut() {
            for v in blk {
                *v = v.clamp(-c, c);
            }
        }
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params()
            .flat_map(|b| b.iter())
            .fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "network expects width {}, got {}",
                self.in_dim(),
                x.cols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for l in &self.layers {
            let z = affine(l, &a);
            let mut out = z.clone();
            for v in out.as_mut_slice() {
                *v = l.activation.apply(*v);
            }
            inputs.push(a);
            pre_activations.push(z);
            a = out;
        }
        Ok((
            a,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "network expects width {}, got {}",
                self.in_dim(),
                x.cols()
            )));
        }
        let mut a = x.clone();
        for l in &self.layers {
            let mut z = affine(l, &a);
            for v in z.as_mut_slice() {
                *v = l.activation.apply(*v);
            }
            a = z;
        }
        Ok(a)
    }

    /// Reverse-mode pass for a scalar loss whose gradient with respect to the
    /// outputs is `upstream`. Returns parameter gradients and the gradient
    /// with respect to the inputs.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Grads, Matrix)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape("cache comes from a different network".into()));
        }
        let n = cache.inputs[0].rows();
        if upstream.rows() != n || upstream.cols() != self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream gradient is {}x{}, outputs are {}x{}",
                upstream.rows(),
                upstream.cols(),
                n,
                self.out_dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[li];
            let input = &cache.inputs[li];
            if z.rows() != n || z.cols() != l.out_dim() || input.cols() != l.in_dim() {
                return Err(Error::Shape(format!("cache layer {li} does not match network")));
            }
            for (d, &zv) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d *= l.activation.derivative(zv);
            }
            let mut gw = Matrix::zeros(l.out_dim(), l.in_dim());
            let mut gb = vec![0.0; l.out_dim()];
            for r in 0..n {
                let dr = delta.row(r);
                let xr = input.row(r);
                for (o, &d) in dr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    axpy(d, xr, gw.row_mut(o));
                }
            }
            // dx = delta · W
            delta = delta.matmul(&l.weights)?;
            grads.push((gw, gb));
        }
        grads.reverse();
        Ok((Grads { layers: grads }, delta))
    }

    pub(crate) fn check_grads(&self, g: &Grads) -> Result<()> {
        if g.shape_matches(self) {
            Ok(())
        } else {
            Err(Error::Shape("gradient layout does not match network".into()))
        }
    }
}

fn affine(l: &Dense, a: &Matrix) -> Matrix {
    let mut z = Matrix::zeros(a.rows(), l.out_dim());
    for r in 0..a.rows() {
        let ar = a.row(r);
        let zr = z.row_mut(r);
        for (o, w) in l.weights.iter_rows().enumerate() {
            zr[o] = dot(w, ar) + l.bias[o];
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(w: f64, act: Activation) -> Mlp {
        Mlp::from_layers(vec![Dense {
            weights: Matrix::from_vec(1, 1, vec![w]).unwrap(),
            bias: vec![0.0],
            activation: act,
        }])
        .unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let spec = MlpSpec::new(300, &[512], Activation::LeakyRelu(0.2), 300, Activation::Identity);
        let a = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
        assert_eq!(
            (a.layers()[0].weights.rows(), a.layers()[0].weights.cols()),
            (512, 300)
        );
        assert_eq!(
            (a.layers()[1].weights.rows(), a.layers()[1].weights.cols()),
            (300, 512)
        );
        let limit = (6.0f64 / 812.0).sqrt();
        assert!(a.layers()[0].weights.as_slice().iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn init_rejects_empty_spec() {
        let spec = MlpSpec { input: 3, layers: vec![] };
        assert!(Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn forward_cases() {
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0]]).unwrap();
        assert_eq!(Mlp::identity(3).predict(&x).unwrap(), x);

        let relu = single(-1.0, Activation::Relu);
        let y = relu.predict(&Matrix::from_vec(1, 1, vec![2.0]).unwrap()).unwrap();
        assert_eq!(y[(0, 0)], 0.0);

        let tanh = single(1.0, Activation::Tanh);
        let y = tanh.predict(&Matrix::from_vec(1, 1, vec![0.5]).unwrap()).unwrap();
        assert!((y[(0, 0)] - 0.462117).abs() < 1e-6);

        assert!(tanh.forward(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn backward_hand_cases() {
        let m = Mlp::identity(2);
        let x = Matrix::from_rows(&[[3.0, -1.0]]).unwrap();
        let (_, cache) = m.forward(&x).unwrap();

        let (g, dx) = m.backward(&cache, &Matrix::zeros(1, 2)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));

        // loss = sum of outputs: dL/dW = 1 ⊗ x
        let (g, dx) = m.backward(&cache, &Matrix::from_rows(&[[1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(g.layers[0].0.as_slice(), &[3.0, -1.0, 3.0, -1.0]);
        assert_eq!(g.layers[0].1, vec![1.0, 1.0]);
        assert_eq!(dx.as_slice(), &[1.0, 1.0]);

        assert!(m.backward(&cache, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn clipping_bounds_all_params() {
        let spec = MlpSpec::new(4, &[8], Activation::Relu, 1, Activation::Identity);
        let mut m = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        m.clip_params(0.01);
        assert!(m.max_abs_param() <= 0.01);
    }
}
