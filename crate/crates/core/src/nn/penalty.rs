//! Input gradients of a scalar critic and the parameter gradients of the
//! gradient-norm penalty `(‖∇ₓD(x)‖₂ − 1)²`.
//!
//! For piecewise-linear activations the Jacobian of the critic is
//! `J = S_L W_L ⋯ S_1 W_1`, with `S_l` the diagonal of activation slopes.
//! The slopes are locally constant in the parameters, so with
//! `u = ∂P/∂g` (where `g = Jᵀ`) the penalty gradient for layer `l` is the
//! outer product `δ_l h_{l-1}ᵀ`, where `δ_l` is the usual backward signal
//! seeded with `S_L` and `h_l = S_l W_l h_{l-1}` pushes `h_0 = u` forward.
//! Biases only move the slopes and so receive zero gradient.

use alloc::vec;
use alloc::vec::Vec;

use super::{Grads, Mlp};
use crate::math::{axpy, dot, norm, Matrix};
use crate::{Error, Result};

struct RowPass {
    /// activation slopes per layer
    slopes: Vec<Vec<f64>>,
    /// backward signals δ_l per layer
    deltas: Vec<Vec<f64>>,
    /// ∇ₓD
    input_grad: Vec<f64>,
}

fn scalar_critic(d: &Mlp) -> Result<()> {
    if d.out_dim() != 1 {
        return Err(Error::Shape(alloc::format!(
            "critic must have one output, has {}",
            d.out_dim()
        )));
    }
    Ok(())
}

fn row_pass(d: &Mlp, x: &[f64]) -> RowPass {
    let layers = d.layers();
    let mut slopes = Vec::with_capacity(layers.len());
    let mut a = x.to_vec();
    for l in layers {
        let z: Vec<f64> = l
            .weights
            .iter_rows()
            .zip(&l.bias)
            .map(|(w, b)| dot(w, &a) + b)
            .collect();
        slopes.push(z.iter().map(|&v| l.activation.derivative(v)).collect::<Vec<_>>());
        a = z.iter().map(|&v| l.activation.apply(v)).collect();
    }
    let mut deltas = vec![Vec::new(); layers.len()];
    let mut delta = slopes[layers.len() - 1].clone();
    for li in (0..layers.len()).rev() {
        if li + 1 < layers.len() {
            let back = layers[li + 1].weights.matvec_t(&delta);
            delta = back.iter().zip(&slopes[li]).map(|(b, s)| b * s).collect();
        }
        deltas[li] = delta.clone();
    }
    let input_grad = layers[0].weights.matvec_t(&deltas[0]);
    RowPass {
        slopes,
        deltas,
        input_grad,
    }
}

/// `∇ₓD(x)` for every row of `x`.
pub fn input_gradients(d: &Mlp, x: &Matrix) -> Result<Matrix> {
    scalar_critic(d)?;
    if x.cols() != d.in_dim() {
        return Err(Error::Shape(alloc::format!(
            "critic expects width {}, got {}",
            d.in_dim(),
            x.cols()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        out.row_mut(r).copy_from_slice(&row_pass(d, x.row(r)).input_grad);
    }
    Ok(out)
}

/// Per-row penalties `(‖∇ₓD(x̂)‖₂ − 1)²` and the gradient of their sum with
/// respect to the critic parameters.
///
/// Only piecewise-linear activations are accepted; with `tanh` the slopes
/// depend on the parameters and this computation would be incomplete.
pub fn penalty_param_grads(d: &Mlp, x_hat: &Matrix) -> Result<(Vec<f64>, Grads)> {
    scalar_critic(d)?;
    if let Some(l) = d.layers().iter().find(|l| !l.activation.is_piecewise_linear()) {
        return Err(Error::UnsupportedActivation(l.activation.name()));
    }
    if x_hat.cols() != d.in_dim() {
        return Err(Error::Shape(alloc::format!(
            "critic expects width {}, got {}",
            d.in_dim(),
            x_hat.cols()
        )));
    }
    let layers = d.layers();
    let mut grads = Grads::zeros_like(d);
    let mut values = Vec::with_capacity(x_hat.rows());
    for r in 0..x_hat.rows() {
        let pass = row_pass(d, x_hat.row(r));
        let g_norm = norm(&pass.input_grad);
        values.push((g_norm - 1.0) * (g_norm - 1.0));
        if g_norm == 0.0 {
            // subgradient 0 at the non-differentiable point
            continue;
        }
        let coef = 2.0 * (g_norm - 1.0) / g_norm;
        let mut h: Vec<f64> = pass.input_grad.iter().map(|v| coef * v).collect();
        for (li, l) in layers.iter().enumerate() {
            let gw = &mut grads.layers[li].0;
            for (o, &dl) in pass.deltas[li].iter().enumerate() {
                if dl != 0.0 {
                    axpy(dl, &h, gw.row_mut(o));
                }
            }
            if li + 1 < layers.len() {
                h = l
                    .weights
                    .matvec(&h)
                    .into_iter()
                    .zip(&pass.slopes[li])
                    .map(|(v, s)| v * s)
                    .collect();
            }
        }
    }
    Ok((values, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense, MlpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(w: &[f64]) -> Mlp {
        Mlp::from_layers(vec![Dense {
            weights: Matrix::from_vec(1, w.len(), w.to_vec()).unwrap(),
            bias: vec![0.3],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn unit_norm_linear_critic_has_zero_penalty() {
        let d = linear(&[0.6, -0.8]);
        let x = Matrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        let (vals, g) = penalty_param_grads(&d, &x).unwrap();
        assert!(vals.iter().all(|&v| v.abs() < 1e-30));
        assert!(g.flatten().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn doubled_coordinate_critic() {
        let d = linear(&[2.0]);
        let x = Matrix::from_rows(&[[0.1], [5.0], [-2.0]]).unwrap();
        let (vals, g) = penalty_param_grads(&d, &x).unwrap();
        assert_eq!(vals, vec![1.0, 1.0, 1.0]);
        // d/dw (|w| - 1)^2 = 2(|w| - 1) sign(w) = 2 per row
        assert_eq!(g.layers[0].0.as_slice(), &[6.0]);
        assert_eq!(g.layers[0].1, vec![0.0]);
    }

    #[test]
    fn tanh_is_rejected() {
        let spec = MlpSpec::new(2, &[3], Activation::Tanh, 1, Activation::Identity);
        let d = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(
            penalty_param_grads(&d, &Matrix::zeros(1, 2)).unwrap_err(),
            Error::UnsupportedActivation("tanh")
        );
    }

    #[test]
    fn input_gradient_matches_backward() {
        let spec = MlpSpec::new(3, &[5, 4], Activation::LeakyRelu(0.2), 1, Activation::Identity);
        let d = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let x = Matrix::from_rows(&[[0.3, -0.2, 0.9], [1.0, 0.0, -0.5]]).unwrap();
        let (_, cache) = d.forward(&x).unwrap();
        let ones = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let (_, dx) = d.backward(&cache, &ones).unwrap();
        let gx = input_gradients(&d, &x).unwrap();
        assert!(dx.max_abs_diff(&gx) < 1e-14);
    }
}
