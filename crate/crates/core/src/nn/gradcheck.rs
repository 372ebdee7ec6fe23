//! Central finite-difference checks.

use alloc::vec::Vec;

use super::{Grads, Mlp};

/// Entries whose analytic and numeric values are both below this size are
/// compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub pass: bool,
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = libm::fabs(analytic).max(libm::fabs(numeric)).max(REL_FLOOR);
    libm::fabs(analytic - numeric) / denom
}

/// Compares `analytic` against central differences of `f` at `x`.
pub fn check_gradient<F>(mut f: F, x: &[f64], analytic: &[f64], h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let mut probe: Vec<f64> = x.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        checked: x.len(),
        pass: true,
    };
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let e = rel_err(analytic[i], numeric);
        // NaN counts as a failure
        if !(e <= report.max_rel_err) {
            report.max_rel_err = e;
            report.worst_index = i;
        }
    }
    report.pass = report.max_rel_err < tol;
    report
}

/// Checks the gradients returned by `loss` against central differences over
/// every parameter of `m`.
pub fn finite_diff_check<F>(loss: F, m: &Mlp, h: f64, tol: f64) -> GradCheckReport
where
    F: Fn(&Mlp) -> (f64, Grads),
{
    let (_, analytic) = loss(m);
    let flat: Vec<f64> = m.params().flat_map(|b| b.iter().copied()).collect();
    let mut scratch = m.clone();
    check_gradient(
        |theta| {
            let mut rest = theta;
            for blk in scratch.params_mut() {
                let (head, tail) = rest.split_at(blk.len());
                blk.copy_from_slice(head);
                rest = tail;
            }
            loss(&scratch).0
        },
        &flat,
        &analytic.flatten(),
        h,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Matrix;
    use crate::nn::{Activation, MlpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic_loss(m: &Mlp, x: &Matrix, y: &Matrix) -> (f64, Grads) {
        let (out, cache) = m.forward(x).unwrap();
        let mut up = out.clone();
        let mut loss = 0.0;
        for (u, t) in up.as_mut_slice().iter_mut().zip(y.as_slice()) {
            let r = *u - t;
            loss += r * r;
            *u = 2.0 * r;
        }
        (loss, m.backward(&cache, &up).unwrap().0)
    }

    fn data() -> (Matrix, Matrix) {
        (
            Matrix::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]]).unwrap(),
            Matrix::from_rows(&[[1.0, 0.0], [-1.0, 2.0]]).unwrap(),
        )
    }

    #[test]
    fn quadratic_loss_on_linear_net_is_exact() {
        let spec = MlpSpec::new(3, &[], Activation::Identity, 2, Activation::Identity);
        let m = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let (x, y) = data();
        let r = finite_diff_check(|m| quadratic_loss(m, &x, &y), &m, 1e-5, 1e-8);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn relu_net_away_from_kinks() {
        let spec = MlpSpec::new(3, &[6], Activation::Relu, 2, Activation::Identity);
        let m = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (x, y) = data();
        let (_, cache) = m.forward(&x).unwrap();
        let min_z = cache.pre_activations()[0]
            .as_slice()
            .iter()
            .fold(f64::INFINITY, |a, z| a.min(z.abs()));
        assert!(min_z > 1e-3, "fixture sits on a kink");
        let r = finite_diff_check(|m| quadratic_loss(m, &x, &y), &m, 1e-5, 1e-5);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_fails() {
        let spec = MlpSpec::new(3, &[4], Activation::Tanh, 2, Activation::Identity);
        let m = Mlp::init(&spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let (x, y) = data();
        let r = finite_diff_check(
            |m| {
                let (l, mut g) = quadratic_loss(m, &x, &y);
                g.scale(1.1);
                (l, g)
            },
            &m,
            1e-5,
            1e-5,
        );
        assert!(!r.pass);
        assert!(r.max_rel_err > 0.05);
    }
}
