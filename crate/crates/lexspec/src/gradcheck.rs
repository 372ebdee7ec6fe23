//! Finite-difference suites run by the `gradcheck` subcommand.

use lexspec_core::attract_repel::{ArConfig, Batch};
use lexspec_core::math::norm;
use lexspec_core::nn::{
    check_gradient, finite_diff_check, penalty_param_grads, Activation, GradCheckReport, Grads, Mlp, MlpSpec,
};
use lexspec_core::postspec::{generator_objective, AdversarialMode, PostSpecConfig};
use lexspec_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;
pub const PENALTY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub tolerance: f64,
    pub report: GradCheckReport,
}

impl SuiteResult {
    pub fn line(&self) -> String {
        format!(
            "suite={} pass={} max_rel_err={:.3e} tolerance={:e} checked={}",
            self.name, self.report.pass, self.report.max_rel_err, self.tolerance, self.report.checked
        )
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape is consistent")
}

fn net(rng: &mut ChaCha8Rng, input: usize, hidden: &[usize], act: Activation, out: usize) -> Result<Mlp> {
    Ok(Mlp::init(&MlpSpec::new(input, hidden, act, out, Activation::Identity), rng)?)
}

/// Corrupts one analytic gradient entry when `fault` is set.
fn tamper(grads: &mut Grads, fault: bool) {
    if fault {
        if let Some(g) = grads.blocks_mut().next().and_then(|b| b.first_mut()) {
            *g = *g * 1.5 + 0.1;
        }
    }
}

fn weighted_square(m: &Mlp, x: &Matrix, fault: bool) -> (f64, Grads) {
    let (out, cache) = m.forward(x).expect("input width matches");
    let mut up = Matrix::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for r in 0..out.rows() {
        for c in 0..out.cols() {
            let w = 1.0 + 0.5 * c as f64;
            loss += 0.5 * w * out[(r, c)] * out[(r, c)];
            up.row_mut(r)[c] = w * out[(r, c)];
        }
    }
    let mut g = m.backward(&cache, &up).expect("shapes match").0;
    tamper(&mut g, fault);
    (loss, g)
}

fn suite(name: impl Into<String>, tolerance: f64, report: GradCheckReport) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        tolerance,
        report,
    }
}

pub fn mlp_suite(seed: u64, fault: bool) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for act in [Activation::Relu, Activation::LeakyRelu(0.2), Activation::Tanh, Activation::Identity] {
        let m = net(&mut rng, 5, &[7, 6], act, 3)?;
        let x = random_matrix(&mut rng, 9, 5);
        let report = finite_diff_check(|m| weighted_square(m, &x, fault), &m, STEP, TOLERANCE);
        out.push(suite(format!("mlp_{}", act.name()), TOLERANCE, report));
    }
    Ok(out)
}

pub fn attract_repel_suite(seed: u64, fault: bool) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ArConfig {
        lambda_reg: 0.3,
        delta_rep: 0.4,
        ..ArConfig::default()
    };
    let n = 12;
    let tokens: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    let mut table = random_matrix(&mut rng, n, 6);
    for i in 0..n {
        let len = norm(table.row(i));
        table.row_mut(i).iter_mut().for_each(|v| *v /= len);
    }
    let syn = [(0, 1), (2, 3), (4, 5), (1, 6), (7, 8)];
    let ant = [(0, 9), (3, 10), (11, 2)];
    let batch = Batch::assemble(&tokens, &table, &table, &syn, &ant, &cfg)?;
    let mut at = batch.vectors.clone();
    for v in at.as_mut_slice() {
        *v += rng.random_range(-0.05..0.05);
    }
    let (_, grad) = batch.cost_and_grad_at(&at, &cfg, true);
    let mut analytic = grad.as_slice().to_vec();
    if fault {
        analytic[0] = analytic[0] * 1.5 + 0.1;
    }
    let (rows, cols) = (at.rows(), at.cols());
    let f = |v: &[f64]| {
        let m = Matrix::from_vec(rows, cols, v.to_vec()).expect("shape is consistent");
        batch.cost_at(&m, &cfg).total()
    };
    Ok(suite(
        "attract_repel_cost",
        TOLERANCE,
        check_gradient(f, at.as_slice(), &analytic, STEP, TOLERANCE),
    ))
}

pub fn generator_suite(seed: u64, fault: bool) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for mode in [AdversarialMode::Gan, AdversarialMode::Wgan, AdversarialMode::WganGp] {
        let cfg = PostSpecConfig {
            mode,
            alpha: 0.7,
            ..PostSpecConfig::default()
        };
        let g = net(&mut rng, 4, &[8, 8], Activation::LeakyRelu(0.2), 4)?;
        let d = net(&mut rng, 4, &[8], Activation::LeakyRelu(0.2), 1)?;
        let x = random_matrix(&mut rng, 6, 4);
        let t = random_matrix(&mut rng, 6, 4);
        let loss = |g: &Mlp| {
            let (obj, mut grads) = generator_objective(g, &d, &x, &t, &cfg).expect("shapes match");
            tamper(&mut grads, fault);
            (obj.total, grads)
        };
        let report = finite_diff_check(loss, &g, STEP, TOLERANCE);
        out.push(suite(format!("generator_{}", mode.name()), TOLERANCE, report));
    }
    Ok(out)
}

pub fn penalty_suite(seed: u64, fault: bool) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for act in [Activation::Relu, Activation::LeakyRelu(0.2)] {
        let d = net(&mut rng, 5, &[9, 7], act, 1)?;
        let x_hat = random_matrix(&mut rng, 8, 5);
        let loss = |d: &Mlp| {
            let (vals, mut grads) = penalty_param_grads(d, &x_hat).expect("shapes match");
            tamper(&mut grads, fault);
            (vals.iter().sum::<f64>(), grads)
        };
        let report = finite_diff_check(loss, &d, STEP, PENALTY_TOLERANCE);
        out.push(suite(format!("penalty_{}", act.name()), PENALTY_TOLERANCE, report));
    }
    Ok(out)
}

/// All four suites. With `fault`, one analytic gradient entry per check is
/// deliberately corrupted so every suite must fail.
pub fn run_all(seed: u64, fault: bool) -> Result<Vec<SuiteResult>> {
    let mut out = mlp_suite(seed, fault)?;
    out.push(attract_repel_suite(seed.wrapping_add(1), fault)?);
    out.extend(generator_suite(seed.wrapping_add(2), fault)?);
    out.extend(penalty_suite(seed.wrapping_add(3), fault)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_and_faults_are_caught() {
        let clean = run_all(0, false).unwrap();
        assert_eq!(clean.len(), 10);
        assert!(clean.iter().all(|s| s.report.pass), "{clean:#?}");
        let broken = run_all(0, true).unwrap();
        assert!(broken.iter().all(|s| !s.report.pass));
    }
}
