//! SGD, RMSProp and Adam.

use alloc::vec;
use alloc::vec::Vec;

use super::{Grads, Mlp};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { lr: f64 },
    RmsProp { lr: f64, decay: f64, eps: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::Sgd { lr }
    }

    pub fn rmsprop(lr: f64) -> Self {
        OptimizerKind::RmsProp {
            lr,
            decay: 0.9,
            eps: 1e-8,
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerKind::Sgd { lr } | OptimizerKind::RmsProp { lr, .. } | OptimizerKind::Adam { lr, .. } => lr,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd { .. } => "sgd",
            OptimizerKind::RmsProp { .. } => "rmsprop",
            OptimizerKind::Adam { .. } => "adam",
        }
    }
}

/// One update of `param` in place. `first` and `second` are the moment
/// buffers (unused by SGD; RMSProp only uses `second`) and `step` is the
/// 1-based step count used by Adam's bias correction.
pub fn apply_update(
    kind: OptimizerKind,
    param: &mut [f64],
    grad: &[f64],
    first: &mut [f64],
    second: &mut [f64],
    step: u64,
) {
    match kind {
        OptimizerKind::Sgd { lr } => {
            for (p, g) in param.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        OptimizerKind::RmsProp { lr, decay, eps } => {
            for ((p, g), v) in param.iter_mut().zip(grad).zip(second.iter_mut()) {
                *v = decay * *v + (1.0 - decay) * g * g;
                *p -= lr * g / (libm::sqrt(*v) + eps);
            }
        }
        OptimizerKind::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            let c1 = 1.0 - libm::pow(beta1, step as f64);
            let c2 = 1.0 - libm::pow(beta2, step as f64);
            for (((p, g), m), v) in param
                .iter_mut()
                .zip(grad)
                .zip(first.iter_mut())
                .zip(second.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
    }
}

/// Optimizer accumulators shaped like one particular network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, m: &Mlp) -> Self {
        let zeros: Vec<Vec<f64>> = m.params().map(|b| vec![0.0; b.len()]).collect();
        OptimizerState {
            kind,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, m: &mut Mlp, grads: &Grads) -> Result<()> {
        m.check_grads(grads)?;
        if self.first.len() != m.params().count()
            || self.first.iter().zip(m.params()).any(|(a, p)| a.len() != p.len())
        {
            return Err(crate::Error::Shape(
                "optimizer state belongs to a different network".into(),
            ));
        }
        self.step += 1;
        for (((p, g), f), s) in m
            .params_mut()
            .zip(grads.blocks())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            apply_update(self.kind, p, g, f, s, self.step);
        }
        Ok(())
    }
}
