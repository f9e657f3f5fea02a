//! Minimal dense network kernel with hand-written backward passes.
//!
//! Every layer's `forward` returns its output together with a cache, and the
//! matching `backward` consumes that cache, accumulates parameter gradients
//! and returns the gradient with respect to the layer input.

mod adam;
mod bandit;
mod batch_norm;
mod gradcheck;
mod layers;
mod matrix;
mod policy;

pub use adam::Adam;
pub use bandit::{train_bandit, BanditConfig, BanditRun};
pub use batch_norm::{BatchNorm, BatchNormCache};
pub use gradcheck::{gradcheck, Evaluation, GradCheckReport, Objective, ParamError, DEFAULT_STEP};
pub use layers::{Activation, ActivationCache, Linear, LinearCache};
pub use matrix::Matrix;
pub use policy::{categorical, reinforce_logit_grad, softmax, surrogate_loss, StochasticNode};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("batch norm needs at least 2 rows in training mode, got {0}")]
    BatchTooSmall(usize),
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("non-finite advantage {0}")]
    NonFiniteAdvantage(f64),
}

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, running statistics updated.
    Train,
    /// Running statistics.
    Eval,
    /// Batch statistics without touching the running statistics.
    EvalBatchStats,
}

/// A learnable matrix with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
    pub adam_m: Matrix,
    pub adam_v: Matrix,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Parameter {
            value,
            grad: Matrix::zeros(r, c),
            adam_m: Matrix::zeros(r, c),
            adam_v: Matrix::zeros(r, c),
            step_count: 0,
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..=bound)).collect();
        Parameter::new(Matrix::from_vec(fan_in, fan_out, data).expect("sized above"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// A named slot exposed by a network for optimization and persistence.
pub enum Slot<'a> {
    Param(&'a mut Parameter),
    /// Non-learned state such as batch-norm running statistics.
    Buffer(&'a mut Vec<f64>),
}

/// Anything holding parameters. Names are dot-separated paths.
pub trait Module {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>));

    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.visit("", &mut |name, slot| {
            if let Slot::Param(p) = slot {
                f(name, p)
            }
        });
    }

    fn zero_grad(&mut self) {
        self.visit_params(&mut |_, p| p.zero_grad());
    }

    fn num_parameters(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.value.as_slice().len());
        n
    }
}

pub fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
