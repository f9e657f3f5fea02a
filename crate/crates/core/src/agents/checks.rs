//! Finite-difference objectives for every architecture.
//!
//! Each objective freezes a batch of inputs, sampled actions and advantages,
//! and exposes the REINFORCE surrogate loss so that [`gradcheck`] can compare
//! the hand-written backward passes against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{attend_rows, AttentionalReceiverNet, BasicReceiverNet, SenderNet, Widths};
use crate::kernel::{
    categorical, gradcheck, reinforce_logit_grad, surrogate_loss, Evaluation, GradCheckReport, Linear, Matrix,
    Mode, Module, Objective, Slot, DEFAULT_STEP,
};

/// Tolerance for the network fixtures.
pub const NETWORK_TOLERANCE: f64 = 1e-3;
/// Tolerance for the purely linear fixture.
pub const LINEAR_TOLERANCE: f64 = 1e-7;

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-0.9..0.9)).collect())
        .expect("sized")
}

fn sample_rows<R: Rng>(probs: &Matrix, rng: &mut R) -> Vec<usize> {
    (0..probs.rows())
        .map(|i| categorical(probs.row(i), rng).expect("softmax output").sampled_index)
        .collect()
}

fn advantages<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_indices<R: Rng>(n: usize, range: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..range)).collect()
}

/// `L = Σ c ⊙ (x·W + b)`: linear in every parameter.
pub struct LinearObjective {
    pub layer: Linear,
    x: Matrix,
    coeffs: Matrix,
}

impl LinearObjective {
    pub fn random<R: Rng>(inputs: usize, outputs: usize, batch: usize, rng: &mut R) -> Self {
        let mut layer = Linear::new(inputs, outputs, rng);
        layer.bias.value = random_matrix(1, outputs, rng);
        LinearObjective { layer, x: random_matrix(batch, inputs, rng), coeffs: random_matrix(batch, outputs, rng) }
    }
}

impl Module for LinearObjective {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.layer.visit(prefix, f);
    }
}

impl Objective for LinearObjective {
    fn evaluate(&mut self) -> Evaluation {
        let (y, _) = self.layer.forward(&self.x).expect("shapes fixed");
        let loss = y.as_slice().iter().zip(self.coeffs.as_slice()).map(|(a, b)| a * b).sum();
        Evaluation { loss, region: 0 }
    }

    fn backward(&mut self) -> f64 {
        let loss = self.evaluate().loss;
        let (_, cache) = self.layer.forward(&self.x).expect("shapes fixed");
        self.layer.backward(&cache, &self.coeffs).expect("shapes fixed");
        loss
    }
}

pub struct SenderObjective {
    pub net: SenderNet,
    x: Matrix,
    ms: Vec<usize>,
    mp: Vec<usize>,
    advantages: Vec<f64>,
    mode: Mode,
}

impl SenderObjective {
    pub fn random<R: Rng>(n_dims: usize, widths: &Widths, batch: usize, rng: &mut R) -> Self {
        let mut net = SenderNet::new(n_dims, widths, rng);
        let x = random_matrix(batch, 2 * n_dims * n_dims, rng);
        let out = net.forward(&x, Mode::Train).expect("shapes fixed");
        let ms = sample_rows(&out.probs_ms, rng);
        let mp = sample_rows(&out.probs_mp, rng);
        SenderObjective { net, x, ms, mp, advantages: advantages(batch, rng), mode: Mode::Train }
    }
}

impl Module for SenderObjective {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.net.visit(prefix, f);
    }
}

impl Objective for SenderObjective {
    fn evaluate(&mut self) -> Evaluation {
        let out = self.net.forward(&self.x, self.mode).expect("shapes fixed");
        let b = self.x.rows();
        let loss = surrogate_loss(&out.probs_ms, &self.ms, &self.advantages, b)
            + surrogate_loss(&out.probs_mp, &self.mp, &self.advantages, b);
        Evaluation { loss, region: out.cache.region_hash() }
    }

    fn backward(&mut self) -> f64 {
        let loss = self.evaluate().loss;
        let out = self.net.forward(&self.x, self.mode).expect("shapes fixed");
        let b = self.x.rows();
        let d_ms = reinforce_logit_grad(&out.probs_ms, &self.ms, &self.advantages, b).expect("finite");
        let d_mp = reinforce_logit_grad(&out.probs_mp, &self.mp, &self.advantages, b).expect("finite");
        self.net.backward(&out.cache, &d_ms, &d_mp).expect("shapes fixed");
        loss
    }
}

pub struct BasicReceiverObjective {
    pub net: BasicReceiverNet,
    context: Matrix,
    onehot_ms: Matrix,
    onehot_mp: Matrix,
    choices: Vec<usize>,
    advantages: Vec<f64>,
}

impl BasicReceiverObjective {
    pub fn random<R: Rng>(n_dims: usize, widths: &Widths, batch: usize, rng: &mut R) -> Self {
        let mut net = BasicReceiverNet::new(n_dims, widths, rng);
        let context = random_matrix(batch, 2 * n_dims * n_dims, rng);
        let onehot_ms = Matrix::one_hot(&random_indices(batch, n_dims, rng), n_dims);
        let onehot_mp = Matrix::one_hot(&random_indices(batch, 2, rng), 2);
        let (probs, _) = net.forward(&context, &onehot_ms, &onehot_mp, Mode::Train).expect("shapes fixed");
        let choices = sample_rows(&probs, rng);
        BasicReceiverObjective { net, context, onehot_ms, onehot_mp, choices, advantages: advantages(batch, rng) }
    }
}

impl Module for BasicReceiverObjective {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.net.visit(prefix, f);
    }
}

impl Objective for BasicReceiverObjective {
    fn evaluate(&mut self) -> Evaluation {
        let (probs, cache) =
            self.net.forward(&self.context, &self.onehot_ms, &self.onehot_mp, Mode::Train).expect("shapes fixed");
        let loss = surrogate_loss(&probs, &self.choices, &self.advantages, self.context.rows());
        Evaluation { loss, region: cache.region_hash() }
    }

    fn backward(&mut self) -> f64 {
        let loss = self.evaluate().loss;
        let (probs, cache) =
            self.net.forward(&self.context, &self.onehot_ms, &self.onehot_mp, Mode::Train).expect("shapes fixed");
        let d = reinforce_logit_grad(&probs, &self.choices, &self.advantages, self.context.rows()).expect("finite");
        self.net.backward(&cache, &d).expect("shapes fixed");
        loss
    }
}

/// Both stages of the attentional receiver, with the attended dimension frozen.
pub struct AttentionalReceiverObjective {
    pub net: AttentionalReceiverNet,
    context: Matrix,
    onehot_ms: Matrix,
    onehot_mp: Matrix,
    dims: Vec<usize>,
    choices: Vec<usize>,
    advantages: Vec<f64>,
}

impl AttentionalReceiverObjective {
    pub fn random<R: Rng>(n_dims: usize, widths: &Widths, batch: usize, rng: &mut R) -> Self {
        let mut net = AttentionalReceiverNet::new(n_dims, widths, rng);
        let context = random_matrix(batch, 2 * n_dims * n_dims, rng);
        let onehot_ms = Matrix::one_hot(&random_indices(batch, n_dims, rng), n_dims);
        let onehot_mp = Matrix::one_hot(&random_indices(batch, 2, rng), 2);
        let (dim_probs, _) = net.stage1(&context, &onehot_ms, Mode::Train).expect("shapes fixed");
        let dims = sample_rows(&dim_probs, rng);
        let attended = attend_rows(&context, n_dims, &dims).expect("dims sampled in range");
        let (probs, _) = net.stage2(&attended, &onehot_mp, Mode::Train).expect("shapes fixed");
        let choices = sample_rows(&probs, rng);
        AttentionalReceiverObjective {
            net,
            context,
            onehot_ms,
            onehot_mp,
            dims,
            choices,
            advantages: advantages(batch, rng),
        }
    }
}

impl Module for AttentionalReceiverObjective {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.net.visit(prefix, f);
    }
}

impl Objective for AttentionalReceiverObjective {
    fn evaluate(&mut self) -> Evaluation {
        let b = self.context.rows();
        let (dim_probs, c1) = self.net.stage1(&self.context, &self.onehot_ms, Mode::Train).expect("shapes fixed");
        let attended = attend_rows(&self.context, self.net.n_dims, &self.dims).expect("frozen dims");
        let (probs, c2) = self.net.stage2(&attended, &self.onehot_mp, Mode::Train).expect("shapes fixed");
        let loss = surrogate_loss(&dim_probs, &self.dims, &self.advantages, b)
            + surrogate_loss(&probs, &self.choices, &self.advantages, b);
        Evaluation { loss, region: c1.region_hash() ^ c2.region_hash().rotate_left(1) }
    }

    fn backward(&mut self) -> f64 {
        let loss = self.evaluate().loss;
        let b = self.context.rows();
        let (dim_probs, c1) = self.net.stage1(&self.context, &self.onehot_ms, Mode::Train).expect("shapes fixed");
        let attended = attend_rows(&self.context, self.net.n_dims, &self.dims).expect("frozen dims");
        let (probs, c2) = self.net.stage2(&attended, &self.onehot_mp, Mode::Train).expect("shapes fixed");
        let d1 = reinforce_logit_grad(&dim_probs, &self.dims, &self.advantages, b).expect("finite");
        let d2 = reinforce_logit_grad(&probs, &self.choices, &self.advantages, b).expect("finite");
        self.net.stage1_backward(&c1, &d1).expect("shapes fixed");
        self.net.stage2_backward(&c2, &d2).expect("shapes fixed");
        loss
    }
}

/// Wraps an objective and scales the first parameter's gradient, for
/// checking that the harness notices a broken backward pass.
pub struct CorruptedBackward<O> {
    pub inner: O,
    pub factor: f64,
}

impl<O: Objective> Module for CorruptedBackward<O> {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.inner.visit(prefix, f);
    }
}

impl<O: Objective> Objective for CorruptedBackward<O> {
    fn evaluate(&mut self) -> Evaluation {
        self.inner.evaluate()
    }

    fn backward(&mut self) -> f64 {
        let loss = self.inner.backward();
        let mut first = true;
        let factor = self.factor;
        self.inner.visit_params(&mut |_, p| {
            if first {
                p.grad = p.grad.map(|g| g * factor);
                first = false;
            }
        });
        loss
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckCase {
    pub label: String,
    pub report: GradCheckReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub configurations: usize,
    pub seed: u64,
    /// Corrupt every backward pass; the suite must then fail.
    pub inject_fault: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { configurations: 20, seed: 0x5eed, inject_fault: false }
    }
}

fn run<O: Objective>(obj: O, tol: f64, fault: bool) -> GradCheckReport {
    if fault {
        gradcheck(&mut CorruptedBackward { inner: obj, factor: 1.5 }, DEFAULT_STEP, tol)
    } else {
        let mut obj = obj;
        gradcheck(&mut obj, DEFAULT_STEP, tol)
    }
}

/// The linear fixture plus `configurations` random instances of each
/// network at reduced widths (n in 1..=3, batch in 4..=8).
pub fn gradcheck_suite(opts: &SuiteOptions) -> Vec<GradcheckCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let widths = Widths::small();
    let mut cases = vec![GradcheckCase {
        label: "linear fixture 5x3, batch 6".into(),
        report: run(LinearObjective::random(5, 3, 6, &mut rng), LINEAR_TOLERANCE, opts.inject_fault),
    }];
    for i in 0..opts.configurations {
        let n = rng.gen_range(1..=3);
        let batch = rng.gen_range(4..=8);
        let tag = format!("config {i}: n={n}, batch={batch}");
        cases.push(GradcheckCase {
            label: format!("sender, {tag}"),
            report: run(SenderObjective::random(n, &widths, batch, &mut rng), NETWORK_TOLERANCE, opts.inject_fault),
        });
        cases.push(GradcheckCase {
            label: format!("basic receiver, {tag}"),
            report: run(
                BasicReceiverObjective::random(n, &widths, batch, &mut rng),
                NETWORK_TOLERANCE,
                opts.inject_fault,
            ),
        });
        cases.push(GradcheckCase {
            label: format!("attentional receiver, {tag}"),
            report: run(
                AttentionalReceiverObjective::random(n, &widths, batch, &mut rng),
                NETWORK_TOLERANCE,
                opts.inject_fault,
            ),
        });
    }
    cases
}
