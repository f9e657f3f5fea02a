//! Sender and receiver networks.
//!
//! Heads are linear layers followed by batch norm and a softmax. Backward
//! methods take the gradient with respect to the softmax inputs, which is
//! what [`reinforce_logit_grad`](crate::kernel::reinforce_logit_grad) yields.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Context;
use crate::kernel::{
    join_name, softmax, Activation, ActivationCache, BatchNorm, BatchNormCache, KernelError, Linear,
    LinearCache, Matrix, Mode, Module, Slot,
};

pub mod checks;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("attention dimension {dim} out of range for {n_dims} dimensions")]
    DimOutOfRange { dim: usize, n_dims: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    Basic,
    Attentional,
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReceiverKind::Basic => "basic",
            ReceiverKind::Attentional => "attentional",
        })
    }
}

impl FromStr for ReceiverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(ReceiverKind::Basic),
            "attentional" => Ok(ReceiverKind::Attentional),
            other => Err(format!("unknown receiver kind {other:?} (expected basic|attentional)")),
        }
    }
}

/// Hidden-layer widths of all three architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widths {
    pub sender: [usize; 2],
    pub basic: [usize; 3],
    pub attention_stage1: usize,
    pub attention_stage2: [usize; 2],
}

impl Default for Widths {
    fn default() -> Self {
        Widths { sender: [64, 64], basic: [64, 64, 32], attention_stage1: 64, attention_stage2: [64, 32] }
    }
}

impl Widths {
    /// Reduced widths for finite-difference checks.
    pub fn small() -> Self {
        Widths { sender: [7, 6], basic: [7, 6, 5], attention_stage1: 7, attention_stage2: [6, 5] }
    }
}

/// A linear head normalized across the batch and turned into a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHead {
    pub linear: Linear,
    pub norm: BatchNorm,
}

#[derive(Debug, Clone)]
pub struct PolicyHeadCache {
    linear: LinearCache,
    norm: BatchNormCache,
}

impl PolicyHead {
    fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        PolicyHead { linear: Linear::new(inputs, outputs, rng), norm: BatchNorm::new(outputs) }
    }

    pub fn outputs(&self) -> usize {
        self.linear.outputs()
    }

    fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, PolicyHeadCache), KernelError> {
        let (z, linear) = self.linear.forward(x)?;
        let (z, norm) = self.norm.forward(&z, mode)?;
        Ok((softmax(&z), PolicyHeadCache { linear, norm }))
    }

    fn backward(&mut self, cache: &PolicyHeadCache, dlogits: &Matrix) -> Result<Matrix, KernelError> {
        let dz = self.norm.backward(&cache.norm, dlogits)?;
        self.linear.backward(&cache.linear, &dz)
    }
}

impl Module for PolicyHead {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.linear.visit(&join_name(prefix, "linear"), f);
        self.norm.visit(&join_name(prefix, "norm"), f);
    }
}

/// Stack of linear layers each followed by the same activation.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStack {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct HiddenStackCache {
    steps: Vec<(LinearCache, ActivationCache)>,
}

impl HiddenStackCache {
    pub fn region_hash(&self) -> u64 {
        self.steps
            .iter()
            .fold(0u64, |h, (_, a)| h.rotate_left(7) ^ a.region_hash())
    }
}

impl HiddenStack {
    fn new<R: Rng + ?Sized>(inputs: usize, widths: &[usize], activation: Activation, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = inputs;
        for &w in widths {
            layers.push(Linear::new(fan_in, w, rng));
            fan_in = w;
        }
        HiddenStack { layers, activation }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("non-empty stack").outputs()
    }

    fn forward(&self, x: &Matrix) -> Result<(Matrix, HiddenStackCache), KernelError> {
        let mut h = x.clone();
        let mut steps = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (z, lc) = layer.forward(&h)?;
            let (a, ac) = self.activation.forward(z);
            steps.push((lc, ac));
            h = a;
        }
        Ok((h, HiddenStackCache { steps }))
    }

    fn backward(&mut self, cache: &HiddenStackCache, dy: &Matrix) -> Result<Matrix, KernelError> {
        let mut d = dy.clone();
        for (layer, (lc, ac)) in self.layers.iter_mut().zip(&cache.steps).rev() {
            d = Activation::backward(ac, &d)?;
            d = layer.backward(lc, &d)?;
        }
        Ok(d)
    }
}

impl Module for HiddenStack {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.visit(&join_name(prefix, &format!("hidden{}", i + 1)), f);
        }
    }
}

/// Two ELU hidden layers feeding a dimension head and a polarity head.
#[derive(Debug, Clone, PartialEq)]
pub struct SenderNet {
    pub n_dims: usize,
    pub hidden: HiddenStack,
    pub head_ms: PolicyHead,
    pub head_mp: PolicyHead,
}

#[derive(Debug, Clone)]
pub struct SenderCache {
    hidden: HiddenStackCache,
    ms: PolicyHeadCache,
    mp: PolicyHeadCache,
}

#[derive(Debug, Clone)]
pub struct SenderOutput {
    pub probs_ms: Matrix,
    pub probs_mp: Matrix,
    pub cache: SenderCache,
}

impl SenderNet {
    pub fn new<R: Rng + ?Sized>(n_dims: usize, widths: &Widths, rng: &mut R) -> Self {
        let hidden = HiddenStack::new(2 * n_dims * n_dims, &widths.sender, Activation::Elu, rng);
        let top = hidden.outputs();
        SenderNet {
            n_dims,
            hidden,
            head_ms: PolicyHead::new(top, n_dims, rng),
            head_mp: PolicyHead::new(top, 2, rng),
        }
    }

    pub fn input_width(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<SenderOutput, AgentError> {
        let (h, hidden) = self.hidden.forward(x)?;
        let (probs_ms, ms) = self.head_ms.forward(&h, mode)?;
        let (probs_mp, mp) = self.head_mp.forward(&h, mode)?;
        Ok(SenderOutput { probs_ms, probs_mp, cache: SenderCache { hidden, ms, mp } })
    }

    pub fn backward(&mut self, cache: &SenderCache, dlogits_ms: &Matrix, dlogits_mp: &Matrix) -> Result<(), AgentError> {
        let mut dh = self.head_ms.backward(&cache.ms, dlogits_ms)?;
        dh.add_assign(&self.head_mp.backward(&cache.mp, dlogits_mp)?)?;
        self.hidden.backward(&cache.hidden, &dh)?;
        Ok(())
    }
}

impl SenderCache {
    pub fn region_hash(&self) -> u64 {
        self.hidden.region_hash()
    }
}

impl Module for SenderNet {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.hidden.visit(prefix, f);
        self.head_ms.visit(&join_name(prefix, "head_ms"), f);
        self.head_mp.visit(&join_name(prefix, "head_mp"), f);
    }
}

/// Receiver input: context, then the `m_s` one-hot, then the `m_p` one-hot.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicReceiverNet {
    pub n_dims: usize,
    pub hidden: HiddenStack,
    pub head: PolicyHead,
}

#[derive(Debug, Clone)]
pub struct BasicReceiverCache {
    hidden: HiddenStackCache,
    head: PolicyHeadCache,
}

impl BasicReceiverCache {
    pub fn region_hash(&self) -> u64 {
        self.hidden.region_hash()
    }
}

impl BasicReceiverNet {
    pub fn new<R: Rng + ?Sized>(n_dims: usize, widths: &Widths, rng: &mut R) -> Self {
        let inputs = 2 * n_dims * n_dims + n_dims + 2;
        let hidden = HiddenStack::new(inputs, &widths.basic, Activation::Relu, rng);
        let head = PolicyHead::new(hidden.outputs(), 2 * n_dims, rng);
        BasicReceiverNet { n_dims, hidden, head }
    }

    pub fn input_width(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn output_width(&self) -> usize {
        self.head.outputs()
    }

    pub fn forward(
        &mut self,
        context: &Matrix,
        onehot_ms: &Matrix,
        onehot_mp: &Matrix,
        mode: Mode,
    ) -> Result<(Matrix, BasicReceiverCache), AgentError> {
        let x = Matrix::hcat(&[context, onehot_ms, onehot_mp])?;
        let (h, hidden) = self.hidden.forward(&x)?;
        let (probs, head) = self.head.forward(&h, mode)?;
        Ok((probs, BasicReceiverCache { hidden, head }))
    }

    pub fn backward(&mut self, cache: &BasicReceiverCache, dlogits: &Matrix) -> Result<(), AgentError> {
        let dh = self.head.backward(&cache.head, dlogits)?;
        self.hidden.backward(&cache.hidden, &dh)?;
        Ok(())
    }
}

impl Module for BasicReceiverNet {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.hidden.visit(prefix, f);
        self.head.visit(&join_name(prefix, "head"), f);
    }
}

/// Two-stage receiver with hard attention between the stages.
///
/// Stage 1 reads the context and `m_s` and picks a dimension. Stage 2 sees
/// only the objects' degrees on that dimension plus `m_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionalReceiverNet {
    pub n_dims: usize,
    pub stage1_hidden: HiddenStack,
    pub stage1_head: PolicyHead,
    pub stage2_hidden: HiddenStack,
    pub stage2_head: PolicyHead,
}

#[derive(Debug, Clone)]
pub struct StageCache {
    hidden: HiddenStackCache,
    head: PolicyHeadCache,
}

impl AttentionalReceiverNet {
    pub fn new<R: Rng + ?Sized>(n_dims: usize, widths: &Widths, rng: &mut R) -> Self {
        let stage1_hidden = HiddenStack::new(
            2 * n_dims * n_dims + n_dims,
            &[widths.attention_stage1],
            Activation::Elu,
            rng,
        );
        let stage1_head = PolicyHead::new(stage1_hidden.outputs(), n_dims, rng);
        let stage2_hidden = HiddenStack::new(2 * n_dims + 2, &widths.attention_stage2, Activation::Elu, rng);
        let stage2_head = PolicyHead::new(stage2_hidden.outputs(), 2 * n_dims, rng);
        AttentionalReceiverNet { n_dims, stage1_hidden, stage1_head, stage2_hidden, stage2_head }
    }

    pub fn stage1_input_width(&self) -> usize {
        self.stage1_hidden.inputs()
    }

    pub fn stage2_input_width(&self) -> usize {
        self.stage2_hidden.inputs()
    }

    pub fn output_width(&self) -> usize {
        self.stage2_head.outputs()
    }

    /// Distribution over dimensions to attend to.
    pub fn stage1(&mut self, context: &Matrix, onehot_ms: &Matrix, mode: Mode) -> Result<(Matrix, StageCache), AgentError> {
        let x = Matrix::hcat(&[context, onehot_ms])?;
        let (h, hidden) = self.stage1_hidden.forward(&x)?;
        let (probs, head) = self.stage1_head.forward(&h, mode)?;
        Ok((probs, StageCache { hidden, head }))
    }

    pub fn stage1_backward(&mut self, cache: &StageCache, dlogits: &Matrix) -> Result<(), AgentError> {
        let dh = self.stage1_head.backward(&cache.head, dlogits)?;
        self.stage1_hidden.backward(&cache.hidden, &dh)?;
        Ok(())
    }

    /// Distribution over object positions given the attended column.
    pub fn stage2(&mut self, attended: &Matrix, onehot_mp: &Matrix, mode: Mode) -> Result<(Matrix, StageCache), AgentError> {
        let x = Matrix::hcat(&[attended, onehot_mp])?;
        let (h, hidden) = self.stage2_hidden.forward(&x)?;
        let (probs, head) = self.stage2_head.forward(&h, mode)?;
        Ok((probs, StageCache { hidden, head }))
    }

    pub fn stage2_backward(&mut self, cache: &StageCache, dlogits: &Matrix) -> Result<(), AgentError> {
        let dh = self.stage2_head.backward(&cache.head, dlogits)?;
        self.stage2_hidden.backward(&cache.hidden, &dh)?;
        Ok(())
    }
}

impl StageCache {
    pub fn region_hash(&self) -> u64 {
        self.hidden.region_hash()
    }
}

impl Module for AttentionalReceiverNet {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.stage1_hidden.visit(&join_name(prefix, "stage1"), f);
        self.stage1_head.visit(&join_name(prefix, "stage1.head"), f);
        self.stage2_hidden.visit(&join_name(prefix, "stage2"), f);
        self.stage2_head.visit(&join_name(prefix, "stage2.head"), f);
    }
}

/// Hard attention: each object's degree on `dim`, in context order.
pub fn attend(context: &Context, dim: usize) -> Result<Vec<f64>, AgentError> {
    let n_dims = context.n_dims();
    if dim >= n_dims {
        return Err(AgentError::DimOutOfRange { dim, n_dims });
    }
    Ok(context.objects.iter().map(|o| o[dim].value()).collect())
}

/// Batched [`attend`] over flattened contexts (`rows × 2n²`).
pub fn attend_rows(contexts: &Matrix, n_dims: usize, dims: &[usize]) -> Result<Matrix, AgentError> {
    let n_objects = 2 * n_dims;
    contexts.expect_shape((dims.len(), n_objects * n_dims), "attend")?;
    let mut out = Matrix::zeros(dims.len(), n_objects);
    for (i, &dim) in dims.iter().enumerate() {
        if dim >= n_dims {
            return Err(AgentError::DimOutOfRange { dim, n_dims });
        }
        let row = contexts.row(i);
        for k in 0..n_objects {
            out.set(i, k, row[k * n_dims + dim]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReceiverNet {
    Basic(BasicReceiverNet),
    Attentional(AttentionalReceiverNet),
}

impl ReceiverNet {
    pub fn kind(&self) -> ReceiverKind {
        match self {
            ReceiverNet::Basic(_) => ReceiverKind::Basic,
            ReceiverNet::Attentional(_) => ReceiverKind::Attentional,
        }
    }

    pub fn n_dims(&self) -> usize {
        match self {
            ReceiverNet::Basic(r) => r.n_dims,
            ReceiverNet::Attentional(r) => r.n_dims,
        }
    }
}

impl Module for ReceiverNet {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        match self {
            ReceiverNet::Basic(r) => r.visit(prefix, f),
            ReceiverNet::Attentional(r) => r.visit(prefix, f),
        }
    }
}

/// A sender and receiver trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct Agents {
    pub sender: SenderNet,
    pub receiver: ReceiverNet,
    pub widths: Widths,
}

impl Agents {
    pub fn new<R: Rng + ?Sized>(n_dims: usize, kind: ReceiverKind, widths: Widths, rng: &mut R) -> Self {
        let sender = SenderNet::new(n_dims, &widths, rng);
        let receiver = match kind {
            ReceiverKind::Basic => ReceiverNet::Basic(BasicReceiverNet::new(n_dims, &widths, rng)),
            ReceiverKind::Attentional => ReceiverNet::Attentional(AttentionalReceiverNet::new(n_dims, &widths, rng)),
        };
        Agents { sender, receiver, widths }
    }

    pub fn n_dims(&self) -> usize {
        self.sender.n_dims
    }

    pub fn kind(&self) -> ReceiverKind {
        self.receiver.kind()
    }
}

impl Module for Agents {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.sender.visit(&join_name(prefix, "sender"), f);
        self.receiver.visit(&join_name(prefix, "receiver"), f);
    }
}

/// Fresh agents with the standard widths.
pub fn init_agents<R: Rng + ?Sized>(n_dims: usize, kind: ReceiverKind, rng: &mut R) -> Agents {
    Agents::new(n_dims, kind, Widths::default(), rng)
}
