use rand::Rng;

use super::{KernelError, Matrix};

const NORMALIZATION_TOL: f64 = 1e-6;

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// One sampled discrete choice.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticNode {
    pub probs: Vec<f64>,
    pub sampled_index: usize,
    pub log_prob: f64,
}

impl StochasticNode {
    /// Records a fixed choice, e.g. a replayed or greedy action.
    pub fn fixed(probs: &[f64], index: usize) -> Self {
        StochasticNode { probs: probs.to_vec(), sampled_index: index, log_prob: probs[index].ln() }
    }

    /// The most probable entry; ties go to the lowest index.
    pub fn greedy(probs: &[f64]) -> Self {
        let best = probs
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
        Self::fixed(probs, best)
    }
}

fn check_distribution(probs: &[f64]) -> Result<(), KernelError> {
    if probs.is_empty() {
        return Err(KernelError::InvalidDistribution("empty".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(KernelError::InvalidDistribution(format!("entry {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(KernelError::InvalidDistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// Draws an index with the given probabilities.
pub fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<StochasticNode, KernelError> {
    check_distribution(probs)?;
    let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    // Fall back to the last positive entry if rounding leaves u above the total.
    let mut index = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            index = i;
            break;
        }
    }
    Ok(StochasticNode::fixed(probs, index))
}

/// Gradient of `L = -(1/B) Σ_i advantage_i · log probs[i][action_i]` with
/// respect to the logits that produced `probs` through a softmax:
/// row `i` is `(advantage_i / B) · (probs_i - onehot(action_i))`.
pub fn reinforce_logit_grad(
    probs: &Matrix,
    actions: &[usize],
    advantages: &[f64],
    batch_size: usize,
) -> Result<Matrix, KernelError> {
    if actions.len() != probs.rows() || advantages.len() != probs.rows() {
        return Err(KernelError::Shape(format!(
            "{} probability rows, {} actions, {} advantages",
            probs.rows(),
            actions.len(),
            advantages.len()
        )));
    }
    if let Some(&a) = advantages.iter().find(|a| !a.is_finite()) {
        return Err(KernelError::NonFiniteAdvantage(a));
    }
    let mut grad = probs.clone();
    let scale = 1.0 / batch_size as f64;
    for (i, (&action, &adv)) in actions.iter().zip(advantages).enumerate() {
        let row = grad.row_mut(i);
        row[action] -= 1.0;
        row.iter_mut().for_each(|g| *g *= adv * scale);
    }
    Ok(grad)
}

/// The REINFORCE surrogate loss whose logit gradient is [`reinforce_logit_grad`].
pub fn surrogate_loss(probs: &Matrix, actions: &[usize], advantages: &[f64], batch_size: usize) -> f64 {
    let total: f64 = actions
        .iter()
        .zip(advantages)
        .enumerate()
        .map(|(i, (&a, &adv))| adv * probs.get(i, a).ln())
        .sum();
    -total / batch_size as f64
}
