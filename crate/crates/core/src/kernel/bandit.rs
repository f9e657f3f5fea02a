use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{categorical, reinforce_logit_grad, softmax, Adam, KernelError, Matrix, Parameter};

/// A softmax policy over arms with fixed rewards, trained by REINFORCE.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditConfig {
    pub rewards: Vec<f64>,
    pub steps: usize,
    pub pulls_per_step: usize,
    pub learning_rate: f64,
    pub baseline: bool,
    pub seed: u64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig { rewards: vec![1.0, 0.0], steps: 2000, pulls_per_step: 32, learning_rate: 1e-2, baseline: false, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditRun {
    /// Policy after the last step.
    pub probs: Vec<f64>,
    /// Probability of the best arm after every step.
    pub best_arm_prob: Vec<f64>,
    pub best_arm: usize,
}

impl BanditRun {
    /// First step (1-based) after which the best arm's probability exceeds `threshold`.
    pub fn steps_to(&self, threshold: f64) -> Option<usize> {
        self.best_arm_prob.iter().position(|&p| p > threshold).map(|i| i + 1)
    }

    /// The arm the final policy favours.
    pub fn converged_arm(&self) -> usize {
        self.probs.iter().enumerate().fold(0, |b, (i, &p)| if p > self.probs[b] { i } else { b })
    }
}

pub fn train_bandit(cfg: &BanditConfig) -> Result<BanditRun, KernelError> {
    let arms = cfg.rewards.len();
    let best_arm = cfg.rewards.iter().enumerate().fold(0, |b, (i, &r)| if r > cfg.rewards[b] { i } else { b });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut logits = Parameter::new(Matrix::zeros(1, arms));
    let adam = Adam::new(cfg.learning_rate);
    let b = cfg.pulls_per_step;
    let mut history = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let probs = softmax(&logits.value);
        let mut actions = Vec::with_capacity(b);
        for _ in 0..b {
            actions.push(categorical(probs.row(0), &mut rng)?.sampled_index);
        }
        let rewards: Vec<f64> = actions.iter().map(|&a| cfg.rewards[a]).collect();
        let mean = if cfg.baseline { rewards.iter().sum::<f64>() / b as f64 } else { 0.0 };
        let adv: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
        // Every pull shares the same logits, so the per-pull gradients add up.
        let rows = Matrix::from_vec(b, arms, probs.row(0).repeat(b)).expect("sized above");
        let g = reinforce_logit_grad(&rows, &actions, &adv, b)?;
        for i in 0..b {
            for (acc, v) in logits.grad.row_mut(0).iter_mut().zip(g.row(i)) {
                *acc += v;
            }
        }
        adam.step(&mut logits);
        history.push(softmax(&logits.value).get(0, best_arm));
    }
    Ok(BanditRun { probs: softmax(&logits.value).row(0).to_vec(), best_arm_prob: history, best_arm })
}
