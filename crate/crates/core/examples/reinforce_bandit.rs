// REINFORCE on a two-armed bandit, with and without a mean-reward baseline.

use extremity::kernel::{train_bandit, BanditConfig};

/// Returns, per seed, the steps needed to put 95% on the better arm.
pub fn run_example(seeds: u64) -> Result<Vec<Option<usize>>, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    for seed in 0..seeds {
        let plain = train_bandit(&BanditConfig { seed, ..Default::default() })?;
        let based = train_bandit(&BanditConfig { seed, baseline: true, ..Default::default() })?;
        println!(
            "seed {seed}: p(best) {:.4} after {} steps (95% at step {:?}); with baseline {:.4} (95% at {:?})",
            plain.probs[plain.best_arm],
            plain.best_arm_prob.len(),
            plain.steps_to(0.95),
            based.probs[based.best_arm],
            based.steps_to(0.95),
        );
        out.push(plain.steps_to(0.95));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(5).map(|_| ())
}
