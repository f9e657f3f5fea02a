// Trains one sender/receiver pair and reports test accuracy.
//
// ```text
// cargo run --release --example train_trial -- [n_dims] [basic|attentional] [minibatches] [seed] [baseline on|off]
// ```

use std::time::Instant;

use extremity::agents::{ReceiverKind, Widths};
use extremity::cli::parse_switch;
use extremity::trainer::{default_minibatches, run_trial_with, TrainConfig, TrialResult};

pub fn run_example(cfg: &TrainConfig) -> Result<TrialResult, Box<dyn std::error::Error>> {
    let report_every = (cfg.num_minibatches / 10).max(1);
    let started = Instant::now();
    let result = run_trial_with(cfg, 0, cfg.seed, Widths::default(), |s| {
        if (s.step + 1) % report_every == 0 {
            println!("step {:>6}  rolling accuracy {:.3}", s.step + 1, s.rolling_accuracy);
        }
    })?;
    println!(
        "n={} {}: test accuracy {:.4} over {} games ({:.1}s)",
        cfg.n_dims,
        cfg.receiver,
        result.test_accuracy,
        result.records.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(result)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_dims: usize = args.first().map_or(Ok(1), |s| s.parse())?;
    let kind: ReceiverKind = args.get(1).map_or(Ok(ReceiverKind::Basic), |s| s.parse())?;
    let mut cfg = TrainConfig::new(n_dims, kind);
    cfg.num_minibatches = args.get(2).map_or(Ok(default_minibatches(n_dims)), |s| s.parse())?;
    cfg.seed = args.get(3).map_or(Ok(1), |s| s.parse())?;
    if let Some(b) = args.get(4) {
        cfg.baseline = parse_switch(b)?;
    }
    run_example(&cfg).map(|_| ())
}
