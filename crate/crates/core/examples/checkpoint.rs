// Saves trained agents, reloads them, and checks that the reloaded agents
// replay the same test games identically.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use extremity::agents::ReceiverKind;
use extremity::cli::Checkpoint;
use extremity::trainer::{accuracy, eval_seed, evaluate, run_trial, TrainConfig};

pub fn run_example(dir: &Path, minibatches: usize) -> Result<bool, Box<dyn std::error::Error>> {
    let mut cfg = TrainConfig::new(1, ReceiverKind::Attentional);
    cfg.num_minibatches = minibatches;
    cfg.eval_games = 1000;
    let mut trial = run_trial(&cfg, 0, 11)?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join("agents.bin");
    let saved = Checkpoint::from_agents(&mut trial.agents);
    saved.save(&path)?;
    println!("{} sections, {} bytes -> {}", saved.sections.len(), std::fs::metadata(&path)?.len(), path.display());

    let loaded = Checkpoint::load(&path)?;
    let bit_exact = loaded.to_bytes() == saved.to_bytes();
    let mut agents = loaded.to_agents()?;
    let replay = evaluate(&mut agents, &cfg, &mut ChaCha8Rng::seed_from_u64(eval_seed(trial.seed)))?;
    let same = replay == trial.records;
    println!(
        "bit-exact reload: {bit_exact}; replayed accuracy {:.4} (trained run {:.4}); identical records: {same}",
        accuracy(&replay),
        trial.test_accuracy
    );
    Ok(bit_exact && same)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/checkpoint_example"));
    run_example(&dir, 1000).map(|_| ())
}
