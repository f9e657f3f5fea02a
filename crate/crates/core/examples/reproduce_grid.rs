// A scaled-down results grid through the same code path as
// `extremity reproduce`: per-trial logs, records and checkpoints, a summary
// table, and a checksummed manifest.
//
// ```text
// cargo run --release --example reproduce_grid -- [output dir] [trials] [minibatches]
// ```

use std::path::{Path, PathBuf};

use extremity::agents::ReceiverKind;
use extremity::cli::{cmd_reproduce, ConfigOverrides, GridTable, RunOptions};

pub fn run_example(out: &Path, trials: usize, minibatches: usize) -> Result<Vec<GridTable>, Box<dyn std::error::Error>> {
    let opts = RunOptions {
        overrides: ConfigOverrides {
            receiver: Some(ReceiverKind::Basic),
            num_trials: Some(trials),
            num_minibatches: Some(minibatches),
            eval_games: Some(1000),
            seed: Some(2024),
            ..Default::default()
        },
        parallel: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..RunOptions::new(out)
    };
    let outcome = cmd_reproduce(&opts)?;
    for t in &outcome.tables {
        print!("{}", t.render());
    }
    println!("{} files checksummed in {}/manifest.json", outcome.manifest.files.len(), out.display());
    Ok(outcome.tables)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/reproduce_grid"));
    let trials = args.get(1).map_or(Ok(2), |s| s.parse())?;
    let minibatches = args.get(2).map_or(Ok(300), |s| s.parse())?;
    run_example(&out, trials, minibatches).map(|_| ())
}
