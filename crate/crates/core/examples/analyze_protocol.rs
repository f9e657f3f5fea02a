// Protocol diagnostics on three synthetic communication systems: an ideal
// content/function split, a "maximally separating" one, and noise. Writes
// the metrics and bar charts for each.
//
// ```text
// cargo run --example analyze_protocol -- [output dir]
// ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use extremity::analysis::{max_separation_fraction, protocol_metrics, render_bar_svg};
use extremity::env::{sample_game, Extremum, Message, Polarity};
use extremity::trainer::EvalRecord;

fn synthetic(n: usize, games: usize, seed: u64, speak: impl Fn(Extremum, &mut ChaCha8Rng) -> Message) -> Vec<EvalRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..games)
        .map(|g| {
            let game = sample_game(n, &mut rng).expect("valid n");
            let message = speak(game.canonical, &mut rng);
            EvalRecord {
                game: g,
                n_dims: n,
                target_index: game.target_index,
                signature: game.signature,
                canonical: game.canonical,
                message,
                attention_dim: None,
                choice: game.target_index,
                correct: true,
                context: game.context,
            }
        })
        .collect()
}

pub fn run_example(out: &Path) -> Result<Vec<(String, f64, bool)>, Box<dyn std::error::Error>> {
    let n = 2;
    let systems: Vec<(&str, Vec<EvalRecord>)> = vec![
        ("ideal", synthetic(n, 2000, 1, |e, _| Message { ms: e.dim, mp: e.pol.index() })),
        // Minimum and maximum of a dimension never share either signal.
        ("separating", synthetic(n, 2000, 2, |e, _| match e.pol {
            Polarity::Min => Message { ms: e.dim, mp: 0 },
            Polarity::Max => Message { ms: (e.dim + 1) % 2, mp: 1 },
        })),
        ("random", synthetic(n, 2000, 3, |_, rng| Message { ms: rng.gen_range(0..2), mp: rng.gen_range(0..2) })),
    ];
    let mut summary = Vec::new();
    for (name, records) in &systems {
        let m = protocol_metrics(records)?;
        let dir = out.join(name);
        std::fs::create_dir_all(&dir)?;
        for tab in &m.crosstabs {
            render_bar_svg(tab, &dir.join(format!("{}.svg", tab.key())))?;
        }
        std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&m)?)?;
        println!(
            "{name:<11} separation {:.3}  consistency (dim {:.3}, pol {:.3})  {}",
            max_separation_fraction(records),
            m.consistency.dimension,
            m.consistency.polarity,
            m.verdict
        );
        summary.push((name.to_string(), m.max_separation_fraction, m.consistency.functional()));
    }
    println!("charts and metrics in {}", out.display());
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/analyze_protocol"));
    run_example(&out).map(|_| ())
}
