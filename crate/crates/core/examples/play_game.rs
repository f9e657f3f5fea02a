// One round of the Extremity Game, played by hand-coded oracle agents.
//
// ```text
// cargo run --example play_game -- [n_dims] [seed]
// ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use extremity::env::{
    encode_sender_input, is_valid_context, permute_for_receiver, permuted_context, sample_game, superlative_oracle,
};
use extremity::trainer::{evaluate, OraclePlayers, TrainConfig};
use extremity::agents::ReceiverKind;

pub fn run_example(n_dims: usize, seed: u64) -> Result<f64, Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let game = sample_game(n_dims, &mut rng)?;
    println!("context ({} objects, {} dims), valid: {}", game.context.len(), n_dims, is_valid_context(&game.context)?);
    for (i, obj) in game.context.objects.iter().enumerate() {
        let marker = if i == game.target_index { "  <- target" } else { "" };
        let degrees: Vec<String> = obj.iter().map(|d| format!("{:+.1}", d.value())).collect();
        println!("  object {i}: [{}]{marker}", degrees.join(", "));
    }
    let sig: Vec<String> = game.signature.iter().map(ToString::to_string).collect();
    println!("signature {{{}}}, canonical {}", sig.join(", "), game.canonical);
    println!("sender input ({} values, target first): {:?}", encode_sender_input(&game).len(), encode_sender_input(&game));

    let view = permute_for_receiver(&game, &mut rng);
    let shuffled = permuted_context(&game, &view.order);
    let pick = superlative_oracle(&shuffled, game.canonical.dim, game.canonical.pol)?;
    println!(
        "receiver order {:?}; the {} object on dim {} sits at position {pick} (target at {})",
        view.order,
        game.canonical.pol,
        game.canonical.dim,
        view.target_position
    );

    // A perfect protocol: say the canonical extremum, decode it with the oracle.
    let mut cfg = TrainConfig::new(n_dims, ReceiverKind::Basic);
    cfg.eval_games = 1000;
    let records = evaluate(&mut OraclePlayers { n_dims }, &cfg, &mut rng)?;
    let acc = records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64;
    println!("oracle agents over {} games: accuracy {acc:.3}", records.len());
    Ok(acc)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().map_or(Ok(2), |s| s.parse())?;
    let seed = args.get(1).map_or(Ok(7), |s| s.parse())?;
    run_example(n, seed).map(|_| ())
}
