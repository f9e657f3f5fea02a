use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use extremity::env::{
    encode_sender_input, extremal_signature, generate_context, is_valid_context, permute_for_receiver, sample_game,
    superlative_oracle, Context, Extremum, Polarity,
};

/// Index of the unique smallest (or largest) degree on `dim`, by scanning.
fn brute_extreme(ctx: &Context, dim: usize, pol: Polarity) -> Option<usize> {
    let vals: Vec<f64> = (0..ctx.len()).map(|i| ctx.degree(i, dim)).collect();
    let best = match pol {
        Polarity::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
        Polarity::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let hits: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] == best).collect();
    (hits.len() == 1).then(|| hits[0])
}

fn brute_valid(ctx: &Context) -> bool {
    let n = ctx.n_dims();
    ctx.len() == 2 * n
        && (0..ctx.len()).all(|i| {
            (0..n).any(|d| Polarity::ALL.iter().any(|&p| brute_extreme(ctx, d, p) == Some(i)))
        })
}

fn on_grid(v: f64) -> bool {
    let s = (v * 10.0).round();
    (v * 10.0 - s).abs() < 1e-9 && s.abs() <= 9.0
}

#[test]
fn ten_thousand_contexts_per_n_are_valid_and_oracle_agrees() {
    for n in 1..=3 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + n as u64);
        for _ in 0..10_000 {
            let ctx = generate_context(n, &mut rng).unwrap();
            assert!(brute_valid(&ctx));
            assert!(is_valid_context(&ctx).unwrap());
            for d in 0..n {
                for p in Polarity::ALL {
                    assert_eq!(Some(superlative_oracle(&ctx, d, p).unwrap()), brute_extreme(&ctx, d, p));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_games_are_consistent(n in 1usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game = sample_game(n, &mut rng).unwrap();
        let ctx = &game.context;
        prop_assert_eq!(ctx.len(), 2 * n);
        prop_assert!(ctx.objects.iter().flatten().all(|d| on_grid(d.value())));
        prop_assert!(brute_valid(ctx));

        // The signature is exactly the set of extrema the target holds.
        let expected: BTreeSet<Extremum> = (0..n)
            .flat_map(|d| Polarity::ALL.map(|p| Extremum::new(d, p)))
            .filter(|e| brute_extreme(ctx, e.dim, e.pol) == Some(game.target_index))
            .collect();
        prop_assert_eq!(&game.signature, &expected);
        prop_assert_eq!(extremal_signature(ctx, game.target_index).unwrap(), expected.clone());
        prop_assert_eq!(Some(&game.canonical), expected.iter().next());

        // Sender input: the target's degrees first, then the same multiset of objects.
        let enc = encode_sender_input(&game);
        prop_assert_eq!(enc.len(), 2 * n * n);
        let target: Vec<f64> = ctx.objects[game.target_index].iter().map(|d| d.value()).collect();
        prop_assert_eq!(&enc[..n], &target[..]);
        let mut a: Vec<Vec<i64>> = enc.chunks(n).map(|c| c.iter().map(|v| (v * 10.0).round() as i64).collect()).collect();
        let mut b: Vec<Vec<i64>> = ctx.objects.iter().map(|o| o.iter().map(|d| (d.value() * 10.0).round() as i64).collect()).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);

        // Receiver view: a permutation that keeps track of the target.
        let view = permute_for_receiver(&game, &mut rng);
        let mut sorted = view.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..2 * n).collect::<Vec<_>>());
        prop_assert_eq!(view.order[view.target_position], game.target_index);
        for (k, &i) in view.order.iter().enumerate() {
            for d in 0..n {
                prop_assert_eq!(view.degree(k, d, n), ctx.degree(i, d));
            }
        }
    }
}

/// Pearson statistic of observed counts against a uniform expectation.
fn chi_square(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

#[test]
fn target_index_is_uniform() {
    // chi-square 0.999 quantile with 5 degrees of freedom
    const CRITICAL_DF5: f64 = 20.515;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0u64; 6];
    for _ in 0..40_000 {
        counts[sample_game(3, &mut rng).unwrap().target_index] += 1;
    }
    let stat = chi_square(&counts);
    assert!(stat < CRITICAL_DF5, "chi-square {stat}, counts {counts:?}");
}

#[test]
fn receiver_permutation_is_uniform() {
    // chi-square 0.999 quantile with 23 degrees of freedom
    const CRITICAL_DF23: f64 = 49.728;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let game = sample_game(2, &mut rng).unwrap();
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..20_000 {
        *counts.entry(permute_for_receiver(&game, &mut rng).order).or_default() += 1;
    }
    assert_eq!(counts.len(), 24);
    let stat = chi_square(&counts.values().copied().collect::<Vec<_>>());
    assert!(stat < CRITICAL_DF23, "chi-square {stat}");
}
