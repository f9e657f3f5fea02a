use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use extremity::agents::{attend_rows, init_agents, Agents, ReceiverKind, ReceiverNet, Widths};
use extremity::env::{encode_sender_input, permute_for_receiver, permuted_context, sample_game, superlative_oracle};
use extremity::kernel::{Matrix, Mode};
use extremity::trainer::{evaluate, play_minibatch, run_trial, run_trial_with, run_trials, TrainConfig};

fn max_entry(m: &Matrix) -> f64 {
    m.as_slice().iter().copied().fold(0.0, f64::max)
}

/// Largest probability any freshly initialized network assigns, over a
/// batch of random games.
fn init_max_probability(n: usize, kind: ReceiverKind, seed: u64, mode: Mode) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = init_agents(n, kind, &mut rng);
    let games: Vec<_> = (0..64).map(|_| sample_game(n, &mut rng).unwrap()).collect();
    let views: Vec<_> = games.iter().map(|g| permute_for_receiver(g, &mut rng)).collect();
    let rows = |f: &dyn Fn(usize) -> Vec<f64>| Matrix::from_rows(&(0..64).map(f).collect::<Vec<_>>()).unwrap();
    let x = rows(&|i| encode_sender_input(&games[i]));
    let ctx = rows(&|i| views[i].input.clone());
    let ms: Vec<usize> = (0..64).map(|_| rng.gen_range(0..n)).collect();
    let mp: Vec<usize> = (0..64).map(|_| rng.gen_range(0..2)).collect();
    let (oh_ms, oh_mp) = (Matrix::one_hot(&ms, n), Matrix::one_hot(&mp, 2));
    let out = agents.sender.forward(&x, mode).unwrap();
    // Single-option distributions (the n=1 dimension heads) are trivially 1.
    let mut worst = max_entry(&out.probs_mp);
    if n > 1 {
        worst = worst.max(max_entry(&out.probs_ms));
    }
    match &mut agents.receiver {
        ReceiverNet::Basic(r) => worst = worst.max(max_entry(&r.forward(&ctx, &oh_ms, &oh_mp, mode).unwrap().0)),
        ReceiverNet::Attentional(r) => {
            let (p1, _) = r.stage1(&ctx, &oh_ms, mode).unwrap();
            let dims: Vec<usize> = (0..64).map(|_| rng.gen_range(0..n)).collect();
            let (p2, _) = r.stage2(&attend_rows(&ctx, n, &dims).unwrap(), &oh_mp, mode).unwrap();
            worst = worst.max(max_entry(&p2));
            if n > 1 {
                worst = worst.max(max_entry(&p1));
            }
        }
    }
    worst
}

#[test]
fn initial_policies_are_near_uniform_in_eval_mode() {
    for n in 1..=3 {
        for kind in [ReceiverKind::Basic, ReceiverKind::Attentional] {
            for seed in 0..5 {
                let m = init_max_probability(n, kind, seed, Mode::Eval);
                assert!(m < 0.9, "n={n} {kind} seed {seed}: {m}");
            }
        }
    }
}

#[test]
fn untrained_agents_guess_between_two_objects() {
    let cfg = TrainConfig::new(1, ReceiverKind::Basic);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [ReceiverKind::Basic, ReceiverKind::Attentional] {
        let mut agents = init_agents(1, kind, &mut rng);
        let mean = (0..20).map(|_| play_minibatch(&mut agents, &cfg, &mut rng).unwrap().accuracy).sum::<f64>() / 20.0;
        assert!((mean - 0.5).abs() < 0.15, "{kind}: {mean}");
    }
}

#[test]
fn rewards_agree_with_the_oracle() {
    let cfg = TrainConfig::new(2, ReceiverKind::Attentional);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut agents = init_agents(2, ReceiverKind::Attentional, &mut rng);
    for _ in 0..10 {
        for t in play_minibatch(&mut agents, &cfg, &mut rng).unwrap().traces {
            let shown = permuted_context(&t.game, &t.view.order);
            let oracle = superlative_oracle(&shown, t.game.canonical.dim, t.game.canonical.pol).unwrap();
            assert_eq!(oracle, t.view.target_position);
            assert_eq!(t.reward == 1.0, t.choice.sampled_index == oracle);
            assert_eq!(t.reward == 1.0, t.view.order[t.choice.sampled_index] == t.game.target_index);
        }
    }
}

#[test]
fn stage_two_sees_only_the_attended_column() {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut agents = Agents::new(n, ReceiverKind::Attentional, Widths::default(), &mut rng);
    let ReceiverNet::Attentional(r) = &mut agents.receiver else { unreachable!() };
    let b = 16;
    let ctx = Matrix::from_rows(
        &(0..b).map(|_| permute_for_receiver(&sample_game(n, &mut rng).unwrap(), &mut rng).input).collect::<Vec<_>>(),
    )
    .unwrap();
    let dims: Vec<usize> = (0..b).map(|_| rng.gen_range(0..n)).collect();
    let mp = Matrix::one_hot(&(0..b).map(|_| rng.gen_range(0..2)).collect::<Vec<_>>(), 2);
    for mode in [Mode::Eval, Mode::EvalBatchStats] {
        let (before, _) = r.stage2(&attend_rows(&ctx, n, &dims).unwrap(), &mp, mode).unwrap();
        let mut scrambled = ctx.clone();
        for (i, &d) in dims.iter().enumerate() {
            for (k, v) in scrambled.row_mut(i).iter_mut().enumerate() {
                if k % n != d {
                    *v = rng.gen_range(-0.9..0.9);
                }
            }
        }
        assert_ne!(scrambled, ctx);
        let (after, _) = r.stage2(&attend_rows(&scrambled, n, &dims).unwrap(), &mp, mode).unwrap();
        assert_eq!(
            before.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            after.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn trials_are_reproducible_and_sized() {
    let mut cfg = TrainConfig::new(2, ReceiverKind::Attentional);
    cfg.num_minibatches = 40;
    cfg.eval_games = 300;
    let a = run_trial(&cfg, 0, 77).unwrap();
    let b = run_trial(&cfg, 0, 77).unwrap();
    assert_eq!(a.log.len(), 40);
    assert_eq!(a.log, b.log);
    assert_eq!(a.records, b.records);
    assert_eq!(a.records.len(), 300);
    let acc = a.records.iter().filter(|r| r.correct).count() as f64 / 300.0;
    assert_eq!(a.test_accuracy, acc);
    for (i, s) in a.log.iter().enumerate() {
        let lo = i.saturating_sub(cfg.rolling_window - 1);
        let window = &a.log[lo..=i];
        let mean = window.iter().map(|w| w.batch_accuracy).sum::<f64>() / window.len() as f64;
        assert!((s.rolling_accuracy - mean).abs() < 1e-12);
    }
    // Thread count must not change results.
    let serial = run_trials(&cfg, 2, 1).unwrap();
    let parallel = run_trials(&cfg, 2, 2).unwrap();
    for (s, p) in serial.iter().zip(&parallel) {
        assert_eq!((s.seed, &s.log, &s.records), (p.seed, &p.log, &p.records));
    }
}

#[test]
fn evaluation_defaults_to_five_thousand_games() {
    let cfg = TrainConfig::new(1, ReceiverKind::Basic);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut agents = init_agents(1, ReceiverKind::Basic, &mut rng);
    let records = evaluate(&mut agents, &cfg, &mut rng).unwrap();
    assert_eq!(records.len(), 5000);
    assert!(records.iter().all(|r| r.correct == (r.choice == r.target_index)));
}

/// Ten full-length n=1 Basic trials; at least eight must push rolling
/// accuracy past 0.9.
#[test]
fn basic_one_dim_learns_on_most_seeds() {
    let cfg = TrainConfig::new(1, ReceiverKind::Basic);
    let mut reached = 0;
    for trial in 0..10 {
        let mut best: f64 = 0.0;
        let mut cfg = cfg.clone();
        cfg.eval_games = 100;
        run_trial_with(&cfg, trial, 1000 + trial as u64, Widths::default(), |s| best = best.max(s.rolling_accuracy)).unwrap();
        if best > 0.9 {
            reached += 1;
        }
    }
    assert!(reached >= 8, "{reached}/10 seeds reached 0.9");
}

