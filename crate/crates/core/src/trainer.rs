//! Training loop: minibatch play, joint REINFORCE updates, evaluation.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    attend_rows, AgentError, Agents, BasicReceiverCache, ReceiverKind, ReceiverNet, SenderCache, StageCache, Widths,
};
use crate::env::{
    encode_sender_input, permute_for_receiver, sample_game, superlative_oracle, permuted_context, Context, EnvError,
    Extremum, GameInstance, Message, ReceiverView, Signature,
};
use crate::kernel::{categorical, reinforce_logit_grad, Adam, KernelError, Matrix, Mode, Module, StochasticNode};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// How test-time actions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    Sample,
    Argmax,
}

impl fmt::Display for ActionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionMode::Sample => "sample",
            ActionMode::Argmax => "argmax",
        })
    }
}

impl FromStr for ActionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample" => Ok(ActionMode::Sample),
            "argmax" => Ok(ActionMode::Argmax),
            other => Err(format!("unknown eval mode {other:?} (expected sample|argmax)")),
        }
    }
}

/// Which statistics batch norm uses at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchNormEval {
    Running,
    Batch,
}

impl BatchNormEval {
    fn mode(self) -> Mode {
        match self {
            BatchNormEval::Running => Mode::Eval,
            BatchNormEval::Batch => Mode::EvalBatchStats,
        }
    }
}

impl fmt::Display for BatchNormEval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BatchNormEval::Running => "running",
            BatchNormEval::Batch => "batch",
        })
    }
}

impl FromStr for BatchNormEval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "running" => Ok(BatchNormEval::Running),
            "batch" => Ok(BatchNormEval::Batch),
            other => Err(format!("unknown batch-norm eval mode {other:?} (expected running|batch)")),
        }
    }
}

/// Training minibatches per trial used for 1, 2 and 3 dimensions.
pub fn default_minibatches(n_dims: usize) -> usize {
    match n_dims {
        1 => 5_000,
        2 => 20_000,
        _ => 50_000,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_dims: usize,
    pub receiver: ReceiverKind,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub num_minibatches: usize,
    pub num_trials: usize,
    pub eval_games: usize,
    pub seed: u64,
    /// Subtract the minibatch mean reward from each reward.
    pub baseline: bool,
    pub rolling_window: usize,
    pub eval_mode: ActionMode,
    pub bn_eval: BatchNormEval,
}

impl TrainConfig {
    pub fn new(n_dims: usize, receiver: ReceiverKind) -> Self {
        TrainConfig {
            n_dims,
            receiver,
            batch_size: 64,
            learning_rate: 5e-4,
            num_minibatches: default_minibatches(n_dims),
            num_trials: 10,
            eval_games: 5_000,
            seed: 0,
            baseline: false,
            rolling_window: 10,
            eval_mode: ActionMode::Sample,
            bn_eval: BatchNormEval::Running,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("n_dims", self.n_dims),
            ("num_minibatches", self.num_minibatches),
            ("num_trials", self.num_trials),
            ("eval_games", self.eval_games),
            ("rolling_window", self.rolling_window),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(TrainError::InvalidConfig(format!("{name} must be positive")));
        }
        // batch norm needs two rows per batch
        if self.batch_size < 2 {
            return Err(TrainError::InvalidConfig("batch_size must be at least 2".into()));
        }
        if self.bn_eval == BatchNormEval::Batch && self.eval_games < 2 {
            return Err(TrainError::InvalidConfig("batch-statistics evaluation needs eval_games >= 2".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    master ^ splitmix64(index as u64)
}

/// Seed of the evaluation stream belonging to a trial.
pub fn eval_seed(trial_seed: u64) -> u64 {
    splitmix64(trial_seed ^ 0x00e7_a1ee_7a1e_5eed)
}

/// Actions taken in one game. `choice` is a receiver-order position.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub message: Message,
    pub attention: Option<usize>,
    pub choice: usize,
}

/// Anything that can play a batch of games: the neural agents, or the
/// hand-coded reference players.
pub trait Players {
    fn n_dims(&self) -> usize;

    fn play(
        &mut self,
        games: &[GameInstance],
        views: &[ReceiverView],
        mode: Mode,
        action: ActionMode,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Vec<Turn>, TrainError>;
}

fn choose(probs: &Matrix, action: ActionMode, rng: &mut dyn rand::RngCore) -> Result<Vec<StochasticNode>, KernelError> {
    (0..probs.rows())
        .map(|i| match action {
            ActionMode::Sample => categorical(probs.row(i), rng),
            ActionMode::Argmax => Ok(StochasticNode::greedy(probs.row(i))),
        })
        .collect()
}

fn indices(nodes: &[StochasticNode]) -> Vec<usize> {
    nodes.iter().map(|n| n.sampled_index).collect()
}

#[derive(Debug, Clone)]
enum ReceiverCache {
    Basic(BasicReceiverCache),
    Attentional { stage1: StageCache, stage2: StageCache },
}

/// Everything a neural forward pass over one batch produced.
#[derive(Debug, Clone)]
struct NeuralBatch {
    probs_ms: Matrix,
    probs_mp: Matrix,
    probs_dim: Option<Matrix>,
    probs_choice: Matrix,
    ms: Vec<StochasticNode>,
    mp: Vec<StochasticNode>,
    attention: Option<Vec<StochasticNode>>,
    choice: Vec<StochasticNode>,
    sender_cache: SenderCache,
    receiver_cache: ReceiverCache,
}

impl NeuralBatch {
    fn turns(&self) -> Vec<Turn> {
        (0..self.ms.len())
            .map(|i| Turn {
                message: Message { ms: self.ms[i].sampled_index, mp: self.mp[i].sampled_index },
                attention: self.attention.as_ref().map(|a| a[i].sampled_index),
                choice: self.choice[i].sampled_index,
            })
            .collect()
    }
}

fn forward_batch(
    agents: &mut Agents,
    games: &[GameInstance],
    views: &[ReceiverView],
    mode: Mode,
    action: ActionMode,
    rng: &mut dyn rand::RngCore,
) -> Result<NeuralBatch, TrainError> {
    let n = agents.n_dims();
    let b = games.len();
    let width = 2 * n * n;
    let sender_x = Matrix::from_vec(b, width, games.iter().flat_map(encode_sender_input).collect())?;
    let out = agents.sender.forward(&sender_x, mode)?;
    let ms = choose(&out.probs_ms, action, rng)?;
    let mp = choose(&out.probs_mp, action, rng)?;

    // The receiver gets the sampled signals, never the sender's distributions.
    let onehot_ms = Matrix::one_hot(&indices(&ms), n);
    let onehot_mp = Matrix::one_hot(&indices(&mp), 2);
    let ctx = Matrix::from_vec(b, width, views.iter().flat_map(|v| v.input.iter().copied()).collect())?;

    let (probs_dim, attention, probs_choice, choice, receiver_cache) = match &mut agents.receiver {
        ReceiverNet::Basic(r) => {
            let (probs, cache) = r.forward(&ctx, &onehot_ms, &onehot_mp, mode)?;
            let choice = choose(&probs, action, rng)?;
            (None, None, probs, choice, ReceiverCache::Basic(cache))
        }
        ReceiverNet::Attentional(r) => {
            let (dim_probs, stage1) = r.stage1(&ctx, &onehot_ms, mode)?;
            let dims = choose(&dim_probs, action, rng)?;
            let attended = attend_rows(&ctx, n, &indices(&dims))?;
            let (probs, stage2) = r.stage2(&attended, &onehot_mp, mode)?;
            let choice = choose(&probs, action, rng)?;
            (Some(dim_probs), Some(dims), probs, choice, ReceiverCache::Attentional { stage1, stage2 })
        }
    };

    Ok(NeuralBatch {
        probs_ms: out.probs_ms,
        probs_mp: out.probs_mp,
        probs_dim,
        probs_choice,
        ms,
        mp,
        attention,
        choice,
        sender_cache: out.cache,
        receiver_cache,
    })
}

impl Players for Agents {
    fn n_dims(&self) -> usize {
        Agents::n_dims(self)
    }

    fn play(
        &mut self,
        games: &[GameInstance],
        views: &[ReceiverView],
        mode: Mode,
        action: ActionMode,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Vec<Turn>, TrainError> {
        Ok(forward_batch(self, games, views, mode, action, rng)?.turns())
    }
}

/// Reference players implementing the superlative semantics directly: the
/// sender names the target's canonical (dimension, polarity) and the
/// receiver resolves it with [`superlative_oracle`] on its own view.
#[derive(Debug, Clone, Copy)]
pub struct OraclePlayers {
    pub n_dims: usize,
}

impl Players for OraclePlayers {
    fn n_dims(&self) -> usize {
        self.n_dims
    }

    fn play(
        &mut self,
        games: &[GameInstance],
        views: &[ReceiverView],
        _mode: Mode,
        _action: ActionMode,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<Vec<Turn>, TrainError> {
        games
            .iter()
            .zip(views)
            .map(|(g, v)| {
                let Extremum { dim, pol } = g.canonical;
                let seen = permuted_context(g, &v.order);
                let choice = superlative_oracle(&seen, dim, pol)?;
                Ok(Turn { message: Message { ms: dim, mp: pol.index() }, attention: Some(dim), choice })
            })
            .collect()
    }
}

/// One played game with every stochastic choice.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub game: GameInstance,
    pub view: ReceiverView,
    pub ms: StochasticNode,
    pub mp: StochasticNode,
    pub attention: Option<StochasticNode>,
    pub choice: StochasticNode,
    pub reward: f64,
}

impl EpisodeTrace {
    pub fn node_count(&self) -> usize {
        3 + usize::from(self.attention.is_some())
    }
}

/// A played minibatch, holding the forward caches the update needs.
#[derive(Debug, Clone)]
pub struct PlayedBatch {
    pub traces: Vec<EpisodeTrace>,
    pub accuracy: f64,
    pub mean_reward: f64,
    forward: NeuralBatch,
}

fn sample_games<R: Rng + ?Sized>(
    n_dims: usize,
    count: usize,
    rng: &mut R,
) -> Result<(Vec<GameInstance>, Vec<ReceiverView>), TrainError> {
    let mut games = Vec::with_capacity(count);
    let mut views = Vec::with_capacity(count);
    for _ in 0..count {
        let g = sample_game(n_dims, rng)?;
        views.push(permute_for_receiver(&g, rng));
        games.push(g);
    }
    Ok((games, views))
}

/// Plays `cfg.batch_size` games with training-mode forward passes.
pub fn play_minibatch<R: Rng>(agents: &mut Agents, cfg: &TrainConfig, rng: &mut R) -> Result<PlayedBatch, TrainError> {
    let (games, views) = sample_games(agents.n_dims(), cfg.batch_size, rng)?;
    let forward = forward_batch(agents, &games, &views, Mode::Train, ActionMode::Sample, rng)?;
    let mut traces = Vec::with_capacity(games.len());
    for (i, (game, view)) in games.into_iter().zip(views).enumerate() {
        let reward = if forward.choice[i].sampled_index == view.target_position { 1.0 } else { 0.0 };
        traces.push(EpisodeTrace {
            game,
            view,
            ms: forward.ms[i].clone(),
            mp: forward.mp[i].clone(),
            attention: forward.attention.as_ref().map(|a| a[i].clone()),
            choice: forward.choice[i].clone(),
            reward,
        });
    }
    let mean_reward = traces.iter().map(|t| t.reward).sum::<f64>() / traces.len() as f64;
    Ok(PlayedBatch { traces, accuracy: mean_reward, mean_reward, forward })
}

/// Per-game advantages: reward minus the batch mean when the baseline is on.
pub fn advantages(traces: &[EpisodeTrace], baseline: bool) -> Vec<f64> {
    let mean = traces.iter().map(|t| t.reward).sum::<f64>() / traces.len().max(1) as f64;
    traces.iter().map(|t| if baseline { t.reward - mean } else { t.reward }).collect()
}

/// One joint REINFORCE update of sender and receiver from a played batch.
///
/// Every stochastic node of a game, including the attention choice, is
/// credited with that game's advantage.
pub fn train_step(agents: &mut Agents, batch: &PlayedBatch, cfg: &TrainConfig) -> Result<(), TrainError> {
    let adv = advantages(&batch.traces, cfg.baseline);
    let b = batch.traces.len();
    let f = &batch.forward;
    agents.zero_grad();

    let d_ms = reinforce_logit_grad(&f.probs_ms, &indices(&f.ms), &adv, b)?;
    let d_mp = reinforce_logit_grad(&f.probs_mp, &indices(&f.mp), &adv, b)?;
    agents.sender.backward(&f.sender_cache, &d_ms, &d_mp)?;

    let d_choice = reinforce_logit_grad(&f.probs_choice, &indices(&f.choice), &adv, b)?;
    match (&mut agents.receiver, &f.receiver_cache) {
        (ReceiverNet::Basic(r), ReceiverCache::Basic(cache)) => r.backward(cache, &d_choice)?,
        (ReceiverNet::Attentional(r), ReceiverCache::Attentional { stage1, stage2 }) => {
            let probs_dim = f.probs_dim.as_ref().expect("attentional batch has dimension probabilities");
            let dims = indices(f.attention.as_ref().expect("attentional batch has attention nodes"));
            let d_dim = reinforce_logit_grad(probs_dim, &dims, &adv, b)?;
            r.stage1_backward(stage1, &d_dim)?;
            r.stage2_backward(stage2, &d_choice)?;
        }
        _ => return Err(TrainError::InvalidConfig("batch was played by a different receiver".into())),
    }

    let adam = Adam::new(cfg.learning_rate);
    agents.visit_params(&mut |_, p| adam.step(p));
    Ok(())
}

/// One test game's outcome. `choice` is a context index, so `correct` holds
/// exactly when `choice == target_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub game: usize,
    pub n_dims: usize,
    pub target_index: usize,
    pub signature: Signature,
    pub canonical: Extremum,
    pub message: Message,
    pub attention_dim: Option<usize>,
    pub choice: usize,
    pub correct: bool,
    pub context: Context,
}

/// Chunk sizes of at most `batch` covering `total`, never leaving a
/// single-row chunk (batch statistics need two rows).
fn chunk_sizes(total: usize, batch: usize) -> Vec<usize> {
    let mut sizes = vec![batch; total / batch];
    match total % batch {
        0 => {}
        1 if !sizes.is_empty() => *sizes.last_mut().expect("non-empty") += 1,
        r => sizes.push(r),
    }
    sizes
}

/// Plays `cfg.eval_games` fresh games without updating anything.
pub fn evaluate<P: Players + ?Sized, R: Rng>(
    players: &mut P,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<EvalRecord>, TrainError> {
    let n = players.n_dims();
    let mode = cfg.bn_eval.mode();
    let mut records = Vec::with_capacity(cfg.eval_games);
    for size in chunk_sizes(cfg.eval_games, cfg.batch_size) {
        let (games, views) = sample_games(n, size, rng)?;
        let turns = players.play(&games, &views, mode, cfg.eval_mode, rng)?;
        for ((game, view), turn) in games.into_iter().zip(views).zip(turns) {
            let choice = view.order[turn.choice];
            records.push(EvalRecord {
                game: records.len(),
                n_dims: n,
                target_index: game.target_index,
                correct: choice == game.target_index,
                signature: game.signature,
                canonical: game.canonical,
                message: turn.message,
                attention_dim: turn.attention,
                choice,
                context: game.context,
            });
        }
    }
    Ok(records)
}

pub fn accuracy(records: &[EvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub batch_accuracy: f64,
    pub rolling_accuracy: f64,
    pub mean_reward: f64,
}

/// Mean of the last `window` values pushed.
#[derive(Debug, Clone)]
pub struct RollingMean {
    window: usize,
    values: VecDeque<f64>,
    sum: f64,
}

impl RollingMean {
    pub fn new(window: usize) -> Self {
        RollingMean { window: window.max(1), values: VecDeque::new(), sum: 0.0 }
    }

    pub fn push(&mut self, v: f64) -> f64 {
        self.values.push_back(v);
        self.sum += v;
        if self.values.len() > self.window {
            self.sum -= self.values.pop_front().expect("non-empty");
        }
        // recompute to keep rounding drift out of long runs
        if self.values.len() == self.window {
            self.sum = self.values.iter().sum();
        }
        self.sum / self.values.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial_id: usize,
    pub seed: u64,
    pub log: Vec<StepLog>,
    pub test_accuracy: f64,
    pub records: Vec<EvalRecord>,
    pub agents: Agents,
}

/// Runs one trial, calling `on_step` after every update.
pub fn run_trial_with(
    cfg: &TrainConfig,
    trial_id: usize,
    seed: u64,
    widths: Widths,
    mut on_step: impl FnMut(&StepLog),
) -> Result<TrialResult, TrainError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = Agents::new(cfg.n_dims, cfg.receiver, widths, &mut rng);
    let mut rolling = RollingMean::new(cfg.rolling_window);
    let mut log = Vec::with_capacity(cfg.num_minibatches);
    for step in 0..cfg.num_minibatches {
        let batch = play_minibatch(&mut agents, cfg, &mut rng)?;
        train_step(&mut agents, &batch, cfg)?;
        let entry = StepLog {
            step,
            batch_accuracy: batch.accuracy,
            rolling_accuracy: rolling.push(batch.accuracy),
            mean_reward: batch.mean_reward,
        };
        on_step(&entry);
        log.push(entry);
    }
    let mut eval_rng = ChaCha8Rng::seed_from_u64(eval_seed(seed));
    let records = evaluate(&mut agents, cfg, &mut eval_rng)?;
    Ok(TrialResult { trial_id, seed, log, test_accuracy: accuracy(&records), records, agents })
}

pub fn run_trial(cfg: &TrainConfig, trial_id: usize, seed: u64) -> Result<TrialResult, TrainError> {
    run_trial_with(cfg, trial_id, seed, Widths::default(), |_| {})
}

/// Runs `trials` trials (ids `0..trials`, seeds from [`trial_seed`]) on up
/// to `parallel` worker threads. Results come back in trial order.
pub fn run_trials(cfg: &TrainConfig, trials: usize, parallel: usize) -> Result<Vec<TrialResult>, TrainError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<TrialResult, TrainError>>>> =
        Mutex::new((0..trials).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..parallel.clamp(1, trials.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= trials {
                    break;
                }
                let r = run_trial(cfg, i, trial_seed(cfg.seed, i));
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::init_agents;

    fn param_snapshot(agents: &mut Agents) -> Vec<f64> {
        let mut v = Vec::new();
        agents.visit_params(&mut |_, p| v.extend_from_slice(p.value.as_slice()));
        v
    }

    #[test]
    fn chunking_never_leaves_a_single_row() {
        assert_eq!(chunk_sizes(5000, 64).iter().sum::<usize>(), 5000);
        assert_eq!(chunk_sizes(65, 64), vec![65]);
        assert_eq!(chunk_sizes(129, 64), vec![64, 65]);
        assert_eq!(chunk_sizes(130, 64), vec![64, 64, 2]);
        assert_eq!(chunk_sizes(10, 64), vec![10]);
        assert_eq!(chunk_sizes(128, 64), vec![64, 64]);
    }

    #[test]
    fn rolling_mean_over_short_and_full_windows() {
        let mut r = RollingMean::new(3);
        assert_eq!(r.push(1.0), 1.0);
        assert_eq!(r.push(0.0), 0.5);
        assert!((r.push(0.5) - 0.5).abs() < 1e-12);
        assert!((r.push(1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::new(2, ReceiverKind::Basic);
        assert_eq!(cfg.num_minibatches, 20_000);
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 1;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 64;
        cfg.eval_games = 0;
        assert!(cfg.validate().is_err());
        assert_eq!(TrainConfig::new(1, ReceiverKind::Basic).num_minibatches, 5_000);
        assert_eq!(TrainConfig::new(3, ReceiverKind::Basic).num_minibatches, 50_000);
    }

    #[test]
    fn traces_have_binary_rewards_and_node_counts() {
        for (kind, nodes) in [(ReceiverKind::Basic, 3), (ReceiverKind::Attentional, 4)] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut agents = init_agents(2, kind, &mut rng);
            let cfg = TrainConfig::new(2, kind);
            let batch = play_minibatch(&mut agents, &cfg, &mut rng).unwrap();
            assert_eq!(batch.traces.len(), 64);
            for t in &batch.traces {
                assert!(t.reward == 0.0 || t.reward == 1.0);
                assert_eq!(t.node_count(), nodes);
                assert_eq!(t.reward == 1.0, t.choice.sampled_index == t.view.target_position);
            }
        }
    }

    #[test]
    fn zero_advantage_updates_change_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agents = init_agents(2, ReceiverKind::Attentional, &mut rng);
        let mut cfg = TrainConfig::new(2, ReceiverKind::Attentional);
        let mut batch = play_minibatch(&mut agents, &cfg, &mut rng).unwrap();
        let before = param_snapshot(&mut agents);

        // all rewards zero, no baseline
        cfg.baseline = false;
        batch.traces.iter_mut().for_each(|t| t.reward = 0.0);
        let mut a = agents.clone();
        train_step(&mut a, &batch, &cfg).unwrap();
        assert_eq!(param_snapshot(&mut a), before);

        // all rewards equal, with baseline
        cfg.baseline = true;
        batch.traces.iter_mut().for_each(|t| t.reward = 1.0);
        let mut a = agents.clone();
        train_step(&mut a, &batch, &cfg).unwrap();
        assert_eq!(param_snapshot(&mut a), before);

        // sanity: a nonzero advantage does move parameters
        batch.traces[0].reward = 0.0;
        let mut a = agents.clone();
        train_step(&mut a, &batch, &cfg).unwrap();
        assert_ne!(param_snapshot(&mut a), before);
    }

    #[test]
    fn oracle_players_are_perfect() {
        for n in 1..=3 {
            let mut cfg = TrainConfig::new(n, ReceiverKind::Basic);
            cfg.eval_games = 500;
            let records = evaluate(&mut OraclePlayers { n_dims: n }, &cfg, &mut ChaCha8Rng::seed_from_u64(n as u64)).unwrap();
            assert_eq!(records.len(), 500);
            assert_eq!(accuracy(&records), 1.0);
        }
    }

    #[test]
    fn evaluation_leaves_parameters_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agents = init_agents(2, ReceiverKind::Basic, &mut rng);
        let before = agents.clone();
        let mut cfg = TrainConfig::new(2, ReceiverKind::Basic);
        cfg.eval_games = 300;
        let records = evaluate(&mut agents, &cfg, &mut rng).unwrap();
        assert_eq!(records.len(), 300);
        let acc = accuracy(&records);
        assert!((0.0..=1.0).contains(&acc));
        assert_eq!(agents, before);
        for r in &records {
            assert_eq!(r.correct, r.choice == r.target_index);
        }
    }

    #[test]
    fn trial_seeds_differ_and_are_stable() {
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(7, 4));
        assert_ne!(eval_seed(1), 1);
    }
}
