//! Flat `key = value` configuration files.

use std::str::FromStr;

use crate::agents::ReceiverKind;
use crate::trainer::{default_minibatches, ActionMode, BatchNormEval, TrainConfig};

use super::CliError;

/// Every field of a training configuration, each optional so that files and
/// command-line flags can be layered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub n_dims: Option<usize>,
    pub receiver: Option<ReceiverKind>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub num_minibatches: Option<usize>,
    pub num_trials: Option<usize>,
    pub eval_games: Option<usize>,
    pub seed: Option<u64>,
    pub baseline: Option<bool>,
    pub rolling_window: Option<usize>,
    pub eval_mode: Option<ActionMode>,
    pub bn_eval: Option<BatchNormEval>,
}

pub const CONFIG_KEYS: [&str; 12] = [
    "n_dims",
    "receiver",
    "batch_size",
    "learning_rate",
    "num_minibatches",
    "num_trials",
    "eval_games",
    "seed",
    "baseline",
    "rolling_window",
    "eval_mode",
    "bn_eval",
];

/// Accepts `on/off`, `true/false`, `yes/no` and `1/0`.
pub fn parse_switch(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected on|off, got `{other}`")),
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| CliError::Config { line, message: format!("{key}: {e}") })
}

impl ConfigOverrides {
    /// Parses a config file. Blank lines and `#` comments are ignored;
    /// unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = ConfigOverrides::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Config { line, message: format!("expected `key = value`, got `{content}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key.to_string()) {
                return Err(CliError::Config { line, message: format!("duplicate key `{key}`") });
            }
            seen.push(key.to_string());
            match key {
                "n_dims" => out.n_dims = Some(parse_value(line, key, value)?),
                "receiver" => out.receiver = Some(parse_value(line, key, value)?),
                "batch_size" => out.batch_size = Some(parse_value(line, key, value)?),
                "learning_rate" => out.learning_rate = Some(parse_value(line, key, value)?),
                "num_minibatches" => out.num_minibatches = Some(parse_value(line, key, value)?),
                "num_trials" => out.num_trials = Some(parse_value(line, key, value)?),
                "eval_games" => out.eval_games = Some(parse_value(line, key, value)?),
                "seed" => out.seed = Some(parse_value(line, key, value)?),
                "baseline" => {
                    out.baseline =
                        Some(parse_switch(value).map_err(|m| CliError::Config { line, message: format!("baseline: {m}") })?)
                }
                "rolling_window" => out.rolling_window = Some(parse_value(line, key, value)?),
                "eval_mode" => out.eval_mode = Some(parse_value(line, key, value)?),
                "bn_eval" => out.bn_eval = Some(parse_value(line, key, value)?),
                _ => return Err(CliError::Config { line, message: format!("unknown key `{key}`") }),
            }
        }
        Ok(out)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Values set in `other` win.
    pub fn overlay(self, other: &ConfigOverrides) -> Self {
        ConfigOverrides {
            n_dims: other.n_dims.or(self.n_dims),
            receiver: other.receiver.or(self.receiver),
            batch_size: other.batch_size.or(self.batch_size),
            learning_rate: other.learning_rate.or(self.learning_rate),
            num_minibatches: other.num_minibatches.or(self.num_minibatches),
            num_trials: other.num_trials.or(self.num_trials),
            eval_games: other.eval_games.or(self.eval_games),
            seed: other.seed.or(self.seed),
            baseline: other.baseline.or(self.baseline),
            rolling_window: other.rolling_window.or(self.rolling_window),
            eval_mode: other.eval_mode.or(self.eval_mode),
            bn_eval: other.bn_eval.or(self.bn_eval),
        }
    }

    /// A full configuration. Unset fields take the defaults for the chosen
    /// dimension count, including its minibatch budget.
    pub fn resolve(&self) -> Result<TrainConfig, CliError> {
        let n = self.n_dims.unwrap_or(1);
        let mut cfg = TrainConfig::new(n, self.receiver.unwrap_or(ReceiverKind::Basic));
        cfg.num_minibatches = self.num_minibatches.unwrap_or_else(|| default_minibatches(n));
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        take!(batch_size, learning_rate, num_trials, eval_games, seed, baseline, rolling_window, eval_mode, bn_eval);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Serializes a configuration so that parsing it gives the same config back.
pub fn config_to_text(cfg: &TrainConfig) -> String {
    format!(
        "n_dims = {}\nreceiver = {}\nbatch_size = {}\nlearning_rate = {:?}\nnum_minibatches = {}\nnum_trials = {}\n\
         eval_games = {}\nseed = {}\nbaseline = {}\nrolling_window = {}\neval_mode = {}\nbn_eval = {}\n",
        cfg.n_dims,
        cfg.receiver,
        cfg.batch_size,
        cfg.learning_rate,
        cfg.num_minibatches,
        cfg.num_trials,
        cfg.eval_games,
        cfg.seed,
        if cfg.baseline { "on" } else { "off" },
        cfg.rolling_window,
        cfg.eval_mode,
        cfg.bn_eval,
    )
}
