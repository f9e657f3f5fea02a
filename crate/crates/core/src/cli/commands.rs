use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::checks::{gradcheck_suite, GradcheckCase, SuiteOptions};
use crate::agents::ReceiverKind;
use crate::analysis::{accuracy_summary, protocol_metrics, render_bar_svg, ProtocolMetrics, SummaryStats};
use crate::trainer::{accuracy, eval_seed, evaluate, run_trials, TrainConfig, TrialResult};

use super::checkpoint::Checkpoint;
use super::config::{config_to_text, ConfigOverrides};
use super::io::{read_eval_records, write_eval_records, write_training_log};
use super::manifest::{write_json, RunManifest, TrialSeed};
use super::CliError;

pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const EVAL_RECORDS_FILE: &str = "eval_records.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Inputs shared by `train` and `reproduce`.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    /// Command-line values; they win over the config file.
    pub overrides: ConfigOverrides,
    pub out: PathBuf,
    pub parallel: usize,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        RunOptions { config: None, overrides: ConfigOverrides::default(), out: out.into(), parallel: 1 }
    }

    fn layered(&self) -> Result<ConfigOverrides, CliError> {
        let file = match &self.config {
            Some(p) => ConfigOverrides::load(p)?,
            None => ConfigOverrides::default(),
        };
        Ok(file.overlay(&self.overrides))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_id: usize,
    pub seed: u64,
    pub test_accuracy: f64,
    pub final_rolling_accuracy: f64,
    pub dir: String,
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Writes one trial's log, records, checkpoint and summary under `dir`.
fn write_trial(root: &Path, dir: &Path, trial: &mut TrialResult, manifest: &mut RunManifest) -> Result<TrialSummary, CliError> {
    create_dir(dir)?;
    let log = dir.join(TRAINING_LOG_FILE);
    write_training_log(&log, &trial.log)?;
    let records = dir.join(EVAL_RECORDS_FILE);
    write_eval_records(&records, &trial.records)?;
    let ckpt = dir.join(CHECKPOINT_FILE);
    Checkpoint::from_agents(&mut trial.agents).save(&ckpt)?;
    let summary = TrialSummary {
        trial_id: trial.trial_id,
        seed: trial.seed,
        test_accuracy: trial.test_accuracy,
        final_rolling_accuracy: trial.log.last().map_or(0.0, |s| s.rolling_accuracy),
        dir: dir.strip_prefix(root).unwrap_or(dir).display().to_string(),
    };
    let json = dir.join("trial.json");
    write_json(&json, &summary)?;
    for f in [&log, &records, &ckpt, &json] {
        manifest.add_file(root, f)?;
    }
    Ok(summary)
}

fn trial_dir(base: &Path, id: usize) -> PathBuf {
    base.join(format!("trial_{id:03}"))
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub trials: Vec<TrialResult>,
    pub summaries: Vec<TrialSummary>,
    pub manifest: RunManifest,
}

/// Trains `num_trials` trials (one unless configured) and writes each
/// trial's outputs plus the resolved config and a manifest.
pub fn cmd_train(opts: &RunOptions) -> Result<TrainOutcome, CliError> {
    let mut layered = opts.layered()?;
    layered.num_trials = layered.num_trials.or(Some(1));
    let config = layered.resolve()?;
    create_dir(&opts.out)?;
    let mut manifest = RunManifest::start("train");
    manifest.configs.push(config.clone());
    let config_path = opts.out.join("config.txt");
    std::fs::write(&config_path, config_to_text(&config)).map_err(|e| CliError::io(&config_path, e))?;
    manifest.add_file(&opts.out, &config_path)?;

    let mut trials = run_trials(&config, config.num_trials, opts.parallel)?;
    let mut summaries = Vec::new();
    for t in &mut trials {
        manifest.trial_seeds.push(TrialSeed { label: "train".into(), trial: t.trial_id, seed: t.seed });
        summaries.push(write_trial(&opts.out, &trial_dir(&opts.out, t.trial_id), t, &mut manifest)?);
    }
    let summary_path = opts.out.join("summary.json");
    let accs: Vec<f64> = summaries.iter().map(|s| s.test_accuracy).collect();
    write_json(
        &summary_path,
        &serde_json::json!({ "config": config, "summary": accuracy_summary(&accs)?, "trials": summaries }),
    )?;
    manifest.add_file(&opts.out, &summary_path)?;
    let manifest = manifest.finish(&opts.out)?;
    Ok(TrainOutcome { config, trials, summaries, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n_dims: usize,
    pub trials: usize,
    pub num_minibatches: usize,
    #[serde(flatten)]
    pub summary: SummaryStats,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub receiver: ReceiverKind,
    pub rows: Vec<GridRow>,
}

impl GridTable {
    /// Plain-text rendering in the layout of a results table.
    pub fn render(&self) -> String {
        let mut s = format!("Success on test, {} receiver\n", self.receiver);
        s.push_str("dims  trials  minibatches  mean   std\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<5} {:<7} {:<12} {:.3}  {:.3}\n",
                r.n_dims, r.trials, r.num_minibatches, r.summary.mean, r.summary.std
            ));
        }
        s
    }
}

#[derive(Debug)]
pub struct ReproduceOutcome {
    pub tables: Vec<GridTable>,
    pub manifest: RunManifest,
}

/// Runs the dims × trials grid for one receiver (or both when none is
/// given). `--dims` restricts the grid to one dimension count and
/// `--trials` sets the trial count, default 10.
pub fn cmd_reproduce(opts: &RunOptions) -> Result<ReproduceOutcome, CliError> {
    let layered = opts.layered()?;
    let kinds = match layered.receiver {
        Some(k) => vec![k],
        None => vec![ReceiverKind::Basic, ReceiverKind::Attentional],
    };
    let dims = match layered.n_dims {
        Some(n) => vec![n],
        None => vec![1, 2, 3],
    };
    create_dir(&opts.out)?;
    let mut manifest = RunManifest::start("reproduce");
    let mut tables = Vec::new();
    let mut text = String::new();
    for kind in kinds {
        let mut rows = Vec::new();
        for &n in &dims {
            let cell = ConfigOverrides { n_dims: Some(n), receiver: Some(kind), ..layered.clone() };
            let config = cell.resolve()?;
            let base = opts.out.join(kind.to_string()).join(format!("n{n}"));
            let mut trials = run_trials(&config, config.num_trials, opts.parallel)?;
            let label = format!("{kind}/n{n}");
            for t in &mut trials {
                manifest.trial_seeds.push(TrialSeed { label: label.clone(), trial: t.trial_id, seed: t.seed });
                write_trial(&opts.out, &trial_dir(&base, t.trial_id), t, &mut manifest)?;
            }
            let accuracies: Vec<f64> = trials.iter().map(|t| t.test_accuracy).collect();
            rows.push(GridRow {
                n_dims: n,
                trials: trials.len(),
                num_minibatches: config.num_minibatches,
                summary: accuracy_summary(&accuracies)?,
                accuracies,
            });
            manifest.configs.push(config);
        }
        let table = GridTable { receiver: kind, rows };
        text.push_str(&table.render());
        text.push('\n');
        tables.push(table);
    }
    let json = opts.out.join("summary.json");
    write_json(&json, &serde_json::json!({ "tables": tables }))?;
    let txt = opts.out.join("summary.txt");
    std::fs::write(&txt, &text).map_err(|e| CliError::io(&txt, e))?;
    manifest.add_file(&opts.out, &json)?;
    manifest.add_file(&opts.out, &txt)?;
    let manifest = manifest.finish(&opts.out)?;
    Ok(ReproduceOutcome { tables, manifest })
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    /// Only the evaluation fields (`eval_games`, `seed`, `eval_mode`,
    /// `bn_eval`, `batch_size`) are used; the architecture comes from the
    /// checkpoint.
    pub overrides: ConfigOverrides,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub accuracy: f64,
    pub records: Vec<crate::trainer::EvalRecord>,
    pub manifest: RunManifest,
}

/// Plays fresh test games with a saved checkpoint. With `--seed` set to a
/// trial's seed this regenerates that trial's evaluation records.
pub fn cmd_eval(opts: &EvalOptions) -> Result<EvalOutcome, CliError> {
    let ckpt = Checkpoint::load(&opts.checkpoint)?;
    let file = match &opts.config {
        Some(p) => ConfigOverrides::load(p)?,
        None => ConfigOverrides::default(),
    };
    let layered = ConfigOverrides { n_dims: Some(ckpt.n_dims), receiver: Some(ckpt.receiver), ..file.overlay(&opts.overrides) };
    let config = layered.resolve()?;
    let mut agents = ckpt.to_agents()?;
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed(config.seed));
    let records = evaluate(&mut agents, &config, &mut rng)?;
    create_dir(&opts.out)?;
    let mut manifest = RunManifest::start("eval");
    manifest.trial_seeds.push(TrialSeed { label: "eval".into(), trial: 0, seed: config.seed });
    let path = opts.out.join(EVAL_RECORDS_FILE);
    write_eval_records(&path, &records)?;
    let acc = accuracy(&records);
    let json = opts.out.join("eval.json");
    write_json(
        &json,
        &serde_json::json!({
            "checkpoint": opts.checkpoint.display().to_string(),
            "games": records.len(),
            "accuracy": acc,
            "config": config,
        }),
    )?;
    manifest.add_file(&opts.out, &path)?;
    manifest.add_file(&opts.out, &json)?;
    manifest.configs.push(config);
    let manifest = manifest.finish(&opts.out)?;
    Ok(EvalOutcome { accuracy: acc, records, manifest })
}

#[derive(Debug)]
pub struct AnalyzeOutcome {
    pub inputs: Vec<(PathBuf, PathBuf, ProtocolMetrics)>,
    pub manifest: RunManifest,
}

/// A directory name derived from an input path, e.g.
/// `runs/trial_000/eval_records.csv` → `trial_000_eval_records`.
fn label_for(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let parent = path.parent().and_then(Path::file_name).map(|s| s.to_string_lossy().into_owned());
    let raw = match parent {
        Some(p) if !p.is_empty() => format!("{p}_{stem}"),
        _ => stem,
    };
    raw.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Computes protocol metrics for each record file and draws its four panels.
pub fn cmd_analyze(inputs: &[PathBuf], out: &Path) -> Result<AnalyzeOutcome, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("analyze needs at least one eval-records file".into()));
    }
    create_dir(out)?;
    let mut manifest = RunManifest::start("analyze");
    let mut results = Vec::new();
    let mut used = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        let records = read_eval_records(input)?;
        let metrics = protocol_metrics(&records)?;
        let mut label = label_for(input);
        if used.contains(&label) {
            label = format!("{label}_{i}");
        }
        used.push(label.clone());
        let dir = out.join(&label);
        create_dir(&dir)?;
        for tab in &metrics.crosstabs {
            let svg = dir.join(format!("{}.svg", tab.key()));
            render_bar_svg(tab, &svg)?;
            manifest.add_file(out, &svg)?;
        }
        let json = dir.join("metrics.json");
        write_json(&json, &serde_json::json!({ "input": input.display().to_string(), "metrics": metrics }))?;
        manifest.add_file(out, &json)?;
        results.push((input.clone(), dir, metrics));
    }
    let manifest = manifest.finish(out)?;
    Ok(AnalyzeOutcome { inputs: results, manifest })
}

#[derive(Debug)]
pub struct GradcheckOutcome {
    pub cases: Vec<GradcheckCase>,
}

impl GradcheckOutcome {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.report.passed())
    }

    pub fn worst(&self) -> Option<&GradcheckCase> {
        self.cases.iter().max_by(|a, b| a.report.max_rel_error().total_cmp(&b.report.max_rel_error()))
    }
}

/// Finite-difference checks of every architecture at reduced widths.
pub fn cmd_gradcheck(opts: &SuiteOptions) -> GradcheckOutcome {
    GradcheckOutcome { cases: gradcheck_suite(opts) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_path_safe() {
        assert_eq!(label_for(Path::new("runs/trial_000/eval_records.csv")), "trial_000_eval_records");
        assert_eq!(label_for(Path::new("my records.csv")), "my_records");
    }
}
