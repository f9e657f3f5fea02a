use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::agents::checks::SuiteOptions;
use crate::agents::ReceiverKind;
use crate::trainer::ActionMode;

use super::commands::{cmd_analyze, cmd_eval, cmd_gradcheck, cmd_reproduce, cmd_train, EvalOptions, RunOptions};
use super::config::{parse_switch, ConfigOverrides};
use super::CliError;

#[derive(Debug, Parser)]
#[command(name = "extremity", version, about = "Extremity Game: training, reproduction and protocol analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train agents (one trial unless --trials is given).
    Train(CommonArgs),
    /// Run the dims × trials grid and summarize it.
    Reproduce(CommonArgs),
    /// Evaluate a saved checkpoint on fresh games.
    Eval(EvalArgs),
    /// Protocol metrics and bar charts for evaluation records.
    Analyze(AnalyzeArgs),
    /// Finite-difference check of every backward pass.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub receiver: Option<ReceiverKind>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub minibatches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Subtract the minibatch mean reward (on|off).
    #[arg(long, value_parser = parse_switch)]
    pub baseline: Option<bool>,
    #[arg(long)]
    pub eval_mode: Option<ActionMode>,
    #[arg(long, env = "EXTREMITY_OUT", default_value = "runs")]
    pub out: PathBuf,
    /// Worker threads for trial-parallel runs [default: available cores].
    #[arg(long)]
    pub parallel: Option<usize>,
}

impl CommonArgs {
    pub fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            n_dims: self.dims,
            receiver: self.receiver,
            num_trials: self.trials,
            num_minibatches: self.minibatches,
            seed: self.seed,
            baseline: self.baseline,
            eval_mode: self.eval_mode,
            ..Default::default()
        }
    }

    pub fn run_options(&self) -> RunOptions {
        let parallel = self
            .parallel
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        RunOptions { config: self.config.clone(), overrides: self.overrides(), out: self.out.clone(), parallel }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train` or `reproduce`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Number of test games.
    #[arg(long)]
    pub games: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Eval-records CSV files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Random configurations per architecture.
    #[arg(long, default_value_t = 20)]
    pub configurations: usize,
    /// Corrupt the backward passes; the check must then fail.
    #[arg(long)]
    pub inject_fault: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Runs a parsed command and prints a short report.
pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Train(a) => {
            let out = cmd_train(&a.run_options())?;
            for s in &out.summaries {
                println!("trial {} seed {:#018x}: test accuracy {:.4}", s.trial_id, s.seed, s.test_accuracy);
            }
            println!("wrote {}", a.out.display());
        }
        Command::Reproduce(a) => {
            let out = cmd_reproduce(&a.run_options())?;
            for t in &out.tables {
                println!("{}", t.render());
            }
            println!("wrote {}", a.out.display());
        }
        Command::Eval(a) => {
            let overrides = ConfigOverrides { eval_games: a.games, ..a.common.overrides() };
            let opts = EvalOptions {
                checkpoint: a.checkpoint,
                overrides,
                config: a.common.config.clone(),
                out: a.common.out.clone(),
            };
            let out = cmd_eval(&opts)?;
            println!("{} games, accuracy {:.4}", out.records.len(), out.accuracy);
        }
        Command::Analyze(a) => {
            let out = cmd_analyze(&a.inputs, &a.common.out)?;
            for (input, dir, m) in &out.inputs {
                println!(
                    "{}: accuracy {:.4}, separation {:.3}, consistency ({:.3}, {:.3}) -> {} [{}]",
                    input.display(),
                    m.accuracy,
                    m.max_separation_fraction,
                    m.consistency.dimension,
                    m.consistency.polarity,
                    m.verdict,
                    dir.display()
                );
            }
        }
        Command::Gradcheck(a) => {
            let opts = SuiteOptions {
                configurations: a.configurations,
                seed: a.common.seed.unwrap_or(SuiteOptions::default().seed),
                inject_fault: a.inject_fault,
            };
            let out = cmd_gradcheck(&opts);
            for c in &out.cases {
                println!("{}\n{}", c.label, c.report);
            }
            if let Some(w) = out.worst() {
                println!("worst case: {} ({:.3e})", w.label, w.report.max_rel_error());
            }
            println!("gradcheck {}", if out.passed() { "PASS" } else { "FAIL" });
            if !out.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Parses `args` (program name first) and runs the command. Usage errors
/// exit with 2, runtime errors with 1.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_documented_flag() {
        let cli = Cli::try_parse_from([
            "extremity", "train", "--config", "c.txt", "--dims", "2", "--receiver", "attentional", "--trials", "3",
            "--minibatches", "40", "--seed", "9", "--baseline", "on", "--eval-mode", "argmax", "--out", "o",
            "--parallel", "2",
        ])
        .unwrap();
        let Command::Train(a) = cli.command else { panic!("not train") };
        let o = a.overrides();
        assert_eq!(o.n_dims, Some(2));
        assert_eq!(o.receiver, Some(ReceiverKind::Attentional));
        assert_eq!((o.num_trials, o.num_minibatches, o.seed), (Some(3), Some(40), Some(9)));
        assert_eq!(o.baseline, Some(true));
        assert_eq!(o.eval_mode, Some(ActionMode::Argmax));
        assert_eq!(a.run_options().parallel, 2);
        assert_eq!(a.out, PathBuf::from("o"));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Cli::try_parse_from(["extremity", "train", "--baseline", "maybe"]).is_err());
        assert!(Cli::try_parse_from(["extremity", "train", "--receiver", "fancy"]).is_err());
        assert!(Cli::try_parse_from(["extremity", "analyze"]).is_err());
        assert!(Cli::try_parse_from(["extremity", "frobnicate"]).is_err());
    }
}
