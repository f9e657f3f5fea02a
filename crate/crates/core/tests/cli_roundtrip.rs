use std::path::Path;
use std::process::Command;

use extremity::agents::ReceiverKind;
use extremity::cli::{
    cmd_eval, cmd_reproduce, cmd_train, config_to_text, read_eval_records, read_training_log, Checkpoint,
    ConfigOverrides, EvalOptions, RunManifest, RunOptions, MANIFEST_FILE,
};

fn quick(out: &Path, seed: u64) -> RunOptions {
    RunOptions {
        overrides: ConfigOverrides {
            n_dims: Some(2),
            receiver: Some(ReceiverKind::Attentional),
            num_minibatches: Some(60),
            eval_games: Some(500),
            seed: Some(seed),
            ..Default::default()
        },
        ..RunOptions::new(out)
    }
}

const TRIAL_FILES: [&str; 3] = ["trial_000/training_log.csv", "trial_000/eval_records.csv", "trial_000/checkpoint.bin"];

#[test]
fn identical_seeds_give_identical_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let a = cmd_train(&quick(&dir.path().join("a"), 5)).unwrap().manifest;
    let b = cmd_train(&quick(&dir.path().join("b"), 5)).unwrap().manifest;
    let c = cmd_train(&quick(&dir.path().join("c"), 6)).unwrap().manifest;
    for f in TRIAL_FILES {
        assert!(a.checksum(f).is_some(), "{f} missing from manifest");
        assert_eq!(a.checksum(f), b.checksum(f), "{f}");
        assert_ne!(a.checksum(f), c.checksum(f), "{f}");
    }
}

#[test]
fn runs_are_reconstructible_from_their_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let original = cmd_train(&quick(&first, 8)).unwrap();
    let manifest = RunManifest::load(&first.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.configs[0].batch_size, 64);
    assert!(manifest.verify(&first).unwrap().is_empty());
    assert_eq!(manifest.trial_seeds[0].seed, original.trials[0].seed);

    // Replay from nothing but the recorded configuration.
    let cfg_path = dir.path().join("replay.txt");
    std::fs::write(&cfg_path, config_to_text(&manifest.configs[0])).unwrap();
    let replay = dir.path().join("replay");
    let opts = RunOptions { config: Some(cfg_path), ..RunOptions::new(&replay) };
    let again = cmd_train(&opts).unwrap().manifest;
    for f in TRIAL_FILES {
        assert_eq!(again.checksum(f), manifest.checksum(f), "{f}");
    }
    assert_eq!(again.configs, manifest.configs);
}

#[test]
fn outputs_parse_back_and_checkpoint_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = cmd_train(&quick(&out, 3)).unwrap();
    let trial = &res.trials[0];
    assert_eq!(read_training_log(&out.join("trial_000/training_log.csv")).unwrap(), trial.log);
    assert_eq!(read_eval_records(&out.join("trial_000/eval_records.csv")).unwrap(), trial.records);
    let path = out.join("trial_000/checkpoint.bin");
    let bytes = std::fs::read(&path).unwrap();
    let ckpt = Checkpoint::load(&path).unwrap();
    assert_eq!(ckpt.to_bytes(), bytes);
    let mut agents = ckpt.to_agents().unwrap();
    assert_eq!(Checkpoint::from_agents(&mut agents).to_bytes(), bytes);

    // Evaluating the checkpoint with the trial's seed regenerates its records.
    let eval_out = dir.path().join("eval");
    let eval = cmd_eval(&EvalOptions {
        checkpoint: path,
        overrides: ConfigOverrides { seed: Some(trial.seed), eval_games: Some(500), ..Default::default() },
        config: None,
        out: eval_out.clone(),
    })
    .unwrap();
    assert_eq!(eval.records, trial.records);
    assert_eq!(std::fs::read(eval_out.join("eval_records.csv")).unwrap(), std::fs::read(out.join("trial_000/eval_records.csv")).unwrap());
}

#[test]
fn default_one_dim_training_logs_five_thousand_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("defaults");
    let opts = RunOptions { overrides: ConfigOverrides { eval_games: Some(200), ..Default::default() }, ..RunOptions::new(&out) };
    let res = cmd_train(&opts).unwrap();
    assert_eq!(res.config.n_dims, 1);
    assert_eq!(res.config.num_minibatches, 5000);
    assert_eq!(read_training_log(&out.join("trial_000/training_log.csv")).unwrap().len(), 5000);
    let header = std::fs::read_to_string(out.join("trial_000/training_log.csv")).unwrap();
    assert!(header.starts_with("step,batch_accuracy,rolling_accuracy,mean_reward\n"));
}

#[test]
fn reproduce_grid_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let small = |out: &Path, dims: Option<usize>, trials: usize| RunOptions {
        overrides: ConfigOverrides {
            n_dims: dims,
            receiver: Some(ReceiverKind::Basic),
            num_trials: Some(trials),
            num_minibatches: Some(15),
            eval_games: Some(100),
            ..Default::default()
        },
        parallel: 2,
        ..RunOptions::new(out)
    };
    let full = cmd_reproduce(&small(&dir.path().join("full"), None, 1)).unwrap();
    assert_eq!(full.tables.len(), 1);
    assert_eq!(full.tables[0].rows.iter().map(|r| r.n_dims).collect::<Vec<_>>(), vec![1, 2, 3]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("full/summary.json")).unwrap()).unwrap();
    assert_eq!(json["tables"][0]["rows"].as_array().unwrap().len(), 3);
    assert!(json["tables"][0]["rows"][0]["mean"].is_number());

    let scaled = cmd_reproduce(&small(&dir.path().join("scaled"), Some(1), 3)).unwrap();
    let row = &scaled.tables[0].rows[0];
    assert_eq!((scaled.tables[0].rows.len(), row.n_dims, row.trials), (1, 1, 3));
    assert!(dir.path().join("scaled/basic/n1/trial_002/checkpoint.bin").exists());
    assert_eq!(scaled.manifest.trial_seeds.len(), 3);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extremity"))
}

#[test]
fn binary_exit_codes_and_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin().args(["gradcheck", "--configurations", "1"]).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("max rel"));
    let broken = bin().args(["gradcheck", "--configurations", "1", "--inject-fault"]).output().unwrap();
    assert!(!broken.status.success());

    let out = dir.path().join("from_env");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# tiny run\nnum_minibatches = 20\neval_games = 100\nseed = 4\n").unwrap();
    let status = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--dims", "2", "--receiver", "attentional", "--baseline", "on", "--eval-mode", "argmax"])
        .env("EXTREMITY_OUT", &out)
        .output()
        .unwrap();
    assert!(status.status.success());
    let manifest = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    let cfg = &manifest.configs[0];
    assert_eq!((cfg.n_dims, cfg.num_minibatches, cfg.seed, cfg.baseline), (2, 20, 4, true));

    std::fs::write(dir.path().join("bad.cfg"), "learning_rat = 0.1\n").unwrap();
    let bad = bin().args(["train", "--config"]).arg(dir.path().join("bad.cfg")).env("EXTREMITY_OUT", &out).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown key"));
}
