//! CSV persistence for training logs and evaluation records.

use std::path::Path;

use crate::env::{Context, Extremum, Message, Polarity, Signature};
use crate::trainer::{EvalRecord, StepLog};

use super::CliError;

pub const TRAINING_LOG_HEADER: [&str; 4] = ["step", "batch_accuracy", "rolling_accuracy", "mean_reward"];

pub const EVAL_RECORDS_HEADER: [&str; 12] = [
    "game",
    "n_dims",
    "target_index",
    "signature",
    "canonical_dim",
    "canonical_pol",
    "ms",
    "mp",
    "attention_dim",
    "choice",
    "correct",
    "context_degrees",
];

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<(), CliError> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(CliError::Schema {
            path: path.display().to_string(),
            message: format!("header {:?}, expected {:?}", found.iter().collect::<Vec<_>>(), expected),
        });
    }
    Ok(())
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| CliError::csv(path, e))
}

pub fn write_training_log(path: &Path, log: &[StepLog]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(TRAINING_LOG_HEADER).map_err(|e| CliError::csv(path, e))?;
    for s in log {
        w.write_record([
            s.step.to_string(),
            s.batch_accuracy.to_string(),
            s.rolling_accuracy.to_string(),
            s.mean_reward.to_string(),
        ])
        .map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    record: csv::StringRecord,
}

impl Row<'_> {
    fn field<T: std::str::FromStr>(&self, index: usize, name: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.record.get(index).unwrap_or("");
        raw.parse().map_err(|e: T::Err| self.error(format!("{name} `{raw}`: {e}")))
    }

    fn error(&self, message: String) -> CliError {
        CliError::Schema { path: self.path.display().to_string(), message: format!("row {}: {message}", self.line) }
    }
}

fn rows<'a>(path: &'a Path, expected: &[&str]) -> Result<Vec<Row<'a>>, CliError> {
    let mut r = reader(path)?;
    let header = r.headers().map_err(|e| CliError::csv(path, e))?.clone();
    check_header(path, &header, expected)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = Row { path, line: i + 2, record: rec.map_err(|e| CliError::csv(path, e))? };
        if row.record.len() != expected.len() {
            return Err(row.error(format!("{} fields, expected {}", row.record.len(), expected.len())));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn read_training_log(path: &Path) -> Result<Vec<StepLog>, CliError> {
    rows(path, &TRAINING_LOG_HEADER)?
        .iter()
        .map(|r| {
            Ok(StepLog {
                step: r.field(0, "step")?,
                batch_accuracy: r.field(1, "batch_accuracy")?,
                rolling_accuracy: r.field(2, "rolling_accuracy")?,
                mean_reward: r.field(3, "mean_reward")?,
            })
        })
        .collect()
}

pub fn write_eval_records(path: &Path, records: &[EvalRecord]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(EVAL_RECORDS_HEADER).map_err(|e| CliError::csv(path, e))?;
    for r in records {
        w.write_record([
            r.game.to_string(),
            r.n_dims.to_string(),
            r.target_index.to_string(),
            join(&r.signature),
            r.canonical.dim.to_string(),
            r.canonical.pol.to_string(),
            r.message.ms.to_string(),
            r.message.mp.to_string(),
            r.attention_dim.map(|d| d.to_string()).unwrap_or_default(),
            r.choice.to_string(),
            r.correct.to_string(),
            join(r.context.flatten()),
        ])
        .map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn parse_record(row: &Row<'_>) -> Result<EvalRecord, CliError> {
    let n_dims: usize = row.field(1, "n_dims")?;
    if n_dims == 0 {
        return Err(row.error("n_dims must be positive".into()));
    }
    let signature = row.record[3]
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Extremum>().map_err(|e| row.error(format!("signature `{s}`: {e}"))))
        .collect::<Result<Signature, _>>()?;
    let degrees = row.record[11]
        .split(';')
        .map(|s| s.parse::<f64>().map_err(|e| row.error(format!("context degree `{s}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if degrees.len() != 2 * n_dims * n_dims {
        return Err(row.error(format!("{} context degrees for {n_dims} dimensions", degrees.len())));
    }
    let objects: Vec<Vec<f64>> = degrees.chunks(n_dims).map(<[f64]>::to_vec).collect();
    let context = Context::from_values(&objects).map_err(|e| row.error(e.to_string()))?;
    let attention_dim = match &row.record[8] {
        "" => None,
        _ => Some(row.field(8, "attention_dim")?),
    };
    Ok(EvalRecord {
        game: row.field(0, "game")?,
        n_dims,
        target_index: row.field(2, "target_index")?,
        signature,
        canonical: Extremum::new(row.field(4, "canonical_dim")?, row.field::<Polarity>(5, "canonical_pol")?),
        message: Message { ms: row.field(6, "ms")?, mp: row.field(7, "mp")? },
        attention_dim,
        choice: row.field(9, "choice")?,
        correct: row.field(10, "correct")?,
        context,
    })
}

pub fn read_eval_records(path: &Path) -> Result<Vec<EvalRecord>, CliError> {
    rows(path, &EVAL_RECORDS_HEADER)?.iter().map(parse_record).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::extremal_signature;

    fn sample_record() -> EvalRecord {
        let context = Context::from_values(&[vec![-0.9, 0.2], vec![0.9, 0.1], vec![0.0, -0.3], vec![0.1, 0.8]]).unwrap();
        let signature = extremal_signature(&context, 2).unwrap();
        EvalRecord {
            game: 7,
            n_dims: 2,
            target_index: 2,
            canonical: *signature.iter().next().unwrap(),
            signature,
            message: Message { ms: 1, mp: 0 },
            attention_dim: Some(1),
            choice: 2,
            correct: true,
            context,
        }
    }

    #[test]
    fn eval_records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let mut other = sample_record();
        other.attention_dim = None;
        other.correct = false;
        other.choice = 0;
        write_eval_records(&path, &[sample_record(), other.clone()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("game,n_dims,target_index,signature,canonical_dim,canonical_pol,ms,mp,attention_dim,choice,correct,context_degrees\n"));
        assert!(text.contains("1-MIN"), "{text}");
        assert!(text.contains("-0.9;0.2;0.9;0.1;0;-0.3;0.1;0.8"), "{text}");
        assert_eq!(read_eval_records(&path).unwrap(), vec![sample_record(), other]);
    }

    #[test]
    fn training_log_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log: Vec<StepLog> = (0..5)
            .map(|i| StepLog {
                step: i,
                batch_accuracy: i as f64 / 3.0,
                rolling_accuracy: 0.1 + i as f64 * 1e-17,
                mean_reward: -1.0 / 7.0,
            })
            .collect();
        write_training_log(&path, &log).unwrap();
        assert_eq!(read_training_log(&path).unwrap(), log);
    }

    #[test]
    fn schema_mismatches_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "step,batch_accuracy,rolling_accuracy\n0,1,1\n").unwrap();
        assert!(matches!(read_training_log(&path), Err(CliError::Schema { .. })));
        assert!(matches!(read_eval_records(&path), Err(CliError::Schema { .. })));
        std::fs::write(&path, "step,batch_accuracy,rolling_accuracy,mean_reward\n0,1,1\n").unwrap();
        assert!(matches!(read_training_log(&path), Err(CliError::Schema { .. })));
        std::fs::write(&path, "step,batch_accuracy,rolling_accuracy,mean_reward\n0,x,1,1\n").unwrap();
        let e = read_training_log(&path).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
    }

    #[test]
    fn off_grid_context_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_eval_records(&path, &[sample_record()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("0.8\n", "0.85\n");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(read_eval_records(&path), Err(CliError::Schema { .. })));
    }
}
