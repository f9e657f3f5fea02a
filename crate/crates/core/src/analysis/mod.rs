//! Accuracy summaries and protocol diagnostics over evaluation records.

mod svg;

pub use svg::{bar_svg, render_bar_svg};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Message, Polarity};
use crate::trainer::{accuracy, EvalRecord};

/// Both consistency scores must reach this for a protocol to count as functional.
pub const FUNCTIONAL_THRESHOLD: f64 = 0.9;

/// Largest dimension count for which all bijections are enumerated.
pub const MAX_EXHAUSTIVE_DIMS: usize = 8;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no values to summarize")]
    Empty,
    #[error("records mix dimension counts {0} and {1}")]
    MixedDims(usize, usize),
    #[error("record {game} has {field} = {value}, out of range for {n_dims} dimensions")]
    OutOfRange { game: usize, field: &'static str, value: usize, n_dims: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

pub fn accuracy_summary(values: &[f64]) -> Result<SummaryStats, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(SummaryStats { mean, std: var.sqrt(), n: values.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalSlot {
    Ms,
    Mp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruthAttr {
    Dimension,
    Polarity,
}

impl SignalSlot {
    fn of(self, m: &Message) -> usize {
        match self {
            SignalSlot::Ms => m.ms,
            SignalSlot::Mp => m.mp,
        }
    }
}

/// Counts of signal values (columns) per true value (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub slot: SignalSlot,
    pub truth: TruthAttr,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl CrossTab {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Short name used for file names and JSON keys, e.g. `ms_by_dimension`.
    pub fn key(&self) -> String {
        let slot = match self.slot {
            SignalSlot::Ms => "ms",
            SignalSlot::Mp => "mp",
        };
        let truth = match self.truth {
            TruthAttr::Dimension => "dimension",
            TruthAttr::Polarity => "polarity",
        };
        format!("{slot}_by_{truth}")
    }

    pub fn title(&self) -> String {
        let slot = match self.slot {
            SignalSlot::Ms => "M_S signal",
            SignalSlot::Mp => "M_P signal",
        };
        let truth = match self.truth {
            TruthAttr::Dimension => "true dimension",
            TruthAttr::Polarity => "true polarity",
        };
        format!("{slot} by {truth}")
    }
}

/// The shared dimension count of `records`.
pub fn records_n_dims(records: &[EvalRecord]) -> Result<usize, AnalysisError> {
    let first = records.first().ok_or(AnalysisError::Empty)?.n_dims;
    if let Some(r) = records.iter().find(|r| r.n_dims != first) {
        return Err(AnalysisError::MixedDims(first, r.n_dims));
    }
    for r in records {
        let checks = [
            ("ms", r.message.ms, first),
            ("mp", r.message.mp, 2),
            ("canonical_dim", r.canonical.dim, first),
        ];
        if let Some(&(field, value, _)) = checks.iter().find(|(_, v, limit)| v >= limit) {
            return Err(AnalysisError::OutOfRange { game: r.game, field, value, n_dims: first });
        }
    }
    Ok(first)
}

/// Cross-tabulates one message slot against the canonical truth of each record.
pub fn crosstab(records: &[EvalRecord], slot: SignalSlot, truth: TruthAttr) -> Result<CrossTab, AnalysisError> {
    let n = records_n_dims(records)?;
    let rows = match truth {
        TruthAttr::Dimension => n,
        TruthAttr::Polarity => 2,
    };
    let cols = match slot {
        SignalSlot::Ms => n,
        SignalSlot::Mp => 2,
    };
    let mut counts = vec![vec![0u64; cols]; rows];
    for r in records {
        let t = match truth {
            TruthAttr::Dimension => r.canonical.dim,
            TruthAttr::Polarity => r.canonical.pol.index(),
        };
        counts[t][slot.of(&r.message)] += 1;
    }
    let row_labels = match truth {
        TruthAttr::Dimension => (0..n).map(|d| format!("dim {d}")).collect(),
        TruthAttr::Polarity => Polarity::ALL.iter().map(|p| p.to_string()).collect(),
    };
    let prefix = match slot {
        SignalSlot::Ms => "m_s",
        SignalSlot::Mp => "m_p",
    };
    let col_labels = (0..cols).map(|c| format!("{prefix}={c}")).collect();
    Ok(CrossTab { slot, truth, row_labels, col_labels, counts })
}

/// The four panels: {M_S, M_P} against {dimension, polarity}.
pub fn all_crosstabs(records: &[EvalRecord]) -> Result<Vec<CrossTab>, AnalysisError> {
    let mut out = Vec::with_capacity(4);
    for truth in [TruthAttr::Dimension, TruthAttr::Polarity] {
        for slot in [SignalSlot::Ms, SignalSlot::Mp] {
            out.push(crosstab(records, slot, truth)?);
        }
    }
    Ok(out)
}

/// Fraction of same-dimension (min, max) record pairs whose messages differ
/// in both positions.
///
/// Ordered pairs `(r, r')` qualify when `r` is the minimum and `r'` the
/// maximum on some shared dimension, using every element of the signatures.
/// Records are grouped by (dimension set, message), so the count is exact
/// and costs O(groups²) rather than O(records²). Returns 0 when no pair
/// qualifies.
pub fn max_separation_fraction(records: &[EvalRecord]) -> f64 {
    let mut mins: HashMap<(Vec<usize>, Message), u64> = HashMap::new();
    let mut maxs: HashMap<(Vec<usize>, Message), u64> = HashMap::new();
    for r in records {
        let dims = |pol| r.signature.iter().filter(|e| e.pol == pol).map(|e| e.dim).collect::<Vec<_>>();
        let (lo, hi) = (dims(Polarity::Min), dims(Polarity::Max));
        if !lo.is_empty() {
            *mins.entry((lo, r.message)).or_default() += 1;
        }
        if !hi.is_empty() {
            *maxs.entry((hi, r.message)).or_default() += 1;
        }
    }
    let (mut pairs, mut separated) = (0u128, 0u128);
    for ((lo, m), a) in &mins {
        for ((hi, m2), b) in &maxs {
            if lo.iter().any(|d| hi.contains(d)) {
                let n = u128::from(*a) * u128::from(*b);
                pairs += n;
                if m.ms != m2.ms && m.mp != m2.mp {
                    separated += n;
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        separated as f64 / pairs as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    /// Every bijection was tried.
    Exhaustive,
    /// Greedy matching, used above [`MAX_EXHAUSTIVE_DIMS`] dimensions.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScores {
    pub dimension: f64,
    pub polarity: f64,
    pub assignment: Assignment,
}

impl ConsistencyScores {
    pub fn functional(&self) -> bool {
        self.dimension >= FUNCTIONAL_THRESHOLD && self.polarity >= FUNCTIONAL_THRESHOLD
    }
}

/// Largest `Σ_i table[i][perm(i)]` over permutations of a square table.
fn best_permutation_total(table: &[Vec<u64>]) -> u64 {
    fn go(table: &[Vec<u64>], row: usize, used: &mut [bool]) -> u64 {
        if row == table.len() {
            return 0;
        }
        let mut best = 0;
        for col in 0..used.len() {
            if !used[col] {
                used[col] = true;
                best = best.max(table[row][col] + go(table, row + 1, used));
                used[col] = false;
            }
        }
        best
    }
    go(table, 0, &mut vec![false; table.len()])
}

fn greedy_total(table: &[Vec<u64>]) -> u64 {
    let n = table.len();
    let mut cells: Vec<(u64, usize, usize)> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (table[i][j], i, j)).collect();
    cells.sort_by(|a, b| b.cmp(a));
    let (mut rows, mut cols) = (vec![false; n], vec![false; n]);
    let mut total = 0;
    for (v, i, j) in cells {
        if !rows[i] && !cols[j] {
            rows[i] = true;
            cols[j] = true;
            total += v;
        }
    }
    total
}

/// How consistently `M_S` tracks the dimension and `M_P` the polarity, each
/// maximized over relabelings of the signals.
pub fn consistency_scores(records: &[EvalRecord]) -> Result<ConsistencyScores, AnalysisError> {
    let n = records_n_dims(records)?;
    let total = records.len() as f64;
    let dim_table = crosstab(records, SignalSlot::Ms, TruthAttr::Dimension)?.counts;
    let pol_table = crosstab(records, SignalSlot::Mp, TruthAttr::Polarity)?.counts;
    let (dim_hits, assignment) = if n <= MAX_EXHAUSTIVE_DIMS {
        (best_permutation_total(&dim_table), Assignment::Exhaustive)
    } else {
        (greedy_total(&dim_table), Assignment::Greedy)
    };
    let pol_hits = best_permutation_total(&pol_table);
    Ok(ConsistencyScores { dimension: dim_hits as f64 / total, polarity: pol_hits as f64 / total, assignment })
}

/// Everything reported about one set of evaluation records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMetrics {
    pub records: usize,
    pub n_dims: usize,
    pub accuracy: f64,
    pub crosstabs: Vec<CrossTab>,
    pub max_separation_fraction: f64,
    pub consistency: ConsistencyScores,
    pub verdict: String,
}

pub fn protocol_metrics(records: &[EvalRecord]) -> Result<ProtocolMetrics, AnalysisError> {
    let n_dims = records_n_dims(records)?;
    let consistency = consistency_scores(records)?;
    Ok(ProtocolMetrics {
        records: records.len(),
        n_dims,
        accuracy: accuracy(records),
        crosstabs: all_crosstabs(records)?,
        max_separation_fraction: max_separation_fraction(records),
        consistency,
        verdict: if consistency.functional() { "functional" } else { "not functional" }.to_string(),
    })
}
