//! Feature engineering: three generator stages, each followed by a
//! selection fit, and a final encoding stage that leaves only numbers.

mod encode;
mod generate;
mod groupby;
mod select;

use std::time::Instant;

use log::{debug, info};
use thiserror::Error;

pub use encode::{
    encode_categorical_final, label_ratio_encode, smoothed_ratio, ENCODING_FOLDS, SMOOTHING,
};
pub use generate::{
    bucket_ids, choose_bucket_unit, frame_keys, gen_first_order, gen_second_order, gen_temporal,
    position_lookup, BucketUnit,
};
pub use groupby::numeric_view;
pub use select::{
    select_features, stratified_sample, SelectionConfig, SelectionReport, SelectionRow,
};

use crate::controller::{feature_budget, BudgetTracker};
use crate::data::{BaseFeatureMap, ColumnData, FeatureKind, Table};
use crate::gbdt::{GbdtError, Matrix};

#[derive(Debug, Error)]
pub enum FeatError {
    #[error("training rows need labels for label-ratio encoding")]
    MissingLabels,
    #[error("expected {expected} training labels, found {found}")]
    LabelLength { expected: usize, found: usize },
    #[error("selection fit: {0}")]
    Gbdt(#[from] GbdtError),
}

/// Which step produced a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Original,
    Order1,
    Order2,
    Temporal,
    Encoded,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Order1 => "order1",
            Provenance::Order2 => "order2",
            Provenance::Temporal => "temporal",
            Provenance::Encoded => "encoded",
        }
    }
}

/// The flat main table being widened. Rows `0..n_train` are training
/// rows; the rest are scored later.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    /// Name of the main table the rows come from.
    pub source: String,
    pub columns: Vec<ColumnData>,
    pub provenance: Vec<Provenance>,
    pub n_rows: usize,
    pub n_train: usize,
}

impl FeatureFrame {
    pub fn from_table(table: Table, n_train: usize) -> Self {
        let provenance = vec![Provenance::Original; table.columns.len()];
        FeatureFrame {
            source: table.name,
            columns: table.columns,
            provenance,
            n_rows: table.n_rows,
            n_train: n_train.min(table.n_rows),
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ColumnData, Provenance)> {
        self.columns.iter().zip(self.provenance.iter().copied())
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn push(&mut self, column: ColumnData, provenance: Provenance) {
        debug_assert_eq!(column.len(), self.n_rows);
        debug_assert!(
            self.column(&column.name).is_none(),
            "duplicate column {}",
            column.name
        );
        self.columns.push(column);
        self.provenance.push(provenance);
    }

    pub fn is_numeric(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.kind() == FeatureKind::Numerical)
    }

    pub fn memory_bytes(&self) -> u64 {
        let per_row: f64 = self.columns.iter().map(ColumnData::bytes_per_row).sum();
        (per_row * self.n_rows as f64).ceil() as u64
    }

    /// Numeric matrix over `rows` (see [`numeric_view`]).
    pub fn to_matrix(&self, rows: std::ops::Range<usize>) -> Result<Matrix, GbdtError> {
        let columns = self
            .columns
            .iter()
            .map(|c| numeric_view(c)[rows.clone()].to_vec())
            .collect();
        Matrix::new(self.names(), columns)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub selection: SelectionConfig,
    /// Share of the remaining time feature engineering leaves untouched.
    pub reserve: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            selection: SelectionConfig::default(),
            reserve: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureOutput {
    pub frame: FeatureFrame,
    pub report: SelectionReport,
    pub selection_fits: usize,
    pub skipped: Vec<u8>,
}

/// Seconds per (row, feature, round) of a selection fit, refined after each fit.
const INITIAL_FIT_COST: f64 = 3e-8;
/// Seconds per (row, candidate) of generation.
const GENERATION_COST: f64 = 1e-7;

/// Runs stages 1→3, each gated on affordability and followed by one
/// selection fit, then the unconditional encoding stage.
pub fn run_feature_pipeline(
    mut frame: FeatureFrame,
    base: Option<&BaseFeatureMap>,
    labels: &[u8],
    tracker: &BudgetTracker,
    cfg: &FeatureConfig,
) -> Result<FeatureOutput, FeatError> {
    if labels.len() != frame.n_train {
        return Err(FeatError::LabelLength {
            expected: frame.n_train,
            found: labels.len(),
        });
    }
    let keys = base.map(|b| frame_keys(&frame, b)).unwrap_or_default();
    let sample_rows = frame.n_train.min(cfg.selection.max_rows);
    let mut fit_cost = INITIAL_FIT_COST;
    let mut report_rows = Vec::new();
    let mut selection_fits = 0;
    let mut skipped = Vec::new();
    let mut baseline: Vec<String> = Vec::new();

    for stage in 1u8..=3 {
        let expected = expected_candidates(&frame, base, &keys, &baseline, stage);
        let n_features = frame.columns.len() + expected;
        let cost = frame.n_rows as f64 * expected as f64 * GENERATION_COST
            + (sample_rows * n_features * cfg.selection.rounds) as f64 * fit_cost;
        if expected == 0 || frame.n_train == 0 {
            continue;
        }
        if !tracker.can_afford(cost, cfg.reserve) {
            info!("feature stage {stage} skipped: estimated {cost:.2}s");
            skipped.push(stage);
            continue;
        }
        let budget = feature_budget(frame.n_rows, tracker.headroom_bytes());
        let candidates = match (stage, base) {
            (1, Some(b)) => gen_first_order(&frame, b),
            (2, _) => gen_second_order(&frame, &keys, &baseline),
            (3, _) => {
                let cats = temporal_categoricals(&frame, base, &keys);
                gen_temporal(&frame, main_time_column(&frame), &keys, &cats, budget)
            }
            _ => Vec::new(),
        };
        if candidates.is_empty() {
            continue;
        }
        let started = Instant::now();
        let n_cols = frame.columns.len() + candidates.len();
        let deadline = tracker.deadline(cfg.reserve);
        let (kept, report) = select_features(
            &frame,
            candidates,
            labels,
            stage,
            budget,
            &cfg.selection,
            &deadline,
        )?;
        selection_fits += 1;
        let took = started.elapsed().as_secs_f64();
        fit_cost = took / (sample_rows * n_cols * cfg.selection.rounds).max(1) as f64;
        debug!(
            "stage {stage}: kept {}/{} in {took:.2}s",
            kept.len(),
            report.rows.len()
        );
        let provenance = match stage {
            1 => Provenance::Order1,
            2 => Provenance::Order2,
            _ => Provenance::Temporal,
        };
        if stage == 1 {
            baseline = kept.iter().map(|c| c.name.clone()).collect();
        }
        for c in kept {
            frame.push(c, provenance);
        }
        tracker.note_memory(frame.memory_bytes());
        report_rows.extend(report.rows);
    }

    let frame = encode_categorical_final(frame, Some(labels))?;
    tracker.note_memory(frame.memory_bytes());
    Ok(FeatureOutput {
        frame,
        report: SelectionReport { rows: report_rows },
        selection_fits,
        skipped,
    })
}

fn expected_candidates(
    frame: &FeatureFrame,
    base: Option<&BaseFeatureMap>,
    keys: &[String],
    baseline: &[String],
    stage: u8,
) -> usize {
    let count = |kind: FeatureKind| {
        frame
            .iter()
            .filter(|(c, p)| *p == Provenance::Original && c.kind() == kind)
            .count()
    };
    match stage {
        1 => base.map_or(0, |b| keys.len() * (keys.len() + b.sessions.len())),
        2 => {
            let cats = count(FeatureKind::Categorical).saturating_sub(keys.len());
            3 * (count(FeatureKind::Numerical) + baseline.len()) * keys.len()
                + 2 * cats
                + cats * count(FeatureKind::MultiCategorical)
        }
        _ if main_time_column(frame).is_some() => {
            keys.len() * (1 + count(FeatureKind::Categorical))
        }
        _ => 0,
    }
}

/// First temporal column of the main table itself, else any temporal column.
fn main_time_column(frame: &FeatureFrame) -> Option<&str> {
    let temporal = || {
        frame
            .iter()
            .filter(|(c, _)| c.kind() == FeatureKind::Temporal)
            .map(|(c, _)| c.name.as_str())
    };
    temporal()
        .find(|n| !n.contains('.'))
        .or_else(|| temporal().next())
}

/// Sessions first, then the main table's categoricals, then merged ones.
fn temporal_categoricals(
    frame: &FeatureFrame,
    base: Option<&BaseFeatureMap>,
    keys: &[String],
) -> Vec<String> {
    let mut out: Vec<String> = base.map(|b| b.sessions.clone()).unwrap_or_default();
    let others: Vec<&str> = frame
        .iter()
        .filter(|(c, p)| *p == Provenance::Original && c.kind() == FeatureKind::Categorical)
        .map(|(c, _)| c.name.as_str())
        .filter(|n| !keys.iter().any(|k| k == n) && !out.iter().any(|s| s == n))
        .collect();
    out.extend(
        others
            .iter()
            .filter(|n| !n.contains('.'))
            .map(|n| n.to_string()),
    );
    out.extend(
        others
            .iter()
            .filter(|n| n.contains('.'))
            .map(|n| n.to_string()),
    );
    out
}
