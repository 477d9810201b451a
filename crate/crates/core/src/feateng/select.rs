//! Gain-based selection on a stratified down-sample.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::groupby::numeric_view;
use super::{FeatError, FeatureFrame};
use crate::controller::Deadline;
use crate::data::ColumnData;
use crate::gbdt::{fit, GbdtParams, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub max_rows: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    /// Candidates whose total gain does not exceed this are dropped.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            max_rows: 50_000,
            rounds: 50,
            learning_rate: 0.1,
            epsilon: 1e-12,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub feature: String,
    pub stage: u8,
    pub gain: f64,
    pub kept: bool,
    pub sample_rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
}

impl SelectionReport {
    pub fn kept(&self) -> impl Iterator<Item = &SelectionRow> {
        self.rows.iter().filter(|r| r.kept)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("feature\tstage\tgain\tkept\tsample_rows\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                r.feature, r.stage, r.gain, r.kept, r.sample_rows
            );
        }
        s
    }
}

/// Sorted row indices: every class sampled in proportion, `cap` rows total.
pub fn stratified_sample(labels: &[u8], cap: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cap);
    for class in [0u8, 1] {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        let k = ((members.len() as f64 * cap as f64 / n as f64).round() as usize)
            .clamp(1.min(members.len()), members.len());
        rows.extend(
            sample(&mut rng, members.len(), k)
                .into_iter()
                .map(|i| members[i]),
        );
    }
    rows.sort_unstable();
    rows
}

/// Fits one model on kept features plus `candidates` and keeps the
/// candidates that earned gain, at most `budget` of them (highest gain
/// first). Existing frame columns are never dropped here.
pub fn select_features(
    frame: &FeatureFrame,
    candidates: Vec<ColumnData>,
    labels: &[u8],
    stage: u8,
    budget: usize,
    cfg: &SelectionConfig,
    deadline: &Deadline,
) -> Result<(Vec<ColumnData>, SelectionReport), FeatError> {
    if candidates.is_empty() {
        return Ok((candidates, SelectionReport::default()));
    }
    if labels.len() != frame.n_train {
        return Err(FeatError::LabelLength {
            expected: frame.n_train,
            found: labels.len(),
        });
    }
    let rows = stratified_sample(labels, cfg.max_rows, cfg.seed ^ u64::from(stage));
    let gather = |c: &ColumnData| {
        let v = numeric_view(c);
        rows.iter().map(|&r| v[r]).collect::<Vec<f64>>()
    };
    let mut names: Vec<String> = frame.columns.iter().map(|c| c.name.clone()).collect();
    names.extend(candidates.iter().map(|c| c.name.clone()));
    let columns: Vec<Vec<f64>> = frame
        .columns
        .iter()
        .chain(&candidates)
        .map(gather)
        .collect();
    let x = Matrix::new(names, columns)?;
    let y: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
    let w = vec![1.0; y.len()];
    let params = GbdtParams {
        seed: cfg.seed,
        ..GbdtParams::with_rounds(cfg.rounds, cfg.learning_rate)
    };
    let model = fit(&x, &y, &w, &params, deadline)?;
    let offset = frame.columns.len();
    let gains = &model.feature_gains[offset..];

    let mut order: Vec<usize> = (0..candidates.len())
        .filter(|&i| gains[i] > cfg.epsilon)
        .collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    order.truncate(budget);
    let mut keep = vec![false; candidates.len()];
    for &i in &order {
        keep[i] = true;
    }
    let report = SelectionReport {
        rows: candidates
            .iter()
            .enumerate()
            .map(|(i, c)| SelectionRow {
                feature: c.name.clone(),
                stage,
                gain: gains[i],
                kept: keep[i],
                sample_rows: rows.len(),
            })
            .collect(),
    };
    let kept = candidates
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(c, _)| c)
        .collect();
    Ok((kept, report))
}
