//! Stage 4: turn every remaining non-numeric column into numbers.

use std::collections::HashMap;

use super::groupby::numeric_view;
use super::{FeatError, FeatureFrame, Provenance};
use crate::data::{ColumnData, FeatureKind};

/// Pseudo-count pulling rare categories toward the prior.
pub const SMOOTHING: f64 = 10.0;
/// Folds used to encode training rows without their own labels.
pub const ENCODING_FOLDS: usize = 5;

/// `(pos + alpha * prior) / (n + alpha)`.
pub fn smoothed_ratio(pos: f64, n: f64, prior: f64, alpha: f64) -> f64 {
    (pos + alpha * prior) / (n + alpha)
}

/// Positive and total counts per code over `rows`.
fn tally(
    col: &ColumnData,
    labels: &[u8],
    rows: impl Iterator<Item = usize>,
) -> HashMap<u32, (f64, f64)> {
    let mut t: HashMap<u32, (f64, f64)> = HashMap::new();
    for r in rows {
        if let Some(c) = col.code(r) {
            let e = t.entry(c).or_default();
            e.0 += f64::from(labels[r]);
            e.1 += 1.0;
        }
    }
    t
}

/// Smoothed positive ratio per categorical value. Test rows read the table
/// built from all training rows; training rows read a table built from the
/// other folds so no row sees its own label. Unseen values get the prior.
pub fn label_ratio_encode(col: &ColumnData, labels: &[u8], n_train: usize) -> Vec<f64> {
    let prior = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / labels.len().max(1) as f64;
    let lookup = |t: &HashMap<u32, (f64, f64)>, c: u32| {
        t.get(&c)
            .map_or(prior, |&(pos, n)| smoothed_ratio(pos, n, prior, SMOOTHING))
    };
    let full = tally(col, labels, 0..n_train);
    let folds = ENCODING_FOLDS.min(n_train.max(1));
    let partial: Vec<HashMap<u32, (f64, f64)>> = (0..folds)
        .map(|f| {
            let held = tally(col, labels, (f..n_train).step_by(folds));
            let mut t = full.clone();
            for (c, (pos, n)) in held {
                let e = t.get_mut(&c).unwrap();
                e.0 -= pos;
                e.1 -= n;
                if e.1 == 0.0 {
                    t.remove(&c);
                }
            }
            t
        })
        .collect();
    (0..col.len())
        .map(|r| match col.code(r) {
            None => f64::NAN,
            Some(c) if r < n_train => lookup(&partial[r % folds], c),
            Some(c) => lookup(&full, c),
        })
        .collect()
}

/// Multi-categorical cells become their mean code, categoricals their
/// smoothed label ratio, timestamps their epoch seconds. The result is
/// entirely numeric.
pub fn encode_categorical_final(
    frame: FeatureFrame,
    labels: Option<&[u8]>,
) -> Result<FeatureFrame, FeatError> {
    let needs_labels = frame.n_train > 0
        && frame
            .columns
            .iter()
            .any(|c| c.kind() == FeatureKind::Categorical);
    let labels = match labels {
        Some(l) if l.len() != frame.n_train => {
            return Err(FeatError::LabelLength {
                expected: frame.n_train,
                found: l.len(),
            });
        }
        Some(l) => l,
        None if needs_labels => return Err(FeatError::MissingLabels),
        None => &[],
    };
    let FeatureFrame {
        columns,
        provenance,
        n_rows,
        n_train,
        source,
    } = frame;
    let mut out = FeatureFrame {
        columns: Vec::new(),
        provenance: Vec::new(),
        n_rows,
        n_train,
        source,
    };
    for (col, prov) in columns.into_iter().zip(provenance) {
        match col.kind() {
            FeatureKind::Numerical => out.push(col, prov),
            FeatureKind::Categorical => {
                let values = label_ratio_encode(&col, labels, n_train);
                out.push(ColumnData::from_f64(col.name, values), Provenance::Encoded);
            }
            FeatureKind::MultiCategorical | FeatureKind::Temporal => {
                let values = numeric_view(&col);
                out.push(ColumnData::from_f64(col.name, values), Provenance::Encoded);
            }
        }
    }
    Ok(out)
}
