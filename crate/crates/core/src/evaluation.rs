//! Ranking metric and competition-style scoring.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("AUC needs at least one positive and one negative label")]
    SingleClass,
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("auc_max equals auc_base ({0})")]
    DegenerateDenominator(f64),
    #[error("cannot average an empty score list")]
    EmptyList,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EvaluationRecord {
    pub auc: f64,
    pub auc_base: Option<f64>,
    pub auc_max: Option<f64>,
    pub score: Option<f64>,
}

/// Area under the ROC curve: the probability that a random positive outranks
/// a random negative, ties counting one half. O(n log n) via tie-grouped ranks.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64, EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Walk tie groups in ascending score; each positive beats every negative
    // strictly below it and ties half of the negatives in its own group.
    let mut wins = 0.0f64;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0usize, 0usize);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        wins += pos as f64 * (neg_below as f64 + 0.5 * neg as f64);
        neg_below += neg;
        i = j;
    }
    Ok(wins / (n_pos as f64 * n_neg as f64))
}

/// `(auc - auc_base) / (auc_max - auc_base)`; negative when below the baseline.
pub fn competition_score(auc: f64, auc_base: f64, auc_max: f64) -> Result<f64, EvalError> {
    let denom = auc_max - auc_base;
    if denom == 0.0 {
        return Err(EvalError::DegenerateDenominator(auc_base));
    }
    Ok((auc - auc_base) / denom)
}

/// Mean of per-dataset scores.
pub fn average_score(scores: &[f64]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyList);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// AUC plus the rescaled score when both reference AUCs are given.
pub fn evaluate(
    labels: &[u8],
    scores: &[f64],
    auc_base: Option<f64>,
    auc_max: Option<f64>,
) -> Result<EvaluationRecord, EvalError> {
    let a = auc(labels, scores)?;
    let score = match (auc_base, auc_max) {
        (Some(b), Some(m)) => Some(competition_score(a, b, m)?),
        _ => None,
    };
    Ok(EvaluationRecord {
        auc: a,
        auc_base,
        auc_max,
        score,
    })
}
