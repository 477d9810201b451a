use std::borrow::Cow;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::BinnedData;
use super::split::{logistic_grad_hess, logloss, sigmoid, SplitConfig};
use super::tree::{grow, Tree};
use super::{GbdtError, GbdtParams, Matrix};
use crate::controller::Deadline;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Probabilities are kept away from 0 and 1 when turned into log-odds.
const PRIOR_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    /// Log-odds of the weighted positive rate.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Learning rate each tree was trained (and is applied) with.
    pub learning_rates: Vec<f64>,
    /// Total split gain per feature, in `feature_names` order.
    pub feature_gains: Vec<f64>,
    pub bin_edges: Vec<Vec<f64>>,
    /// Labels had a single class; the model is the constant prior.
    pub degenerate: bool,
}

impl GbdtModel {
    pub fn n_rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn raw_score(&self, value: impl Fn(usize) -> f64 + Copy) -> f64 {
        let mut s = self.base_score;
        for (tree, lr) in self.trees.iter().zip(&self.learning_rates) {
            s += lr * tree.predict_with(value);
        }
        s
    }

    pub fn split_gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.trees
            .iter()
            .flat_map(|t| t.splits().map(|(_, _, g)| g))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GbdtError> {
        let model: GbdtModel =
            serde_json::from_str(text).map_err(|e| GbdtError::Format(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(GbdtError::Format(format!(
                "unsupported format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Held-out rows monitored during training; stops after `patience` rounds
/// without a lower validation logloss and keeps the best prefix of trees.
pub struct EarlyStopping<'a> {
    pub x: &'a Matrix,
    pub y: &'a [u8],
    pub patience: usize,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: GbdtModel,
    /// Rounds in the best prefix when early stopping was used.
    pub best_rounds: Option<usize>,
}

/// Bin `x` and fit. See [`fit_binned`].
pub fn fit(
    x: &Matrix,
    y: &[u8],
    w: &[f64],
    params: &GbdtParams,
    deadline: &Deadline,
) -> Result<GbdtModel, GbdtError> {
    params.validate()?;
    let data = BinnedData::from_matrix(x, params.n_bins);
    fit_binned(&data, y, w, params, deadline, None).map(|o| o.model)
}

/// Train up to `params.n_rounds` trees, stopping early when the deadline
/// passes (completed rounds are kept) or when early stopping triggers.
pub fn fit_binned(
    data: &BinnedData,
    y: &[u8],
    w: &[f64],
    params: &GbdtParams,
    deadline: &Deadline,
    early: Option<EarlyStopping<'_>>,
) -> Result<FitOutcome, GbdtError> {
    params.validate()?;
    let n = data.n_rows;
    for (what, len) in [("labels", y.len()), ("weights", w.len())] {
        if len != n {
            return Err(GbdtError::LengthMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    if let Some(es) = &early {
        if es.x.names != data.names {
            return Err(GbdtError::ColumnMismatch {
                expected: data.names.clone(),
                found: es.x.names.clone(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let rows: Option<Vec<u32>> = if params.row_fraction < 1.0 && n > 1 {
        let k = ((n as f64 * params.row_fraction).round() as usize).clamp(1, n);
        let mut idx: Vec<u32> = sample(&mut rng, n, k)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        idx.sort_unstable();
        Some(idx)
    } else {
        None
    };
    let train: Cow<'_, BinnedData> = match &rows {
        Some(r) => Cow::Owned(data.take_rows(r)),
        None => Cow::Borrowed(data),
    };
    let (labels, weights): (Vec<f64>, Vec<f64>) = match &rows {
        Some(r) => r
            .iter()
            .map(|&i| (y[i as usize] as f64, w[i as usize]))
            .unzip(),
        None => (y.iter().map(|&v| v as f64).collect(), w.to_vec()),
    };
    let m = labels.len();

    // Mean-one weights: the split search and min_child_weight then see the
    // same problem whatever the global weight scale.
    let w_sum: f64 = weights.iter().sum();
    let scale = if w_sum > 0.0 { m as f64 / w_sum } else { 1.0 };
    let weights: Vec<f64> = weights.iter().map(|v| v * scale).collect();

    let usable: Vec<usize> = (0..train.n_features())
        .filter(|&f| train.mappers[f].n_bins() > 0)
        .collect();
    let features: Vec<usize> = if params.feature_fraction < 1.0 && usable.len() > 1 {
        let k = ((usable.len() as f64 * params.feature_fraction).round() as usize)
            .clamp(1, usable.len());
        let mut pick: Vec<usize> = sample(&mut rng, usable.len(), k)
            .into_iter()
            .map(|i| usable[i])
            .collect();
        pick.sort_unstable();
        pick
    } else {
        usable
    };

    let w_pos: f64 = labels.iter().zip(&weights).map(|(l, w)| l * w).sum();
    let w_all: f64 = weights.iter().sum();
    let prior = if w_all > 0.0 { w_pos / w_all } else { 0.5 };
    let degenerate = w_pos <= 0.0 || w_pos >= w_all;
    let p = prior.clamp(PRIOR_CLAMP, 1.0 - PRIOR_CLAMP);
    let base_score = (p / (1.0 - p)).ln();

    let mut model = GbdtModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: data.names.clone(),
        base_score,
        trees: Vec::new(),
        learning_rates: Vec::new(),
        feature_gains: vec![0.0; data.n_features()],
        bin_edges: data.mappers.iter().map(|m| m.edges.clone()).collect(),
        degenerate,
    };
    if degenerate {
        return Ok(FitOutcome {
            model,
            best_rounds: early.as_ref().map(|_| 0),
        });
    }

    let cfg = SplitConfig {
        lambda: params.lambda,
        min_child_weight: params.min_child_weight,
    };
    let mut raw = vec![base_score; m];
    let mut grad = vec![0.0; m];
    let mut hess = vec![0.0; m];

    let mut valid_raw: Vec<f64> = early
        .as_ref()
        .map(|es| vec![base_score; es.x.n_rows()])
        .unwrap_or_default();
    let mut best = (f64::INFINITY, 0usize);

    for round in 0..params.n_rounds {
        if deadline.exhausted() {
            break;
        }
        grad.par_iter_mut()
            .zip(hess.par_iter_mut())
            .enumerate()
            .with_min_len(4096)
            .for_each(|(i, (g, h))| {
                let (gi, hi) = logistic_grad_hess(labels[i], raw[i], weights[i]);
                *g = gi;
                *h = hi;
            });
        let grown = grow(&train, &features, &grad, &hess, params.max_leaves, cfg);
        let lr = params.learning_rate(round);
        for (leaf_rows, value) in &grown.leaves {
            for &r in leaf_rows {
                raw[r as usize] += lr * value;
            }
        }
        if let Some(es) = &early {
            let tree = &grown.tree;
            valid_raw
                .par_iter_mut()
                .enumerate()
                .with_min_len(1024)
                .for_each(|(r, s)| *s += lr * tree.predict_with(|f| es.x.columns[f][r]));
            let loss: f64 =
                es.y.iter()
                    .zip(&valid_raw)
                    .map(|(&l, &s)| logloss(l as f64, s, 1.0))
                    .sum();
            model.trees.push(grown.tree);
            model.learning_rates.push(lr);
            if loss < best.0 {
                best = (loss, round + 1);
            } else if round + 1 - best.1 >= es.patience {
                break;
            }
        } else {
            model.trees.push(grown.tree);
            model.learning_rates.push(lr);
        }
    }

    let best_rounds = early.as_ref().map(|_| best.1);
    if let Some(b) = best_rounds {
        model.trees.truncate(b);
        model.learning_rates.truncate(b);
    }
    for tree in &model.trees {
        for (f, _, gain) in tree.splits() {
            model.feature_gains[f] += gain;
        }
    }
    Ok(FitOutcome { model, best_rounds })
}

/// Probability of the positive class per row.
pub fn predict(model: &GbdtModel, x: &Matrix) -> Result<Vec<f64>, GbdtError> {
    if x.names != model.feature_names {
        return Err(GbdtError::ColumnMismatch {
            expected: model.feature_names.clone(),
            found: x.names.clone(),
        });
    }
    let out = (0..x.n_rows())
        .into_par_iter()
        .with_min_len(1024)
        .map(|r| sigmoid(model.raw_score(|f| x.columns[f][r])))
        .collect();
    Ok(out)
}

/// Total split gain per feature name; features never split report 0.
pub fn feature_gains(model: &GbdtModel) -> Vec<(String, f64)> {
    model
        .feature_names
        .iter()
        .cloned()
        .zip(model.feature_gains.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::auc;

    fn matrix(cols: Vec<Vec<f64>>) -> Matrix {
        let names = (0..cols.len()).map(|i| format!("f{i}")).collect();
        Matrix::new(names, cols).unwrap()
    }

    #[test]
    fn all_negative_labels_give_constant_prior_model() {
        let x = matrix(vec![(0..50).map(|i| i as f64).collect()]);
        let m = fit(
            &x,
            &[0; 50],
            &[1.0; 50],
            &GbdtParams::default(),
            &Deadline::none(),
        )
        .unwrap();
        assert!(m.degenerate);
        assert!(m.trees.is_empty());
        assert!(predict(&m, &x).unwrap().iter().all(|&p| p < 1e-3));
        assert!(m.feature_gains.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_base_constant_model_predicts_half() {
        let x = matrix(vec![vec![1.0, 2.0]]);
        let mut m = fit(
            &x,
            &[0, 1],
            &[1.0, 1.0],
            &GbdtParams::with_rounds(1, 0.1),
            &Deadline::none(),
        )
        .unwrap();
        m.trees.clear();
        m.learning_rates.clear();
        assert_eq!(m.base_score, 0.0);
        assert_eq!(predict(&m, &x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn separable_sign_feature() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 - 49.5) / 10.0).collect();
        let y: Vec<u8> = xs.iter().map(|&v| (v > 0.0) as u8).collect();
        let x = matrix(vec![xs.clone()]);
        let m = fit(
            &x,
            &y,
            &[1.0; 100],
            &GbdtParams::with_rounds(5, 0.3),
            &Deadline::none(),
        )
        .unwrap();
        match &m.trees[0].nodes[0] {
            super::super::Node::Split { threshold, .. } => {
                assert!(
                    *threshold < 0.0 && *threshold >= -0.05,
                    "threshold {threshold}"
                );
            }
            other => panic!("root is {other:?}"),
        }
        let p = predict(&m, &x).unwrap();
        assert_eq!(auc(&y, &p).unwrap(), 1.0);
    }

    #[test]
    fn extra_column_is_a_mismatch() {
        let x = matrix(vec![vec![0.0, 1.0, 2.0, 3.0]]);
        let m = fit(
            &x,
            &[0, 0, 1, 1],
            &[1.0; 4],
            &GbdtParams::with_rounds(2, 0.1),
            &Deadline::none(),
        )
        .unwrap();
        let wider = matrix(vec![vec![0.0; 4], vec![1.0; 4]]);
        assert!(matches!(
            predict(&m, &wider),
            Err(GbdtError::ColumnMismatch { .. })
        ));
    }

    #[test]
    fn gain_accounting_identity() {
        let a: Vec<f64> = (0..300).map(|i| ((i * 7919) % 300) as f64).collect();
        let b: Vec<f64> = (0..300).map(|i| ((i * 104_729) % 17) as f64).collect();
        let y: Vec<u8> = (0..300)
            .map(|i| ((a[i] + 10.0 * b[i]) > 200.0) as u8)
            .collect();
        let m = fit(
            &matrix(vec![a, b]),
            &y,
            &[1.0; 300],
            &GbdtParams::with_rounds(20, 0.2),
            &Deadline::none(),
        )
        .unwrap();
        let per_feature: f64 = m.feature_gains.iter().sum();
        let per_split: f64 = m.split_gains().sum();
        assert!((per_feature - per_split).abs() <= 1e-9 * per_split.max(1.0));
        assert!(m.feature_gains.iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn expired_deadline_returns_no_rounds() {
        let x = matrix(vec![vec![0.0, 1.0, 2.0, 3.0]]);
        let d = Deadline::after(std::time::Duration::ZERO);
        let m = fit(
            &x,
            &[0, 0, 1, 1],
            &[1.0; 4],
            &GbdtParams::with_rounds(50, 0.1),
            &d,
        )
        .unwrap();
        assert_eq!(m.n_rounds(), 0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let a: Vec<f64> = (0..200).map(|i| (i as f64).sin() * 3.3).collect();
        let y: Vec<u8> = a.iter().map(|&v| (v > 0.5) as u8).collect();
        let x = matrix(vec![a]);
        let m = fit(
            &x,
            &y,
            &[1.0; 200],
            &GbdtParams::with_rounds(10, 0.1),
            &Deadline::none(),
        )
        .unwrap();
        let back = GbdtModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(predict(&back, &x).unwrap(), predict(&m, &x).unwrap());
    }

    #[test]
    fn invalid_params_rejected() {
        let x = matrix(vec![vec![0.0, 1.0]]);
        let mut p = GbdtParams::with_rounds(0, 0.1);
        assert!(fit(&x, &[0, 1], &[1.0; 2], &p, &Deadline::none()).is_err());
        p.n_rounds = 1;
        p.n_bins = 300;
        assert!(fit(&x, &[0, 1], &[1.0; 2], &p, &Deadline::none()).is_err());
    }
}
