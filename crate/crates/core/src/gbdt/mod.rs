//! Histogram gradient-boosted decision trees for binary classification.
//!
//! Logistic loss, per-row weights, a per-round learning-rate schedule,
//! best-first (leaf-wise) growth and learned default directions for missing
//! values. Features are quantile-binned to at most 255 value bins; bin 255 is
//! reserved for missing values.

mod binning;
mod model;
mod split;
mod tree;

use thiserror::Error;

pub use binning::{BinMapper, BinnedData, MISSING_BIN};
pub use model::{
    feature_gains, fit, fit_binned, predict, EarlyStopping, FitOutcome, GbdtModel,
    MODEL_FORMAT_VERSION,
};
pub use split::{
    best_split, leaf_value, logistic_grad_hess, logloss, sigmoid, split_gain, GradPair, Histogram,
    SplitCandidate, SplitConfig,
};
pub use tree::{Node, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbdtError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("feature columns differ from training: expected {expected:?}, found {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("model format: {0}")]
    Format(String),
}

/// Dense column-major feature matrix; NaN marks a missing value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Matrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, GbdtError> {
        if names.len() != columns.len() {
            return Err(GbdtError::LengthMismatch {
                what: "column names",
                expected: columns.len(),
                found: names.len(),
            });
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(GbdtError::LengthMismatch {
                what: "column length",
                expected: n,
                found: c.len(),
            });
        }
        Ok(Matrix { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn take_rows(&self, rows: &[usize]) -> Matrix {
        Matrix {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        }
    }

    pub fn select(&self, cols: &[usize]) -> Matrix {
        Matrix {
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GbdtParams {
    pub n_rounds: usize,
    /// Rate for round `t` is `learning_rates[min(t, len - 1)]`.
    pub learning_rates: Vec<f64>,
    pub max_leaves: usize,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub n_bins: usize,
    pub lambda: f64,
    pub feature_fraction: f64,
    pub row_fraction: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_rounds: 100,
            learning_rates: vec![0.1],
            max_leaves: 31,
            min_child_weight: 1.0,
            n_bins: 255,
            lambda: 1.0,
            feature_fraction: 1.0,
            row_fraction: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn with_rounds(n_rounds: usize, learning_rate: f64) -> Self {
        GbdtParams {
            n_rounds,
            learning_rates: vec![learning_rate],
            ..Default::default()
        }
    }

    pub fn learning_rate(&self, round: usize) -> f64 {
        self.learning_rates[round.min(self.learning_rates.len() - 1)]
    }

    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: &str| Err(GbdtError::InvalidParams(m.to_string()));
        if self.n_rounds < 1 {
            return bad("n_rounds must be at least 1");
        }
        if !(2..=255).contains(&self.n_bins) {
            return bad("n_bins must be in [2, 255]");
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|&r| !(r > 0.0)) {
            return bad("learning rates must be positive");
        }
        for (name, f) in [
            ("feature_fraction", self.feature_fraction),
            ("row_fraction", self.row_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(GbdtError::InvalidParams(format!(
                    "{name} must be in (0, 1]"
                )));
            }
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.lambda < 0.0 || self.min_child_weight < 0.0 {
            return bad("lambda and min_child_weight must be non-negative");
        }
        Ok(())
    }
}
