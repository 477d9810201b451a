//! Train on a labelled bundle and score test rows, all under one budget.

use log::{info, warn};
use thiserror::Error;

use crate::controller::{max_rows_for_memory, BudgetExhausted, BudgetTracker, MemoryEstimate};
use crate::data::{DataError, DatasetBundle, Table};
use crate::feateng::{
    run_feature_pipeline, FeatError, FeatureConfig, FeatureFrame, SelectionReport,
};
use crate::gbdt::{GbdtError, GbdtModel, GbdtParams, Matrix};
use crate::merge::{merge_all, plan_merge, MergeError};
use crate::preprocess::{preprocess, PreprocessConfig, DEFAULT_OVERLAP_THRESHOLD};
use crate::tuner::{
    decay_schedule, decayed_equivalent, estimate_round_time, fit_ensemble, plan_boost_rounds,
    predict_ensemble, probe_best_rounds, rebalance, search_learning_rate, EnsembleConfig,
    RoundTimeEstimate, DEFAULT_GRID, TRIAL_ROUNDS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("training bundle has no labels")]
    MissingLabels,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Features(#[from] FeatError),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error("worker pool: {0}")]
    Workers(String),
}

enum Stop {
    Budget(BudgetExhausted),
    Failed(PipelineError),
}

impl<E: Into<PipelineError>> From<E> for Stop {
    fn from(e: E) -> Self {
        Stop::Failed(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; `None` uses the ambient pool.
    pub workers: Option<usize>,
    pub overlap_threshold: f64,
    pub features: FeatureConfig,
    pub grid: Vec<f64>,
    /// Share of the remaining time not planned into boosting rounds.
    pub round_reserve: f64,
    /// Transient working-set multiplier for the training-row cap.
    pub memory_multiplier: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: None,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            features: FeatureConfig::default(),
            grid: DEFAULT_GRID.to_vec(),
            round_reserve: 0.2,
            memory_multiplier: 3.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    /// One probability per test row, in input order.
    pub predictions: Vec<f64>,
    /// Why the run fell back to a partial ensemble or the prior.
    pub fallback: Option<String>,
    pub feature_names: Vec<String>,
    pub selection: SelectionReport,
    pub selection_fits: usize,
    pub round_estimate: Option<RoundTimeEstimate>,
    pub learning_rate: Option<f64>,
    pub rounds: Option<usize>,
    pub models: Vec<GbdtModel>,
    pub train_rows_used: usize,
}

/// Runs preprocessing, merging, feature engineering, tuning and the
/// ensemble, then scores `test_main`. When the budget runs out the
/// predictions come from whatever ensemble exists, or the training prior.
pub fn run_pipeline(
    train: DatasetBundle,
    test_main: Table,
    cfg: &PipelineConfig,
    tracker: &BudgetTracker,
) -> Result<PipelineOutcome, PipelineError> {
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| PipelineError::Workers(e.to_string()))?
            .install(|| run_inner(train, test_main, cfg, tracker)),
        None => run_inner(train, test_main, cfg, tracker),
    }
}

struct Scoring {
    x: Matrix,
    /// Frame test row `i` is input test row `order[i]`.
    order: Vec<usize>,
}

fn run_inner(
    train: DatasetBundle,
    test_main: Table,
    cfg: &PipelineConfig,
    tracker: &BudgetTracker,
) -> Result<PipelineOutcome, PipelineError> {
    let labels = train.labels.clone().ok_or(PipelineError::MissingLabels)?;
    let n_test = test_main.n_rows;
    let prior = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / labels.len().max(1) as f64;
    let mut out = PipelineOutcome::default();
    let mut scoring: Option<Scoring> = None;

    let result = train_and_score(
        train,
        test_main,
        labels,
        cfg,
        tracker,
        &mut out,
        &mut scoring,
    );
    match result {
        Ok(p) => out.predictions = p,
        Err(Stop::Failed(e)) => return Err(e),
        Err(Stop::Budget(e)) => {
            warn!("{e}");
            match (&scoring, out.models.is_empty()) {
                (Some(s), false) => {
                    out.fallback = Some(format!("{e}; scoring with {} model(s)", out.models.len()));
                    out.predictions = reorder(&predict_ensemble(&out.models, &s.x)?, &s.order);
                }
                _ => {
                    out.fallback = Some(format!("{e}; predicting the training prior"));
                    out.predictions = vec![prior.clamp(1e-6, 1.0 - 1e-6); n_test];
                }
            }
        }
    }
    tracker.finish();
    Ok(out)
}

fn reorder(sorted: &[f64], order: &[usize]) -> Vec<f64> {
    let mut p = vec![0.0; sorted.len()];
    for (i, &o) in order.iter().enumerate() {
        p[o] = sorted[i];
    }
    p
}

fn train_and_score(
    train: DatasetBundle,
    test_main: Table,
    labels: Vec<u8>,
    cfg: &PipelineConfig,
    tracker: &BudgetTracker,
    out: &mut PipelineOutcome,
    scoring: &mut Option<Scoring>,
) -> Result<Vec<f64>, Stop> {
    let check = |phase: &str| tracker.checkpoint(phase).map_err(Stop::Budget);

    check("preprocess")?;
    let n_train = train.main.n_rows;
    let mut bundle = train;
    bundle.main = bundle.main.concat_rows(&test_main)?;
    bundle.labels = None;
    let pre = preprocess(
        bundle,
        &PreprocessConfig {
            overlap_threshold: cfg.overlap_threshold,
            main_split: n_train,
        },
    );
    let labels: Vec<u8> = pre.main_order[..n_train]
        .iter()
        .map(|&r| labels[r])
        .collect();
    let test_order: Vec<usize> = pre.main_order[n_train..]
        .iter()
        .map(|&r| r - n_train)
        .collect();
    tracker.note_memory(pre.bundle.tables().map(table_bytes).sum());

    check("merge")?;
    let plan = plan_merge(&pre.bundle)?;
    let merged = merge_all(&pre.bundle, &plan)?;
    let base = pre.base.clone();
    drop(pre);
    tracker.note_memory(table_bytes(&merged));

    // keep the most recent training rows that fit in memory
    let est =
        MemoryEstimate::for_columns(&merged.columns, merged.n_rows, tracker.mem_budget_bytes());
    let cap = (max_rows_for_memory(&est, cfg.memory_multiplier) as usize).max(1000);
    let (merged, labels, n_train) = if n_train > cap {
        warn!("training rows capped at {cap} of {n_train} by the memory budget");
        let rows: Vec<usize> = (n_train - cap..merged.n_rows).collect();
        (
            merged.take_rows(&rows),
            labels[n_train - cap..].to_vec(),
            cap,
        )
    } else {
        (merged, labels, n_train)
    };
    out.train_rows_used = n_train;

    check("feateng")?;
    let frame = FeatureFrame::from_table(merged, n_train);
    let fe = run_feature_pipeline(frame, base.as_ref(), &labels, tracker, &cfg.features)?;
    out.selection = fe.report;
    out.selection_fits = fe.selection_fits;
    out.feature_names = fe.frame.names();
    let n = fe.frame.n_rows;
    let x = fe.frame.to_matrix(0..n_train)?;
    *scoring = Some(Scoring {
        x: fe.frame.to_matrix(n_train..n)?,
        order: test_order,
    });
    drop(fe.frame);

    check("tune")?;
    let rb = rebalance(&labels, &vec![1.0; labels.len()], cfg.seed);
    let (x, y, w) = if rb.rows.len() < labels.len() {
        (
            x.take_rows(&rb.rows),
            rb.rows.iter().map(|&r| labels[r]).collect(),
            rb.weights,
        )
    } else {
        (x, labels, rb.weights)
    };
    let base_params = GbdtParams {
        seed: cfg.seed,
        ..GbdtParams::default()
    };
    let est = estimate_round_time(&x, &y, &w, &base_params, TRIAL_ROUNDS)?;
    out.round_estimate = Some(est);

    let sample_share = (40_000.0 / x.n_rows() as f64).min(0.8);
    let search_cost = cfg.grid.len() as f64 * est.predict(50) * sample_share;
    let lr = if cfg.grid.len() > 1 && tracker.can_afford(search_cost, 0.5) {
        search_learning_rate(&x, &y, &cfg.grid, 50, cfg.seed, &tracker.deadline(0.5))?.best
    } else {
        cfg.grid
            .iter()
            .copied()
            .find(|&g| g == 0.1)
            .unwrap_or(cfg.grid[0])
    };
    out.learning_rate = Some(lr);

    let plan = plan_boost_rounds(&est, tracker.remaining_s(), cfg.round_reserve);
    let probe = probe_best_rounds(&x, &y, lr, plan, cfg.seed, &tracker.deadline(0.6))?;
    let plan = plan_boost_rounds(&est, tracker.remaining_s(), cfg.round_reserve);
    let rounds = match probe {
        Some(best) => plan.min(decayed_equivalent(best, lr)),
        None => plan,
    };
    info!("learning rate {lr}, {rounds} rounds (time plan {plan}, probe {probe:?})");
    out.rounds = Some(rounds);

    check("train")?;
    let params = GbdtParams {
        n_rounds: rounds,
        learning_rates: decay_schedule(lr, rounds),
        ..base_params
    };
    let ensemble = fit_ensemble(&x, &y, &w, &EnsembleConfig::new(params), tracker)?;
    out.models = ensemble.models;
    drop(x);

    check("predict")?;
    let s = scoring
        .as_ref()
        .expect("scoring matrix is built before training");
    Ok(reorder(&predict_ensemble(&out.models, &s.x)?, &s.order))
}

fn table_bytes(t: &Table) -> u64 {
    MemoryEstimate::for_columns(&t.columns, t.n_rows, u64::MAX).current_bytes
}
