//! Round-count planning from two timed trials, learning-rate search,
//! decay schedule, class rebalancing and the bagged ensemble.

use std::time::Instant;

use log::{info, warn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::controller::{BudgetTracker, Deadline};
use crate::evaluation::auc;
use crate::feateng::stratified_sample;
use crate::gbdt::{
    fit, fit_binned, predict, BinnedData, EarlyStopping, GbdtError, GbdtModel, GbdtParams, Matrix,
};

pub const TRIAL_ROUNDS: usize = 15;
pub const MIN_ROUNDS: usize = 15;
pub const MAX_ROUNDS: usize = 5000;
pub const DEFAULT_GRID: [f64; 4] = [0.3, 0.1, 0.05, 0.02];
pub const MAX_MODELS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("trial at {long} rounds ({t_long}s) was not slower than at {short} rounds ({t_short}s)")]
pub struct NonPositiveSlope {
    pub short: usize,
    pub long: usize,
    pub t_short: f64,
    pub t_long: f64,
}

/// `t(r) = prep_s + r * per_round_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTimeEstimate {
    pub prep_s: f64,
    pub per_round_s: f64,
}

impl RoundTimeEstimate {
    /// Line through `(r0, t_short)` and `(2 r0, t_long)`.
    pub fn from_trials(r0: usize, t_short: f64, t_long: f64) -> Result<Self, NonPositiveSlope> {
        if t_long <= t_short {
            return Err(NonPositiveSlope {
                short: r0,
                long: 2 * r0,
                t_short,
                t_long,
            });
        }
        let per_round_s = (t_long - t_short) / r0 as f64;
        Ok(RoundTimeEstimate {
            prep_s: (t_short - r0 as f64 * per_round_s).max(0.0),
            per_round_s,
        })
    }

    /// All of `t_long` charged to rounds.
    pub fn fallback(r0: usize, t_long: f64) -> Self {
        RoundTimeEstimate {
            prep_s: 0.0,
            per_round_s: (t_long / (2 * r0) as f64).max(f64::MIN_POSITIVE),
        }
    }

    pub fn predict(&self, rounds: usize) -> f64 {
        self.prep_s + rounds as f64 * self.per_round_s
    }
}

/// Times `trial(r0)` and `trial(2 r0)`, retrying once when the second is
/// not slower, then falling back to a pure per-round rate.
pub fn estimate_round_time_with(
    r0: usize,
    mut trial: impl FnMut(usize) -> f64,
) -> RoundTimeEstimate {
    let mut last = 0.0;
    for _ in 0..2 {
        let (short, long) = (trial(r0), trial(2 * r0));
        match RoundTimeEstimate::from_trials(r0, short, long) {
            Ok(est) => return est,
            Err(e) => {
                warn!("{e}");
                last = long;
            }
        }
    }
    RoundTimeEstimate::fallback(r0, last)
}

/// Wall-clock trials of full fits (binning included) at `r0` and `2 r0` rounds.
pub fn estimate_round_time(
    x: &Matrix,
    y: &[u8],
    w: &[f64],
    params: &GbdtParams,
    r0: usize,
) -> Result<RoundTimeEstimate, GbdtError> {
    let mut failure = None;
    let est = estimate_round_time_with(r0, |r| {
        let p = GbdtParams {
            n_rounds: r,
            ..params.clone()
        };
        let start = Instant::now();
        if let Err(e) = fit(x, y, w, &p, &Deadline::none()) {
            failure = Some(e);
        }
        start.elapsed().as_secs_f64()
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

/// Rounds that fit into `remaining_s * (1 - reserve)` after preparation,
/// clamped to `[MIN_ROUNDS, MAX_ROUNDS]`.
pub fn plan_boost_rounds(est: &RoundTimeEstimate, remaining_s: f64, reserve: f64) -> usize {
    let avail = remaining_s * (1.0 - reserve) - est.prep_s;
    let rounds = (avail / est.per_round_s).floor();
    if rounds.is_nan() || rounds < MIN_ROUNDS as f64 {
        MIN_ROUNDS
    } else {
        (rounds.min(MAX_ROUNDS as f64)) as usize
    }
}

/// `lr_t = max(0.01 lr0, lr0 * 0.8^floor(t / s))`, `s = max(1, ceil(n / 10))`.
pub fn decay_schedule(lr0: f64, n_rounds: usize) -> Vec<f64> {
    let step = n_rounds.div_ceil(10).max(1);
    (0..n_rounds)
        .map(|t| (lr0 * 0.8f64.powi((t / step) as i32)).max(0.01 * lr0))
        .collect()
}

/// Fewest decayed rounds whose learning-rate mass reaches `rounds * lr0`,
/// i.e. the decayed equivalent of `rounds` constant-rate rounds.
pub fn decayed_equivalent(rounds: usize, lr0: f64) -> usize {
    let target = rounds as f64 * lr0;
    let mass = |n: usize| decay_schedule(lr0, n).iter().sum::<f64>();
    let (mut lo, mut hi) = (rounds.max(1), MAX_ROUNDS);
    if mass(hi) < target {
        return hi;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if mass(mid) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Rows of a stratified sample of at most `cap`, kept in row
/// (time) order, split 80/20 into fit and validation parts.
pub fn time_split(y: &[u8], cap: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let rows = stratified_sample(y, cap, seed);
    let cut = (rows.len() * 4) / 5;
    (rows[..cut].to_vec(), rows[cut..].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrSearch {
    pub best: f64,
    /// Validation AUC per grid point, grid order.
    pub aucs: Vec<(f64, f64)>,
}

/// Fits a short model per grid point on the earlier 80% of a sample and
/// keeps the rate with the best AUC on the later 20%; ties go to the
/// larger rate.
pub fn search_learning_rate(
    x: &Matrix,
    y: &[u8],
    grid: &[f64],
    rounds: usize,
    seed: u64,
    deadline: &Deadline,
) -> Result<LrSearch, GbdtError> {
    assert!(!grid.is_empty(), "learning-rate grid is empty");
    let (fit_rows, val_rows) = time_split(y, 50_000, seed);
    let (xf, xv) = (x.take_rows(&fit_rows), x.take_rows(&val_rows));
    let yf: Vec<u8> = fit_rows.iter().map(|&r| y[r]).collect();
    let yv: Vec<u8> = val_rows.iter().map(|&r| y[r]).collect();
    let w = vec![1.0; yf.len()];
    let binned = BinnedData::from_matrix(&xf, GbdtParams::default().n_bins);
    let mut aucs = Vec::with_capacity(grid.len());
    for &lr in grid {
        let params = GbdtParams {
            seed,
            ..GbdtParams::with_rounds(rounds, lr)
        };
        let model = fit_binned(&binned, &yf, &w, &params, deadline, None)?.model;
        let score = auc(&yv, &predict(&model, &xv)?).unwrap_or(0.5);
        aucs.push((lr, score));
    }
    let best = aucs
        .iter()
        .copied()
        .reduce(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 > a.0) {
                b
            } else {
                a
            }
        })
        .unwrap()
        .0;
    Ok(LrSearch { best, aucs })
}

/// Constant-rate rounds at which validation logloss bottomed out (patience 30),
/// on an 80/20 time split of all rows.
pub fn probe_best_rounds(
    x: &Matrix,
    y: &[u8],
    lr: f64,
    max_rounds: usize,
    seed: u64,
    deadline: &Deadline,
) -> Result<Option<usize>, GbdtError> {
    let (fit_rows, val_rows) = time_split(y, usize::MAX, seed);
    let yv: Vec<u8> = val_rows.iter().map(|&r| y[r]).collect();
    if !(yv.contains(&0) && yv.contains(&1)) {
        return Ok(None);
    }
    let xf = x.take_rows(&fit_rows);
    let xv = x.take_rows(&val_rows);
    let yf: Vec<u8> = fit_rows.iter().map(|&r| y[r]).collect();
    let w = vec![1.0; yf.len()];
    let params = GbdtParams {
        seed,
        ..GbdtParams::with_rounds(max_rounds, lr)
    };
    let binned = BinnedData::from_matrix(&xf, params.n_bins);
    let early = EarlyStopping {
        x: &xv,
        y: &yv,
        patience: 30,
    };
    Ok(fit_binned(&binned, &yf, &w, &params, deadline, Some(early))?.best_rounds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rebalanced {
    /// Kept row indices, ascending.
    pub rows: Vec<usize>,
    /// Weight of each kept row.
    pub weights: Vec<f64>,
}

/// Under-samples the majority class to 3x the minority when the classes
/// are more skewed than 1:3; kept majority rows carry the weight of the
/// rows they stand for.
pub fn rebalance(y: &[u8], w: &[f64], seed: u64) -> Rebalanced {
    let identity = || Rebalanced {
        rows: (0..y.len()).collect(),
        weights: w.to_vec(),
    };
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        warn!("rebalance: single class, data left unchanged");
        return identity();
    }
    let (minority, majority) = if pos.len() <= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };
    if 3 * minority.len() >= majority.len() {
        return identity();
    }
    let keep = 3 * minority.len();
    let factor = majority.len() as f64 / keep as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept_major: Vec<usize> = sample(&mut rng, majority.len(), keep)
        .into_iter()
        .map(|i| majority[i])
        .collect();
    kept_major.sort_unstable();
    let mut rows: Vec<(usize, f64)> = minority.iter().map(|&i| (i, w[i])).collect();
    rows.extend(kept_major.iter().map(|&i| (i, w[i] * factor)));
    rows.sort_unstable_by_key(|r| r.0);
    Rebalanced {
        rows: rows.iter().map(|r| r.0).collect(),
        weights: rows.iter().map(|r| r.1).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub params: GbdtParams,
    pub max_models: usize,
    /// Share of remaining time that must stay free after each member.
    pub reserve: f64,
}

impl EnsembleConfig {
    pub fn new(params: GbdtParams) -> Self {
        EnsembleConfig {
            params: GbdtParams {
                row_fraction: 0.9,
                feature_fraction: 0.8,
                ..params
            },
            max_models: MAX_MODELS,
            reserve: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub models: Vec<GbdtModel>,
    /// Wall-clock seconds spent on each member.
    pub member_seconds: Vec<f64>,
}

/// Bagged members with distinct seeds, trained one after another while the
/// tracker can afford another member at the slowest measured cost. The
/// first member is always trained; the tracker deadline cuts its rounds
/// short if needed.
pub fn fit_ensemble(
    x: &Matrix,
    y: &[u8],
    w: &[f64],
    cfg: &EnsembleConfig,
    tracker: &BudgetTracker,
) -> Result<Ensemble, GbdtError> {
    let start = Instant::now();
    let binned = BinnedData::from_matrix(x, cfg.params.n_bins);
    let bin_s = start.elapsed().as_secs_f64();
    let mut models = Vec::new();
    let mut member_seconds = Vec::new();
    for k in 0..cfg.max_models.max(1) {
        if let Some(&cost) = member_seconds.iter().max_by(|a: &&f64, b| a.total_cmp(b)) {
            if !tracker.can_afford(cost, cfg.reserve) {
                info!("ensemble stops at {k} models: next would need {cost:.2}s");
                break;
            }
        }
        let params = GbdtParams {
            seed: cfg.params.seed.wrapping_add(1_000_003 * k as u64),
            ..cfg.params.clone()
        };
        let t = Instant::now();
        let deadline = if k == 0 {
            tracker.deadline(cfg.reserve)
        } else {
            Deadline::none()
        };
        let model = fit_binned(&binned, y, w, &params, &deadline, None)?.model;
        let took = t.elapsed().as_secs_f64() + if k == 0 { bin_s } else { 0.0 };
        member_seconds.push(took);
        models.push(model);
    }
    Ok(Ensemble {
        models,
        member_seconds,
    })
}

/// Mean of the members' probabilities.
pub fn predict_ensemble(models: &[GbdtModel], x: &Matrix) -> Result<Vec<f64>, GbdtError> {
    assert!(!models.is_empty(), "empty ensemble");
    let mut sum = vec![0.0; x.n_rows()];
    for m in models {
        for (s, p) in sum.iter_mut().zip(predict(m, x)?) {
            *s += p;
        }
    }
    let k = models.len() as f64;
    Ok(sum.into_iter().map(|s| s / k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_trials_give_line() {
        let est = RoundTimeEstimate::from_trials(15, 2.0, 3.5).unwrap();
        assert!((est.per_round_s - 0.1).abs() < 1e-12);
        assert!((est.prep_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flat_trials_fall_back() {
        let mut calls = 0;
        let est = estimate_round_time_with(15, |_| {
            calls += 1;
            1.0
        });
        assert_eq!(calls, 4);
        assert_eq!(est.prep_s, 0.0);
        assert!((est.per_round_s - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn round_plan_examples() {
        let est = RoundTimeEstimate {
            prep_s: 0.5,
            per_round_s: 0.1,
        };
        assert_eq!(plan_boost_rounds(&est, 60.0, 0.2), 475);
        assert_eq!(plan_boost_rounds(&est, 1.0, 0.2), 15);
        let slow = RoundTimeEstimate {
            prep_s: 0.5,
            per_round_s: 10.0,
        };
        assert_eq!(plan_boost_rounds(&slow, 60.0, 0.2), 15);
        let fast = RoundTimeEstimate {
            prep_s: 0.0,
            per_round_s: 1e-6,
        };
        assert_eq!(plan_boost_rounds(&fast, 60.0, 0.2), MAX_ROUNDS);
    }

    #[test]
    fn decay_examples() {
        assert_eq!(decay_schedule(0.3, 1), vec![0.3]);
        let s = decay_schedule(0.1, 20);
        assert_eq!(
            &s[..4],
            &[0.1, 0.1, 0.08000000000000002, 0.08000000000000002]
        );
        let long = decay_schedule(0.1, 1000);
        assert!(long.windows(2).all(|w| w[1] <= w[0]));
        assert!(*long.last().unwrap() >= 0.001);
    }

    #[test]
    fn decayed_equivalent_matches_mass() {
        let n = decayed_equivalent(100, 0.1);
        let mass = |n| decay_schedule(0.1, n).iter().sum::<f64>();
        assert!(mass(n) >= 10.0 - 1e-9 && mass(n - 1) < 10.0);
    }

    #[test]
    fn rebalance_examples() {
        let mut y = vec![1u8; 100];
        y.extend(vec![0u8; 10_000]);
        let w = vec![1.0; y.len()];
        let r = rebalance(&y, &w, 3);
        let neg: Vec<f64> = r
            .rows
            .iter()
            .zip(&r.weights)
            .filter(|(&i, _)| y[i] == 0)
            .map(|(_, &w)| w)
            .collect();
        assert_eq!(neg.len(), 300);
        assert!(neg.iter().all(|&w| (w - 10_000.0 / 300.0).abs() < 1e-12));

        let y2: Vec<u8> = (0..300).map(|i| u8::from(i < 100)).collect();
        let r2 = rebalance(&y2, &vec![1.0; 300], 3);
        assert_eq!(r2.rows, (0..300).collect::<Vec<_>>());
        let single = rebalance(&[0, 0], &[1.0, 2.0], 3);
        assert_eq!(single.weights, vec![1.0, 2.0]);
    }
}
