//! How the tuner turns a time budget into a training plan: two timed trial
//! fits give a linear round-time model, which sizes the boosting run;
//! skewed labels are rebalanced first.
//!
//!     cargo run --release --example budget_planning -- [budget_s]

use autosmart::controller::{BudgetTracker, Deadline};
use autosmart::gbdt::{fit, GbdtParams, Matrix};
use autosmart::tuner::{
    decay_schedule, decayed_equivalent, estimate_round_time, fit_ensemble, plan_boost_rounds,
    rebalance, EnsembleConfig, TRIAL_ROUNDS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let budget: f64 = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 60_000;
    let cols: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let y: Vec<u8> = (0..n)
        .map(|r| (cols[0][r] + 0.3 * rng.random_range(0.0..1.0) > 1.15) as u8)
        .collect();
    let x = Matrix::new((0..8).map(|k| format!("x{k}")).collect(), cols)?;

    let rb = rebalance(&y, &vec![1.0; n], 0);
    let pos = y.iter().filter(|&&v| v == 1).count();
    println!(
        "labels {pos} pos / {} neg -> {} rows kept",
        n - pos,
        rb.rows.len()
    );
    let xs = x.take_rows(&rb.rows);
    let ys: Vec<u8> = rb.rows.iter().map(|&r| y[r]).collect();

    let tracker = BudgetTracker::new(budget, 1 << 30);
    let est = estimate_round_time(&xs, &ys, &rb.weights, &GbdtParams::default(), TRIAL_ROUNDS)?;
    println!(
        "t(r) = {:.4} + {:.5} r seconds",
        est.prep_s, est.per_round_s
    );
    let rounds = plan_boost_rounds(&est, tracker.remaining_s(), 0.2);
    println!(
        "{:.1}s left -> plan {rounds} rounds (predicted {:.2}s)",
        tracker.remaining_s(),
        est.predict(rounds)
    );
    println!(
        "100 constant-rate rounds at 0.1 = {} decayed rounds",
        decayed_equivalent(100, 0.1)
    );

    let start = std::time::Instant::now();
    let params = GbdtParams {
        n_rounds: rounds,
        learning_rates: decay_schedule(0.1, rounds),
        ..GbdtParams::default()
    };
    fit(&xs, &ys, &rb.weights, &params, &Deadline::none())?;
    println!("one member measured {:.2}s", start.elapsed().as_secs_f64());

    let ens = fit_ensemble(
        &xs,
        &ys,
        &rb.weights,
        &EnsembleConfig::new(params),
        &tracker,
    )?;
    println!(
        "ensemble of {} members in {:.1}s of {budget}s",
        ens.models.len(),
        tracker.elapsed_s()
    );
    Ok(())
}
