//! Histogram GBDT on its own: fit with a decaying learning rate, read the
//! per-feature gains, and round-trip the model through JSON.
//!
//!     cargo run --release --example gbdt_training

use autosmart::controller::Deadline;
use autosmart::evaluation::auc;
use autosmart::gbdt::{feature_gains, fit, predict, GbdtModel, GbdtParams, Matrix};
use autosmart::tuner::decay_schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 20_000;
    let cols: Vec<Vec<f64>> = (0..5)
        .map(|k| {
            (0..n)
                .map(|_| {
                    if rng.random_bool(0.05) {
                        f64::NAN
                    } else {
                        rng.random_range(-1.0..1.0) * (k + 1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let y: Vec<u8> = (0..n)
        .map(|r| {
            let s = 2.0 * cols[0][r].max(0.0) - cols[1][r] * cols[2][r] / 6.0
                + rng.random_range(-1.0..1.0);
            (s > 0.5) as u8
        })
        .collect();
    let names = (0..5).map(|k| format!("x{k}")).collect();
    let x = Matrix::new(names, cols)?;
    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|r| r % 5 != 0);
    let (xtr, xte) = (x.take_rows(&train), x.take_rows(&test));
    let ytr: Vec<u8> = train.iter().map(|&r| y[r]).collect();
    let yte: Vec<u8> = test.iter().map(|&r| y[r]).collect();

    let params = GbdtParams {
        n_rounds: 200,
        learning_rates: decay_schedule(0.2, 200),
        ..GbdtParams::default()
    };
    let model = fit(
        &xtr,
        &ytr,
        &vec![1.0; ytr.len()],
        &params,
        &Deadline::none(),
    )?;
    println!(
        "{} trees, test AUC {:.4}",
        model.n_rounds(),
        auc(&yte, &predict(&model, &xte)?)?
    );
    for (name, gain) in feature_gains(&model) {
        println!("  {name}: {gain:.1}");
    }
    let again = GbdtModel::from_json(&model.to_json())?;
    assert_eq!(predict(&again, &xte)?, predict(&model, &xte)?);
    println!("JSON round-trip gives identical predictions");
    Ok(())
}
