//! Generate a synthetic relational bundle, train under a budget and score
//! the held-out rows against a GBDT fit on the raw main table alone.
//!
//!     cargo run --release --example end_to_end -- [main_rows] [budget_s]

use std::time::Instant;

use autosmart::controller::{BudgetTracker, Deadline};
use autosmart::evaluation::auc;
use autosmart::feateng::numeric_view;
use autosmart::gbdt::{fit, predict, GbdtParams, Matrix};
use autosmart::ingest::{generate_synthetic, split_train_test, SyntheticSpec};
use autosmart::pipeline::{run_pipeline, PipelineConfig};
use autosmart::tuner::probe_best_rounds;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let rows: usize = args
        .next()
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(50_000);
    let budget: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(300.0);

    let spec = SyntheticSpec {
        main_rows: rows,
        ..Default::default()
    };
    let bundle = generate_synthetic(&spec, 7)?;
    let (train, test) = split_train_test(&bundle, spec.test_fraction);
    let test_labels = test.labels.clone().unwrap();

    let start = Instant::now();
    let tracker = BudgetTracker::new(budget, bundle.mem_budget_bytes);
    let out = run_pipeline(
        train.clone(),
        test.main.clone(),
        &PipelineConfig::default(),
        &tracker,
    )?;
    let wall = start.elapsed().as_secs_f64();
    println!("{}", tracker.phase_log_tsv());
    println!(
        "features {} | lr {:?} | rounds {:?} | models {} | fallback {:?}",
        out.feature_names.len(),
        out.learning_rate,
        out.rounds,
        out.models.len(),
        out.fallback
    );
    println!(
        "pipeline AUC {:.4} in {wall:.1}s",
        auc(&test_labels, &out.predictions)?
    );

    // baseline: raw main columns only, rounds picked by early stopping
    let raw = |t: &autosmart::data::Table| {
        Matrix::new(
            t.columns.iter().map(|c| c.name.clone()).collect(),
            t.columns.iter().map(numeric_view).collect(),
        )
    };
    let (xtr, xte) = (raw(&train.main)?, raw(&test.main)?);
    let y = train.labels.unwrap();
    let best = probe_best_rounds(&xtr, &y, 0.1, 2000, 0, &Deadline::none())?.unwrap_or(100);
    let model = fit(
        &xtr,
        &y,
        &vec![1.0; y.len()],
        &GbdtParams::with_rounds(best.max(1), 0.1),
        &Deadline::none(),
    )?;
    println!(
        "baseline AUC {:.4} ({best} rounds)",
        auc(&test_labels, &predict(&model, &xte)?)?
    );
    Ok(())
}
