//! The staged generate-then-select loop on a merged synthetic bundle:
//! which candidates each stage proposed, which survived, and why.
//!
//!     cargo run --release --example feature_engineering -- [main_rows]

use autosmart::controller::BudgetTracker;
use autosmart::feateng::{run_feature_pipeline, FeatureConfig, FeatureFrame};
use autosmart::ingest::{generate_synthetic, SyntheticSpec};
use autosmart::merge::{merge_all, plan_merge};
use autosmart::preprocess::{preprocess, PreprocessConfig, DEFAULT_OVERLAP_THRESHOLD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(10_000);
    let bundle = generate_synthetic(
        &SyntheticSpec {
            main_rows: rows,
            ..Default::default()
        },
        2,
    )?;
    let labels = bundle.labels.clone().unwrap();
    let pre = preprocess(
        bundle,
        &PreprocessConfig {
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            main_split: rows,
        },
    );
    let labels: Vec<u8> = pre.main_order.iter().map(|&r| labels[r]).collect();
    let merged = merge_all(&pre.bundle, &plan_merge(&pre.bundle)?)?;
    let frame = FeatureFrame::from_table(merged, rows);
    println!("{} columns after merging", frame.columns.len());

    let tracker = BudgetTracker::new(120.0, 2 << 30);
    let out = run_feature_pipeline(
        frame,
        pre.base.as_ref(),
        &labels,
        &tracker,
        &FeatureConfig::default(),
    )?;
    for stage in 1..=3u8 {
        let rows: Vec<_> = out
            .report
            .rows
            .iter()
            .filter(|r| r.stage == stage)
            .collect();
        let kept = rows.iter().filter(|r| r.kept).count();
        println!("stage {stage}: kept {kept} of {} candidates", rows.len());
        let mut best: Vec<_> = rows.iter().filter(|r| r.kept).collect();
        best.sort_by(|a, b| b.gain.total_cmp(&a.gain));
        for r in best.iter().take(5) {
            println!("    {:<36} gain {:>10.2}", r.feature, r.gain);
        }
    }
    if !out.skipped.is_empty() {
        println!("skipped stages {:?}", out.skipped);
    }
    println!(
        "{} numeric features after encoding, {} selection fits",
        out.frame.columns.len(),
        out.selection_fits
    );
    Ok(())
}
