//! AUC with ties, the rescaled competition score and the per-dataset average.
//!
//!     cargo run --example scoring

use autosmart::evaluation::{auc, average_score, evaluate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8])?;
    println!("AUC of the four-row example: {a}");
    let tied = auc(&[0, 1, 0, 1], &[0.5, 0.5, 0.2, 0.9])?;
    println!("AUC with a tied pair: {tied}");

    let rec = evaluate(
        &[0, 0, 1, 1, 0, 1],
        &[0.2, 0.3, 0.7, 0.4, 0.5, 0.9],
        Some(0.6),
        Some(0.95),
    )?;
    println!(
        "auc {:.4} -> score {:.4} between 0.6 and 0.95",
        rec.auc,
        rec.score.unwrap()
    );

    for row in [
        [1.0, 1.0, 1.0, 0.9871, 1.0],
        [1.0, 1.0, 1.0, 0.9287, 0.6255],
    ] {
        println!("{row:?} -> average {:.4}", average_score(&row)?);
    }
    Ok(())
}
