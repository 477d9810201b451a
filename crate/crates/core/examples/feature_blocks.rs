//! Categorical columns whose value sets overlap share one code dictionary.
//! Prints the detected keys, the blocks and a few decoded codes.
//!
//!     cargo run --example feature_blocks

use autosmart::ingest::{generate_synthetic, SyntheticSpec};
use autosmart::preprocess::{preprocess, PreprocessConfig, DEFAULT_OVERLAP_THRESHOLD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        main_rows: 2000,
        ..Default::default()
    };
    let bundle = generate_synthetic(&spec, 1)?;
    let n = bundle.main.n_rows;
    let pre = preprocess(
        bundle,
        &PreprocessConfig {
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            main_split: n,
        },
    );

    if let Some(base) = &pre.base {
        println!("factor {} | sessions {:?}", base.factor, base.sessions);
        for (table, keys) in &base.keys {
            println!("  keys of {table}: {keys:?}");
        }
    }
    for (id, members) in &pre.blocks.blocks {
        let names: Vec<String> = members
            .iter()
            .map(|&i| pre.columns[i].to_string())
            .collect();
        let size = pre.dictionary.blocks.get(id).map_or(0, Vec::len);
        println!(
            "block {id}: {} distinct values over {}",
            size,
            names.join(", ")
        );
    }
    let user = pre.bundle.main.column("user_id").unwrap();
    let b = user.block().unwrap();
    for r in 0..3 {
        let code = user.code(r).unwrap();
        println!(
            "main row {r}: user_id code {code} -> {}",
            pre.dictionary.decode(b, code).unwrap()
        );
    }
    if !pre.dropped.is_empty() {
        println!("dropped: {:?}", pre.dropped);
    }
    Ok(())
}
