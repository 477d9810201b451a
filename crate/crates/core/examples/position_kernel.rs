//! Position of a categorical value inside a multi-categorical list on the
//! same row, timed on a million rows.
//!
//!     cargo run --release --example position_kernel -- [rows]

use std::time::Instant;

use autosmart::data::ColumnData;
use autosmart::feateng::position_lookup;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(1_000_000);

    let cat = ColumnData::categorical_raw("item", [Some("2137"), Some("9"), None]);
    let list = ColumnData::multi_categorical_raw(
        "recent",
        [
            Some(vec!["134", "2137", "576", "816"]),
            Some(vec!["1", "2"]),
            Some(vec!["3"]),
        ],
    );
    println!("{:?}", position_lookup(&cat, &list));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let codes: Vec<u32> = (0..rows).map(|_| rng.random_range(0..10_000)).collect();
    let mut values = Vec::new();
    let mut offsets = vec![0u32];
    for &c in &codes {
        for _ in 0..rng.random_range(1..=7) {
            values.push(if rng.random_bool(0.1) {
                c
            } else {
                rng.random_range(0..10_000)
            });
        }
        offsets.push(values.len() as u32);
    }
    let cat =
        ColumnData::categorical_encoded("item", codes, bitvec::vec::BitVec::repeat(false, rows), 1);
    let list = ColumnData::multi_categorical_encoded("recent", values, offsets, 1);
    let start = Instant::now();
    let pos = position_lookup(&cat, &list);
    let hits = pos.iter().filter(|&&p| p > 0.0).count();
    println!(
        "{rows} rows in {:.3}s, {hits} found",
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
