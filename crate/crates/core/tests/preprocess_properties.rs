use std::collections::{BTreeSet, HashMap, HashSet};

mod common;
use common::{random_symmetric, union_find_components};

use autosmart::data::{ColumnData, DatasetBundle, Table};
use autosmart::preprocess::{
    build_feature_blocks, categorical_columns, encode_blocks, time_order, BlockDictionary,
    OverlapMatrix,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn as_sets(b: &BlockDictionary) -> BTreeSet<BTreeSet<usize>> {
    b.blocks
        .values()
        .map(|v| v.iter().copied().collect())
        .collect()
}

#[test]
fn blocks_equal_union_find_on_200_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let adj = random_symmetric(&mut rng);
        let blocks = build_feature_blocks(&OverlapMatrix::from_rows(&adj));
        assert_eq!(as_sets(&blocks), union_find_components(&adj));
        // ids are 1..=b in first-visit order: each block starts at its smallest column
        let firsts: Vec<usize> = blocks.blocks.values().map(|v| v[0]).collect();
        assert!(firsts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            blocks.blocks.keys().copied().collect::<Vec<_>>(),
            (1..=blocks.blocks.len() as u32).collect::<Vec<_>>()
        );
    }
}

proptest! {
    #[test]
    fn blocks_partition_columns(seed in any::<u64>()) {
        let adj = random_symmetric(&mut ChaCha8Rng::seed_from_u64(seed));
        let blocks = build_feature_blocks(&OverlapMatrix::from_rows(&adj));
        let mut all: Vec<usize> = blocks.blocks.values().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..adj.len()).collect::<Vec<_>>());
    }

    #[test]
    fn encoding_is_consistent_within_blocks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let tok = |rng: &mut ChaCha8Rng| format!("v{}", rng.random_range(0..8));
        let cells: Vec<Vec<Option<String>>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_bool(0.9).then(|| tok(&mut rng))).collect())
            .collect();
        let lists: Vec<Option<Vec<String>>> = (0..n)
            .map(|_| rng.random_bool(0.9).then(|| (0..rng.random_range(1..4)).map(|_| tok(&mut rng)).collect()))
            .collect();
        let mut columns: Vec<ColumnData> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| ColumnData::categorical_raw(format!("c{i}"), c.iter().map(|v| v.as_deref())))
            .collect();
        columns.push(ColumnData::multi_categorical_raw("m", lists.clone()));
        let mut bundle = DatasetBundle {
            main: Table::new("main", columns).unwrap(),
            related: vec![],
            relations: vec![],
            labels: None,
            time_budget_s: 1.0,
            mem_budget_bytes: 1 << 20,
        };
        let refs = categorical_columns(&bundle);
        let adj = random_symmetric(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let mut full = vec![vec![false; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                full[i][j] = adj.get(i).and_then(|r| r.get(j)).copied().unwrap_or(i == j);
            }
        }
        let blocks = build_feature_blocks(&OverlapMatrix::from_rows(&full));
        let dict = encode_blocks(&mut bundle, &refs, &blocks);

        let mut seen: HashMap<(u32, String), u32> = HashMap::new();
        for (ci, col) in bundle.main.columns.iter().enumerate() {
            let b = col.block().unwrap();
            for r in 0..n {
                let pairs: Vec<(u32, String)> = if ci < 3 {
                    col.code(r).map(|c| (c, cells[ci][r].clone().unwrap())).into_iter().collect()
                } else {
                    col.list(r).zip(lists[r].clone().unwrap_or_default()).collect()
                };
                for (code, token) in pairs {
                    // bijection: decode returns the original token
                    prop_assert_eq!(dict.decode(b, code), Some(token.as_str()));
                    let prev = seen.insert((b, token.clone()), code);
                    prop_assert!(prev.is_none() || prev == Some(code));
                }
            }
            let distinct: HashSet<&String> = dict.blocks[&b].iter().collect();
            prop_assert_eq!(distinct.len(), dict.blocks[&b].len());
        }
    }

    #[test]
    fn time_order_is_a_stable_permutation(ts in proptest::collection::vec(proptest::option::weighted(0.9, 0i64..20), 0..60)) {
        let t = Table::new("t", vec![ColumnData::temporal("ts", ts.clone())]).unwrap();
        let order = time_order(&t);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..ts.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            let key = |r: usize| ts[r].unwrap_or(i64::MIN);
            prop_assert!(key(w[0]) < key(w[1]) || (key(w[0]) == key(w[1]) && w[0] < w[1]));
        }
    }
}
