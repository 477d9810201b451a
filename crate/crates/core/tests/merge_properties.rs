use std::collections::BTreeMap;

use autosmart::data::{ColumnData, RelType, Table};
use autosmart::merge::{merge_aggregate, merge_all, merge_join, plan_merge};
use proptest::prelude::*;

mod common;
use common::{keys, rel, worked_bundle};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn worked_join_and_mean() {
    let main = Table::new(
        "main",
        vec![keys("c_01", &["14011", "14012", "14011", "14013"])],
    )
    .unwrap();
    let one = Table::new(
        "one",
        vec![
            keys("c_01", &["14012", "14011"]),
            ColumnData::numerical("f_1", [Some(1.2), Some(3.6)]),
        ],
    )
    .unwrap();
    let many = Table::new(
        "many",
        vec![
            keys("c_01", &["14011", "14012", "14011"]),
            ColumnData::numerical("f_2", [Some(2.4), Some(0.5), Some(2.2)]),
        ],
    )
    .unwrap();
    let joined = merge_join(main.clone(), &one, &rel("one", RelType::ManyToOne)).unwrap();
    assert_eq!(joined.column("one.f_1").unwrap().number(0), Some(3.6));
    let agg = merge_aggregate(main.clone(), &many, &rel("many", RelType::OneToMany)).unwrap();
    assert!((agg.column("many.f_2").unwrap().number(0).unwrap() - 2.3).abs() <= 1e-12);

    let bundle = worked_bundle();
    let out = merge_all(&bundle, &plan_merge(&bundle).unwrap()).unwrap();
    assert_eq!(out.n_rows, 4);
    for row in [0, 2] {
        assert_eq!(out.column("one.f_1").unwrap().number(row), Some(3.6));
        assert!((out.column("many.f_2").unwrap().number(row).unwrap() - 2.3).abs() <= 1e-12);
    }
    assert!(out.column("many.f_2").unwrap().is_missing(3));
}

fn random_related(
    rng: &mut ChaCha8Rng,
    n: usize,
) -> (
    Vec<String>,
    Vec<Option<f64>>,
    Vec<Option<String>>,
    Vec<Option<i64>>,
) {
    let k: Vec<String> = (0..n)
        .map(|_| format!("k{}", rng.random_range(0..30)))
        .collect();
    let x = (0..n)
        .map(|_| rng.random_bool(0.85).then(|| rng.random_range(-5.0..5.0)))
        .collect();
    let c = (0..n)
        .map(|_| {
            rng.random_bool(0.9)
                .then(|| format!("c{}", rng.random_range(0..4)))
        })
        .collect();
    let t = (0..n)
        .map(|_| rng.random_bool(0.9).then(|| rng.random_range(0..1000)))
        .collect();
    (k, x, c, t)
}

fn related_table(
    k: &[String],
    x: &[Option<f64>],
    c: &[Option<String>],
    t: &[Option<i64>],
) -> Table {
    Table::new(
        "r",
        vec![
            ColumnData::categorical_raw("c_01", k.iter().map(|s| Some(s.as_str()))),
            ColumnData::numerical("x", x.iter().copied()),
            ColumnData::categorical_raw("c", c.iter().map(|s| s.as_deref())),
            ColumnData::temporal("t", t.iter().copied()),
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_matches_group_by_oracle(seed in any::<u64>(), n in 1usize..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, x, c, t) = random_related(&mut rng, n);
        let main_keys: Vec<String> = (0..40).map(|i| format!("k{i}")).collect();
        let main = Table::new("main", vec![ColumnData::categorical_raw("c_01", main_keys.iter().map(|s| Some(s.as_str())))]).unwrap();
        let r = related_table(&k, &x, &c, &t);
        let out = merge_aggregate(main, &r, &rel("r", RelType::OneToMany)).unwrap();
        prop_assert_eq!(out.n_rows, 40);

        // first-occurrence order of category tokens defines their codes
        let mut code_of: BTreeMap<String, usize> = BTreeMap::new();
        for tok in c.iter().flatten() {
            let len = code_of.len();
            code_of.entry(tok.clone()).or_insert(len);
        }
        for (row, key) in main_keys.iter().enumerate() {
            let idx: Vec<usize> = (0..n).filter(|&i| &k[i] == key).collect();
            let xs: Vec<f64> = idx.iter().filter_map(|&i| x[i]).collect();
            let got = out.column("r.x").unwrap().number(row);
            if xs.is_empty() {
                prop_assert_eq!(got, None);
            } else {
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                prop_assert!((got.unwrap() - mean).abs() <= 1e-9 * mean.abs().max(1.0));
            }
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &i in &idx {
                if let Some(tok) = &c[i] {
                    *counts.entry(code_of[tok]).or_default() += 1;
                }
            }
            let best = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(code, _)| *code);
            let got = out.column("r.c").unwrap().token(row).map(|t| code_of[t]);
            prop_assert_eq!(got, best);
            let latest = idx.iter().filter_map(|&i| t[i]).max();
            prop_assert_eq!(out.column("r.t").unwrap().timestamp(row), latest);
        }
    }

    #[test]
    fn mean_is_order_invariant(seed in any::<u64>(), n in 1usize..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k, x, c, t) = random_related(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let shuffled = |v: &[Option<f64>]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let main_keys: Vec<String> = (0..30).map(|i| format!("k{i}")).collect();
        let main = Table::new("main", vec![ColumnData::categorical_raw("c_01", main_keys.iter().map(|s| Some(s.as_str())))]).unwrap();
        let a = merge_aggregate(main.clone(), &related_table(&k, &x, &c, &t), &rel("r", RelType::ManyToMany)).unwrap();
        let k2: Vec<String> = perm.iter().map(|&i| k[i].clone()).collect();
        let c2: Vec<Option<String>> = perm.iter().map(|&i| c[i].clone()).collect();
        let t2: Vec<Option<i64>> = perm.iter().map(|&i| t[i]).collect();
        let b = merge_aggregate(main, &related_table(&k2, &shuffled(&x), &c2, &t2), &rel("r", RelType::ManyToMany)).unwrap();
        for row in 0..30 {
            let (va, vb) = (a.column("r.x").unwrap().number(row), b.column("r.x").unwrap().number(row));
            prop_assert_eq!(va.is_some(), vb.is_some());
            if let (Some(va), Some(vb)) = (va, vb) {
                prop_assert!((va - vb).abs() <= 1e-12);
            }
        }
    }
}
