//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use autosmart::data::{ColumnData, DatasetBundle, RelType, RelationSpec, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn union_find_components(adj: &[Vec<bool>]) -> BTreeSet<BTreeSet<usize>> {
    let n = adj.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..n {
        for j in 0..n {
            if adj[i][j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().insert(i);
    }
    groups.into_values().collect()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let n = rng.random_range(1..=12);
    let p = rng.random_range(0.0..0.5);
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        adj[i][i] = true;
        for j in i + 1..n {
            let e = rng.random_bool(p);
            adj[i][j] = e;
            adj[j][i] = e;
        }
    }
    adj
}

/// P(score+ > score-) + P(tie)/2 over every positive/negative pair.
pub fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Root split chosen by brute force over every (feature, threshold between
/// consecutive distinct values). Ties keep the earliest feature/threshold.
pub fn exact_greedy(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    mcw: f64,
) -> Option<(usize, f64, f64)> {
    let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
    let mut best: Option<(usize, f64, f64)> = None;
    for (f, col) in x.iter().enumerate() {
        let mut distinct = col.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        for &t in &distinct[..distinct.len().saturating_sub(1)] {
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..col.len() {
                if col[i] <= t {
                    gl += g[i];
                    hl += h[i];
                }
            }
            if hl < mcw || ht - hl < mcw {
                continue;
            }
            let gain = 0.5
                * (gl * gl / (hl + lambda) + (gt - gl).powi(2) / (ht - hl + lambda)
                    - gt * gt / (ht + lambda));
            if gain > best.map_or(0.0, |b| b.2) {
                best = Some((f, t, gain));
            }
        }
    }
    best
}

pub fn random_dataset(
    seed: u64,
    n: usize,
    n_features: usize,
    max_distinct: u32,
) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n_features)
        .map(|_| {
            (0..n)
                .map(|_| rng.random_range(0..max_distinct) as f64 * 0.37)
                .collect()
        })
        .collect();
    let y = (0..n)
        .map(|i| {
            let s = x[0][i] - 0.5 * x[1 % n_features][i] + rng.random_range(-20.0..20.0);
            (s > 10.0) as u8
        })
        .collect();
    (x, y)
}

pub fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("f{i}")).collect()
}

/// Weighted logloss of one row as a function of its raw score.
pub fn row_loss(y: f64, raw: f64, w: f64) -> f64 {
    let p = 1.0 / (1.0 + (-raw).exp());
    -w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub fn rel(right: &str, t: RelType) -> RelationSpec {
    RelationSpec {
        left_table: "main".into(),
        right_table: right.into(),
        left_key: "c_01".into(),
        right_key: "c_01".into(),
        rel_type: t,
    }
}

pub fn keys(name: &str, cells: &[&str]) -> ColumnData {
    ColumnData::categorical_raw(name, cells.iter().map(|c| Some(*c)))
}

/// The four-row main table plus a one-to-one table and a
/// one-to-many table, both keyed on `c_01`.
pub fn worked_bundle() -> DatasetBundle {
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
    DatasetBundle {
        main,
        related: vec![one, many],
        relations: vec![
            rel("one", RelType::ManyToOne),
            rel("many", RelType::OneToMany),
        ],
        labels: None,
        time_budget_s: 1.0,
        mem_budget_bytes: 1 << 20,
    }
}
