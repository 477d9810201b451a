//! Seeded synthetic bundles whose label signal sits mostly in related tables.
//!
//! Main table `main` (one row per interaction) links to
//! `users` (M-1 on `user_id`), `items` (M-1 on `item_id`) and
//! `events` (M-M on `user_id`). The label is the top `positive_ratio`
//! fraction of a latent score built from `users.u_score`,
//! `items.i_quality` and the per-user mean of `events.e_amount`, plus a
//! weak main-table term and noise.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::data::{ColumnData, DatasetBundle, RelType, RelationSpec, Table};

const EPOCH0: i64 = 1_560_000_000;
const SPAN_S: i64 = 30 * 86_400;
const MISSING_RATE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    /// Rows of the main table before any train/test split.
    pub main_rows: usize,
    /// Number of related tables, 0..=3 (users, items, events in that order).
    pub related_tables: usize,
    /// Fraction of positive labels.
    pub positive_ratio: f64,
    /// Weight of the related-table terms in the latent score.
    pub signal_strength: f64,
    /// Distinct users; defaults to `main_rows / 4`.
    pub users: Option<usize>,
    /// Fraction of main rows (latest by time) held out as test rows by `gen-data`.
    pub test_fraction: f64,
    pub time_budget_s: f64,
    pub mem_budget_mb: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            main_rows: 10_000,
            related_tables: 3,
            positive_ratio: 0.2,
            signal_strength: 1.0,
            users: None,
            test_fraction: 0.2,
            time_budget_s: 300.0,
            mem_budget_mb: 4096,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidSpec(m.to_string()));
        if self.main_rows < 2 {
            return bad("main_rows must be at least 2");
        }
        if self.related_tables > 3 {
            return bad("related_tables must be at most 3");
        }
        if !(self.positive_ratio > 0.0 && self.positive_ratio < 1.0) {
            return bad("positive_ratio must be in (0, 1)");
        }
        if self.users == Some(0) {
            return bad("users must be positive");
        }
        if !(self.test_fraction >= 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must be in [0, 1)");
        }
        if !(self.time_budget_s > 0.0) || self.mem_budget_mb == 0 {
            return bad("budgets must be positive");
        }
        if !self.signal_strength.is_finite() {
            return bad("signal_strength must be finite");
        }
        Ok(())
    }
}

fn maybe<T>(rng: &mut ChaCha8Rng, v: T) -> Option<T> {
    (rng.random::<f64>() >= MISSING_RATE).then_some(v)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn tag_list(rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = rng.random_range(1..=6);
    (0..n)
        .map(|_| (10 + rng.random_range(0..50)).to_string())
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<DatasetBundle, IngestError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.main_rows;
    let n_users = spec.users.unwrap_or(n / 4).max(10);
    let n_items = (n / 50).max(10);
    let k = spec.related_tables;

    // per-entity latent effects
    let u_effect: Vec<f64> = (0..n_users).map(|_| normal(&mut rng)).collect();
    let i_effect: Vec<f64> = (0..n_items).map(|_| normal(&mut rng)).collect();
    let e_effect: Vec<f64> = (0..n_users).map(|_| normal(&mut rng)).collect();
    let sessions: Vec<Vec<usize>> = {
        let mut next = 0;
        (0..n_users)
            .map(|_| {
                let s = rng.random_range(1..=3);
                next += s;
                (next - s..next).collect()
            })
            .collect()
    };
    let user_token = |u: usize| (1_000_000 + u).to_string();
    let item_token = |i: usize| (2_000_000 + i).to_string();

    let mut user = Vec::with_capacity(n);
    let mut item = Vec::with_capacity(n);
    let mut session = Vec::with_capacity(n);
    let mut time = Vec::with_capacity(n);
    let mut m_num = Vec::with_capacity(n);
    let mut m_cat = Vec::with_capacity(n);
    let mut m_tag = Vec::with_capacity(n);
    let mut m_tags = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random_range(0..n_users);
        let i = rng.random_range(0..n_items);
        let s = *sessions[u].choose(&mut rng).unwrap();
        let x = normal(&mut rng);
        let mut z = 0.4 * x + normal(&mut rng);
        let related_terms = [u_effect[u], i_effect[i], e_effect[u]];
        z += spec.signal_strength * related_terms[..k].iter().sum::<f64>();
        user.push(Some(user_token(u)));
        item.push(Some(item_token(i)));
        session.push(Some((3_000_000 + s).to_string()));
        time.push(Some(EPOCH0 + rng.random_range(0..SPAN_S)));
        m_num.push(maybe(&mut rng, x));
        let cat = (500 + rng.random_range(0..20)).to_string();
        m_cat.push(maybe(&mut rng, cat));
        let tag = (10 + rng.random_range(0..50)).to_string();
        m_tag.push(maybe(&mut rng, tag));
        let tags = tag_list(&mut rng);
        m_tags.push(maybe(&mut rng, tags));
        latent.push(z);
    }

    let n_pos = ((spec.positive_ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| latent[b].total_cmp(&latent[a]).then(a.cmp(&b)));
    let mut labels = vec![0u8; n];
    for &r in &order[..n_pos] {
        labels[r] = 1;
    }

    let main = Table::new(
        "main",
        vec![
            ColumnData::categorical_raw("user_id", user),
            ColumnData::categorical_raw("item_id", item),
            ColumnData::categorical_raw("session_id", session),
            ColumnData::temporal("t", time),
            ColumnData::numerical("m_num", m_num),
            ColumnData::categorical_raw("m_cat", m_cat),
            ColumnData::categorical_raw("m_tag", m_tag),
            ColumnData::multi_categorical_raw("m_tags", m_tags),
        ],
    )?;

    let mut related = Vec::new();
    let mut relations = Vec::new();
    if k >= 1 {
        let ids: Vec<_> = (0..n_users).map(|u| Some(user_token(u))).collect();
        let score: Vec<_> = u_effect.iter().map(|&e| Some(2.0 * e + 5.0)).collect();
        let group: Vec<_> = (0..n_users)
            .map(|_| Some(rng.random_range(0..20).to_string()))
            .collect();
        related.push(Table::new(
            "users",
            vec![
                ColumnData::categorical_raw("user_id", ids),
                ColumnData::numerical("u_score", score),
                ColumnData::categorical_raw("u_group", group),
            ],
        )?);
        relations.push(RelationSpec {
            left_table: "main".into(),
            right_table: "users".into(),
            left_key: "user_id".into(),
            right_key: "user_id".into(),
            rel_type: RelType::ManyToOne,
        });
    }
    if k >= 2 {
        let ids: Vec<_> = (0..n_items).map(|i| Some(item_token(i))).collect();
        let quality: Vec<_> = i_effect.iter().map(|&e| maybe(&mut rng, e)).collect();
        let tags: Vec<_> = (0..n_items).map(|_| Some(tag_list(&mut rng))).collect();
        related.push(Table::new(
            "items",
            vec![
                ColumnData::categorical_raw("item_id", ids),
                ColumnData::numerical("i_quality", quality),
                ColumnData::multi_categorical_raw("i_tags", tags),
            ],
        )?);
        relations.push(RelationSpec {
            left_table: "main".into(),
            right_table: "items".into(),
            left_key: "item_id".into(),
            right_key: "item_id".into(),
            rel_type: RelType::ManyToOne,
        });
    }
    if k >= 3 {
        let (mut ids, mut times, mut amounts, mut types) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (u, &e) in e_effect.iter().enumerate() {
            for _ in 0..rng.random_range(2..=8) {
                ids.push(Some(user_token(u)));
                times.push(Some(EPOCH0 + rng.random_range(0..SPAN_S)));
                let a = e + 0.5 * normal(&mut rng);
                amounts.push(maybe(&mut rng, a));
                types.push(Some(rng.random_range(1..=8).to_string()));
            }
        }
        related.push(Table::new(
            "events",
            vec![
                ColumnData::categorical_raw("user_id", ids),
                ColumnData::temporal("e_time", times),
                ColumnData::numerical("e_amount", amounts),
                ColumnData::categorical_raw("e_type", types),
            ],
        )?);
        relations.push(RelationSpec {
            left_table: "main".into(),
            right_table: "events".into(),
            left_key: "user_id".into(),
            right_key: "user_id".into(),
            rel_type: RelType::ManyToMany,
        });
    }

    Ok(DatasetBundle {
        main,
        related,
        relations,
        labels: Some(labels),
        time_budget_s: spec.time_budget_s,
        mem_budget_bytes: spec.mem_budget_mb << 20,
    })
}

/// Split the main table by its first temporal column: the latest
/// `test_fraction` of rows become the test bundle. Related tables are shared.
pub fn split_train_test(
    bundle: &DatasetBundle,
    test_fraction: f64,
) -> (DatasetBundle, DatasetBundle) {
    let n = bundle.main.n_rows;
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(tcol) = bundle
        .main
        .columns
        .iter()
        .find(|c| c.kind() == crate::data::FeatureKind::Temporal)
    {
        order.sort_by_key(|&r| (tcol.timestamp(r).unwrap_or(i64::MIN), r));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).min(n);
    let (train_rows, test_rows) = order.split_at(n - n_test);
    let part = |rows: &[usize]| DatasetBundle {
        main: bundle.main.take_rows(rows),
        related: bundle.related.clone(),
        relations: bundle.relations.clone(),
        labels: bundle
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect()),
        time_budget_s: bundle.time_budget_s,
        mem_budget_bytes: bundle.mem_budget_bytes,
    };
    (part(train_rows), part(test_rows))
}

/// Repeat every main-table row (and label) `factor` times, block by block.
pub fn replicate_rows(bundle: &DatasetBundle, factor: usize) -> DatasetBundle {
    let n = bundle.main.n_rows;
    let rows: Vec<usize> = (0..factor).flat_map(|_| 0..n).collect();
    DatasetBundle {
        main: bundle.main.take_rows(&rows),
        labels: bundle
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect()),
        ..bundle.clone()
    }
}
