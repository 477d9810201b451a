//! Collapse related tables into the main table.
//!
//! 1-1 and M-1 links copy the matching related row's columns (an outer
//! join). 1-M and M-M links aggregate all matching related rows per key:
//! mean for numbers, mode for categories (smallest code on ties), mode of the
//! flattened elements for multi-categorical cells and the latest time for
//! temporal columns.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use bitvec::prelude::*;
use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{
    Codes, ColumnData, ColumnValues, DataError, DatasetBundle, Encoding, FeatureKind, Numbers,
    RelationSpec, Table,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MergeError {
    #[error("relations form a cycle through table `{0}`")]
    CyclicRelationGraph(String),
    #[error("key `{table}.{key}` is not unique on the right side of a join")]
    DuplicateRightKey { table: String, key: String },
    #[error("key columns `{left}` and `{right}` do not share an encoding")]
    KeyEncodingMismatch { left: String, right: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    /// Copy the single matching value.
    Copy,
    Mean,
    Mode,
    /// Mode of the flattened element codes.
    FlatMode,
    Latest,
}

impl Recipe {
    pub fn for_kind(kind: FeatureKind, join: bool) -> Recipe {
        match (join, kind) {
            (true, _) => Recipe::Copy,
            (false, FeatureKind::Numerical) => Recipe::Mean,
            (false, FeatureKind::Categorical) => Recipe::Mode,
            (false, FeatureKind::MultiCategorical) => Recipe::FlatMode,
            (false, FeatureKind::Temporal) => Recipe::Latest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    /// Oriented so that `left_table` is the parent that receives columns.
    pub relation: RelationSpec,
    /// Recipe per non-key column of the child as declared; columns the child
    /// gains from its own children are dispatched by kind the same way.
    pub recipes: Vec<(String, Recipe)>,
}

/// Steps in execution order: deeper tables merge into their parents first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergePlan {
    pub steps: Vec<MergeStep>,
}

/// Orient every relation away from the main table and order the steps
/// leaves-first. Relations not connected to the main table are skipped.
pub fn plan_merge(bundle: &DatasetBundle) -> Result<MergePlan, MergeError> {
    let names: Vec<&str> = bundle.tables().map(|t| t.name.as_str()).collect();
    let rels = &bundle.relations;
    for r in rels {
        for t in [&r.left_table, &r.right_table] {
            if !names.contains(&t.as_str()) {
                return Err(DataError::MissingTable(t.clone()).into());
            }
        }
        if r.left_table == r.right_table {
            return Err(MergeError::CyclicRelationGraph(r.left_table.clone()));
        }
    }

    let mut depth: HashMap<&str, usize> = HashMap::new();
    let mut used = vec![false; rels.len()];
    let mut oriented: Vec<(usize, RelationSpec)> = Vec::new();
    // every component is searched so that cycles anywhere are reported
    for root in &names {
        if depth.contains_key(root) {
            continue;
        }
        let in_main = *root == bundle.main.name;
        depth.insert(root, 0);
        let mut queue = VecDeque::from([*root]);
        while let Some(u) = queue.pop_front() {
            for (i, r) in rels.iter().enumerate() {
                if used[i] || (r.left_table != u && r.right_table != u) {
                    continue;
                }
                used[i] = true;
                let rel = if r.left_table == u {
                    r.clone()
                } else {
                    r.flipped()
                };
                let v = names
                    .iter()
                    .find(|n| **n == rel.right_table)
                    .copied()
                    .expect("checked above");
                if depth.contains_key(v) {
                    return Err(MergeError::CyclicRelationGraph(v.to_string()));
                }
                let d = depth[u] + 1;
                depth.insert(v, d);
                queue.push_back(v);
                if in_main {
                    oriented.push((d, rel));
                } else {
                    warn!(
                        "relation {} - {} is not connected to the main table",
                        r.left_table, r.right_table
                    );
                }
            }
        }
    }

    // stable sort keeps discovery order among equal depths
    oriented.sort_by_key(|o| std::cmp::Reverse(o.0));
    let steps = oriented
        .into_iter()
        .map(|(_, rel)| {
            let child = bundle.table(&rel.right_table).expect("checked above");
            let join = rel.rel_type.is_join();
            let recipes = child
                .columns
                .iter()
                .filter(|c| c.name != rel.right_key)
                .map(|c| (c.name.clone(), Recipe::for_kind(c.kind(), join)))
                .collect();
            MergeStep {
                relation: rel,
                recipes,
            }
        })
        .collect();
    Ok(MergePlan { steps })
}

/// Dense group ids over right-key values (first-occurrence order) and the
/// group of each left row.
struct KeyGroups {
    left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
    n_groups: usize,
}

fn assign_groups<K: Hash + Eq>(
    right: impl Iterator<Item = Option<K>>,
    left: impl Iterator<Item = Option<K>>,
) -> KeyGroups {
    let mut ids: HashMap<K, usize> = HashMap::new();
    let right: Vec<Option<usize>> = right
        .map(|k| {
            k.map(|k| {
                let n = ids.len();
                *ids.entry(k).or_insert(n)
            })
        })
        .collect();
    let left = left.map(|k| k.and_then(|k| ids.get(&k).copied())).collect();
    KeyGroups {
        left,
        right,
        n_groups: ids.len(),
    }
}

fn key_groups(lcol: &ColumnData, rcol: &ColumnData) -> Result<KeyGroups, MergeError> {
    let (nl, nr) = (lcol.len(), rcol.len());
    match (lcol.encoding(), rcol.encoding()) {
        (Some(Encoding::Block(a)), Some(Encoding::Block(b))) if a == b => Ok(assign_groups(
            (0..nr).map(|r| rcol.code(r)),
            (0..nl).map(|r| lcol.code(r)),
        )),
        (Some(Encoding::Raw(_)), Some(Encoding::Raw(_))) => Ok(assign_groups(
            (0..nr).map(|r| rcol.token(r)),
            (0..nl).map(|r| lcol.token(r)),
        )),
        _ => Err(MergeError::KeyEncodingMismatch {
            left: lcol.name.clone(),
            right: rcol.name.clone(),
        }),
    }
}

fn key_columns<'a>(
    left: &'a Table,
    right: &'a Table,
    rel: &RelationSpec,
) -> Result<(&'a ColumnData, &'a ColumnData), MergeError> {
    let missing = |t: &Table, c: &str| DataError::MissingColumn {
        table: t.name.clone(),
        column: c.to_string(),
    };
    let l = left
        .column(&rel.left_key)
        .ok_or_else(|| missing(left, &rel.left_key))?;
    let r = right
        .column(&rel.right_key)
        .ok_or_else(|| missing(right, &rel.right_key))?;
    Ok((l, r))
}

fn gained_name(parent: &Table, child: &Table, rel: &RelationSpec, column: &str) -> String {
    let plain = format!("{}.{}", child.name, column);
    if parent.column(&plain).is_none() {
        plain
    } else {
        format!("{}[{}].{}", child.name, rel.left_key, column)
    }
}

fn append(mut parent: Table, gained: Vec<ColumnData>) -> Result<Table, MergeError> {
    parent.columns.extend(gained);
    parent.check()?;
    Ok(parent)
}

/// Outer join on a unique right key.
pub fn merge_join(main: Table, related: &Table, rel: &RelationSpec) -> Result<Table, MergeError> {
    let (lcol, rcol) = key_columns(&main, related, rel)?;
    let groups = key_groups(lcol, rcol)?;
    let n_keyed = groups.right.iter().flatten().count();
    if n_keyed != groups.n_groups {
        return Err(MergeError::DuplicateRightKey {
            table: related.name.clone(),
            key: rel.right_key.clone(),
        });
    }
    let mut row_of_group = vec![0usize; groups.n_groups];
    for (r, g) in groups.right.iter().enumerate() {
        if let Some(g) = g {
            row_of_group[*g] = r;
        }
    }
    let rows: Vec<Option<usize>> = groups
        .left
        .iter()
        .map(|g| g.map(|g| row_of_group[g]))
        .collect();
    let gained: Vec<ColumnData> = related
        .columns
        .par_iter()
        .filter(|c| c.name != rel.right_key)
        .map(|c| {
            let mut out = c.take_optional(&rows);
            out.name = gained_name(&main, related, rel, &c.name);
            out
        })
        .collect();
    append(main, gained)
}

/// Per-group mode over `(group, code)` pairs; ties go to the smallest code.
fn group_mode(mut pairs: Vec<(usize, u32)>, n_groups: usize) -> (Vec<u32>, BitVec) {
    pairs.sort_unstable();
    let mut codes = vec![0u32; n_groups];
    let mut missing = bitvec![1; n_groups];
    let mut i = 0;
    while i < pairs.len() {
        let g = pairs[i].0;
        let (mut best, mut best_n) = (0u32, 0usize);
        while i < pairs.len() && pairs[i].0 == g {
            let c = pairs[i].1;
            let start = i;
            while i < pairs.len() && pairs[i] == (g, c) {
                i += 1;
            }
            if i - start > best_n {
                best = c;
                best_n = i - start;
            }
        }
        codes[g] = best;
        missing.set(g, false);
    }
    (codes, missing)
}

fn aggregate_column(col: &ColumnData, groups: &[Option<usize>], n_groups: usize) -> ColumnData {
    let name = col.name.clone();
    match &col.values {
        ColumnValues::Numerical(_) => {
            // Neumaier-compensated sums keep the mean independent of row order
            let mut sum = vec![0.0f64; n_groups];
            let mut comp = vec![0.0f64; n_groups];
            let mut count = vec![0usize; n_groups];
            for (r, g) in groups.iter().enumerate() {
                let (Some(g), Some(v)) = (*g, col.number(r)) else {
                    continue;
                };
                let t = sum[g] + v;
                comp[g] += if sum[g].abs() >= v.abs() {
                    (sum[g] - t) + v
                } else {
                    (v - t) + sum[g]
                };
                sum[g] = t;
                count[g] += 1;
            }
            let missing: BitVec = count.iter().map(|&c| c == 0).collect();
            let means = (0..n_groups)
                .map(|g| {
                    if count[g] == 0 {
                        0.0
                    } else {
                        (sum[g] + comp[g]) / count[g] as f64
                    }
                })
                .collect();
            ColumnData {
                name,
                values: ColumnValues::Numerical(Numbers::F64(means)),
                missing,
            }
        }
        ColumnValues::Categorical { encoding, .. } => {
            let pairs = groups
                .iter()
                .enumerate()
                .filter_map(|(r, g)| Some(((*g)?, col.code(r)?)))
                .collect();
            let (codes, missing) = group_mode(pairs, n_groups);
            ColumnData {
                name,
                values: ColumnValues::Categorical {
                    codes: Codes::U32(codes),
                    encoding: encoding.clone(),
                },
                missing,
            }
        }
        ColumnValues::MultiCategorical { encoding, .. } => {
            let pairs = groups
                .iter()
                .enumerate()
                .filter_map(|(r, g)| g.map(|g| (r, g)))
                .flat_map(|(r, g)| col.list(r).map(move |c| (g, c)))
                .collect();
            let (codes, missing) = group_mode(pairs, n_groups);
            ColumnData {
                name,
                values: ColumnValues::Categorical {
                    codes: Codes::U32(codes),
                    encoding: encoding.clone(),
                },
                missing,
            }
        }
        ColumnValues::Temporal(_) => {
            let mut latest: Vec<Option<i64>> = vec![None; n_groups];
            for (r, g) in groups.iter().enumerate() {
                if let (Some(g), Some(t)) = (*g, col.timestamp(r)) {
                    latest[g] = Some(latest[g].map_or(t, |m| m.max(t)));
                }
            }
            ColumnData::temporal(name, latest)
        }
    }
}

/// Aggregate all related rows sharing each key and attach the result to
/// every main row with that key.
pub fn merge_aggregate(
    main: Table,
    related: &Table,
    rel: &RelationSpec,
) -> Result<Table, MergeError> {
    let (lcol, rcol) = key_columns(&main, related, rel)?;
    let groups = key_groups(lcol, rcol)?;
    let gained: Vec<ColumnData> = related
        .columns
        .par_iter()
        .filter(|c| c.name != rel.right_key)
        .map(|c| {
            let per_group = aggregate_column(c, &groups.right, groups.n_groups);
            let mut out = per_group.take_optional(&groups.left);
            out.name = gained_name(&main, related, rel, &c.name);
            out
        })
        .collect();
    append(main, gained)
}

/// Execute `plan`; returns the main table with every gained column. A join
/// whose right key turns out not to be unique is demoted to aggregation.
pub fn merge_all(bundle: &DatasetBundle, plan: &MergePlan) -> Result<Table, MergeError> {
    let mut tables: HashMap<String, Table> = bundle
        .tables()
        .map(|t| (t.name.clone(), t.clone()))
        .collect();
    for step in &plan.steps {
        let rel = &step.relation;
        let child = tables
            .remove(&rel.right_table)
            .ok_or_else(|| DataError::MissingTable(rel.right_table.clone()))?;
        let parent = tables
            .remove(&rel.left_table)
            .ok_or_else(|| DataError::MissingTable(rel.left_table.clone()))?;
        let merged = if rel.rel_type.is_join() {
            match merge_join(parent.clone(), &child, rel) {
                Err(MergeError::DuplicateRightKey { table, key }) => {
                    warn!(
                        "`{table}.{key}` repeats under a {} relation; aggregating instead",
                        rel.rel_type.as_str()
                    );
                    merge_aggregate(parent, &child, rel)?
                }
                other => other?,
            }
        } else {
            merge_aggregate(parent, &child, rel)?
        };
        tables.insert(rel.left_table.clone(), merged);
    }
    tables
        .remove(&bundle.main.name)
        .ok_or_else(|| DataError::MissingTable(bundle.main.name.clone()).into())
}
