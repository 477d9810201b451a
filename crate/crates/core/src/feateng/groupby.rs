//! Dense group-by kernels over code columns.

use std::collections::HashMap;

use crate::data::{ColumnData, ColumnValues, Encoding};

pub(crate) const NO_GROUP: u32 = u32::MAX;

/// Row → dense group id; `NO_GROUP` marks rows with a missing key.
#[derive(Debug, Clone)]
pub(crate) struct Groups {
    pub ids: Vec<u32>,
    pub n: usize,
}

impl Groups {
    /// Groups by the code of a categorical column, ids in first-occurrence order.
    pub fn from_categorical(col: &ColumnData) -> Groups {
        let n_rows = col.len();
        let mut remap: Vec<u32> = Vec::new();
        let mut ids = Vec::with_capacity(n_rows);
        let mut n = 0u32;
        for row in 0..n_rows {
            match col.code(row) {
                Some(c) => {
                    let c = c as usize;
                    if c >= remap.len() {
                        remap.resize(c + 1, NO_GROUP);
                    }
                    if remap[c] == NO_GROUP {
                        remap[c] = n;
                        n += 1;
                    }
                    ids.push(remap[c]);
                }
                None => ids.push(NO_GROUP),
            }
        }
        Groups { ids, n: n as usize }
    }

    /// Pairs every row's group with `other`; missing on either side stays missing.
    pub fn cross(&self, other: &[u32]) -> Groups {
        Groups::compose(self.ids.iter().zip(other).map(|(&a, &b)| {
            (a != NO_GROUP && b != NO_GROUP).then_some(((a as u64) << 32) | b as u64)
        }))
    }

    fn compose<I: Iterator<Item = Option<u64>>>(keys: I) -> Groups {
        let mut map: HashMap<u64, u32> = HashMap::new();
        let ids = keys
            .map(|k| match k {
                Some(k) => {
                    let next = map.len() as u32;
                    *map.entry(k).or_insert(next)
                }
                None => NO_GROUP,
            })
            .collect();
        Groups { ids, n: map.len() }
    }

    pub fn sizes(&self) -> Vec<u32> {
        let mut s = vec![0u32; self.n];
        for &g in &self.ids {
            if g != NO_GROUP {
                s[g as usize] += 1;
            }
        }
        s
    }

    /// Per-group values back onto rows; rows without a group become NaN.
    pub fn broadcast(&self, per_group: &[f64]) -> Vec<f64> {
        self.ids
            .iter()
            .map(|&g| {
                if g == NO_GROUP {
                    f64::NAN
                } else {
                    per_group[g as usize]
                }
            })
            .collect()
    }
}

pub(crate) fn count_by(g: &Groups) -> Vec<f64> {
    let sizes: Vec<f64> = g.sizes().into_iter().map(f64::from).collect();
    g.broadcast(&sizes)
}

/// Distinct non-missing `t` values per group of `g`.
pub(crate) fn nunique_by(g: &Groups, t: &Groups) -> Vec<f64> {
    let mut pairs: Vec<u64> = g
        .ids
        .iter()
        .zip(&t.ids)
        .filter(|(&a, &b)| a != NO_GROUP && b != NO_GROUP)
        .map(|(&a, &b)| ((a as u64) << 32) | b as u64)
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut counts = vec![0f64; g.n];
    for p in pairs {
        counts[(p >> 32) as usize] += 1.0;
    }
    g.broadcast(&counts)
}

/// Population mean and standard deviation of `x` (NaN = missing) per group.
pub(crate) fn mean_std_by(g: &Groups, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut n = vec![0f64; g.n];
    let mut sum = vec![0f64; g.n];
    for (&gid, &v) in g.ids.iter().zip(x) {
        if gid != NO_GROUP && !v.is_nan() {
            n[gid as usize] += 1.0;
            sum[gid as usize] += v;
        }
    }
    let mean: Vec<f64> = sum
        .iter()
        .zip(&n)
        .map(|(s, &c)| if c > 0.0 { s / c } else { f64::NAN })
        .collect();
    let mut ss = vec![0f64; g.n];
    for (&gid, &v) in g.ids.iter().zip(x) {
        if gid != NO_GROUP && !v.is_nan() {
            let d = v - mean[gid as usize];
            ss[gid as usize] += d * d;
        }
    }
    let std: Vec<f64> = ss
        .iter()
        .zip(&n)
        .map(|(s, &c)| if c > 0.0 { (s / c).sqrt() } else { f64::NAN })
        .collect();
    (g.broadcast(&mean), g.broadcast(&std))
}

/// Quantile bin (0..n_bins) per row; missing rows get `NO_GROUP`.
pub(crate) fn quantile_bins(x: &[f64], n_bins: usize) -> Vec<u32> {
    let mut sorted: Vec<f64> = x.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..n_bins)
        .filter_map(|q| sorted.get(q * sorted.len() / n_bins).copied())
        .collect();
    edges.dedup();
    x.iter()
        .map(|&v| {
            if v.is_nan() {
                NO_GROUP
            } else {
                edges.partition_point(|&e| e <= v) as u32
            }
        })
        .collect()
}

/// Numeric reading of any column for modelling: codes as numbers,
/// multi-categorical cells as their mean code, timestamps as seconds.
pub fn numeric_view(col: &ColumnData) -> Vec<f64> {
    let n = col.len();
    match &col.values {
        ColumnValues::Numerical(v) => (0..n)
            .map(|r| if col.missing[r] { f64::NAN } else { v.get(r) })
            .collect(),
        ColumnValues::Temporal(t) => (0..n)
            .map(|r| {
                if col.missing[r] {
                    f64::NAN
                } else {
                    t[r] as f64
                }
            })
            .collect(),
        ColumnValues::Categorical { codes, .. } => (0..n)
            .map(|r| {
                if col.missing[r] {
                    f64::NAN
                } else {
                    codes.get(r) as f64
                }
            })
            .collect(),
        ColumnValues::MultiCategorical {
            values, offsets, ..
        } => (0..n)
            .map(|r| {
                let (a, b) = (offsets[r] as usize, offsets[r + 1] as usize);
                if a == b {
                    f64::NAN
                } else {
                    (a..b).map(|k| values.get(k) as f64).sum::<f64>() / (b - a) as f64
                }
            })
            .collect(),
    }
}

/// Whether two categorical columns' codes are directly comparable.
pub(crate) fn same_code_space(a: &ColumnData, b: &ColumnData) -> bool {
    match (a.encoding(), b.encoding()) {
        (Some(Encoding::Block(x)), Some(Encoding::Block(y))) => x == y,
        (Some(Encoding::Raw(x)), Some(Encoding::Raw(y))) => x == y,
        _ => false,
    }
}
