//! Base-feature detection, low-information pruning, feature blocks with a
//! shared encoding per block, downcasting and time sorting.

use std::collections::{BTreeMap, HashMap, HashSet};

use bitvec::prelude::*;
use log::debug;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{
    BaseFeatureMap, Codes, ColumnData, ColumnValues, DatasetBundle, Encoding, FeatureKind, Table,
};

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.10;
const SESSION_SAMPLE_ROWS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("no relation links the main table, so there is no key column")]
    NoKeyFound,
}

/// A column addressed by table and column name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl std::fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

/// Does every value of `s` co-occur with a single value of `factor` over `rows`?
fn functionally_dependent(
    s: &ColumnData,
    factor: &ColumnData,
    rows: impl Iterator<Item = usize>,
) -> bool {
    let mut owner: HashMap<u32, u32> = HashMap::new();
    for r in rows {
        let (Some(sv), Some(fv)) = (s.code(r), factor.code(r)) else {
            continue;
        };
        if *owner.entry(sv).or_insert(fv) != fv {
            return false;
        }
    }
    true
}

pub fn detect_base_features(bundle: &DatasetBundle) -> Result<BaseFeatureMap, PreprocessError> {
    let mut keys: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for t in bundle.tables() {
        let declared: Vec<String> = t
            .columns
            .iter()
            .filter(|c| {
                bundle.relations.iter().any(|r| {
                    (r.left_table == t.name && r.left_key == c.name)
                        || (r.right_table == t.name && r.right_key == c.name)
                })
            })
            .map(|c| c.name.clone())
            .collect();
        if !declared.is_empty() {
            keys.insert(t.name.clone(), declared);
        }
    }

    let main = &bundle.main;
    let main_keys = keys.get(&main.name).ok_or(PreprocessError::NoKeyFound)?;
    let mut factor: Option<(&ColumnData, usize)> = None;
    for k in main_keys {
        let col = main.column(k).expect("validated key");
        let d = col.distinct_count();
        if factor.is_none_or(|(_, best)| d > best) {
            factor = Some((col, d));
        }
    }
    let (factor_col, factor_distinct) = factor.expect("main has at least one key");

    let n = main.n_rows;
    let stride = n.div_ceil(SESSION_SAMPLE_ROWS).max(1);
    let sessions = main
        .columns
        .par_iter()
        .filter(|c| c.kind() == FeatureKind::Categorical && !main_keys.contains(&c.name))
        .filter(|c| c.distinct_count() > factor_distinct)
        .filter(|c| functionally_dependent(c, factor_col, (0..n).step_by(stride)))
        .filter(|c| stride == 1 || functionally_dependent(c, factor_col, 0..n))
        .map(|c| c.name.clone())
        .collect();

    Ok(BaseFeatureMap {
        keys,
        factor: factor_col.name.clone(),
        sessions,
    })
}

fn numeric_is_flat(col: &ColumnData) -> bool {
    let vals: Vec<f64> = (0..col.len()).filter_map(|r| col.number(r)).collect();
    if vals.is_empty() {
        return true;
    }
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !(hi > lo) {
        return true;
    }
    let scaled = vals.iter().map(|v| (v - lo) / (hi - lo));
    let mean = scaled.clone().sum::<f64>() / vals.len() as f64;
    let var = scaled.map(|s| (s - mean) * (s - mean)).sum::<f64>() / vals.len() as f64;
    var < 1e-6
}

/// Drop near-constant numerical columns and categorical columns with one
/// value or almost all-distinct values. Columns named in `protected` and
/// temporal columns are always kept. Multi-categorical columns are dropped
/// only when every cell is missing.
pub fn drop_low_information(table: Table, protected: &HashSet<&str>) -> (Table, Vec<String>) {
    if table.n_rows == 0 {
        return (table, Vec::new());
    }
    let n = table.n_rows as f64;
    let drop: Vec<bool> = table
        .columns
        .par_iter()
        .map(|c| {
            if protected.contains(c.name.as_str()) {
                return false;
            }
            match c.kind() {
                FeatureKind::Temporal => false,
                FeatureKind::Numerical => numeric_is_flat(c),
                FeatureKind::Categorical => {
                    let d = c.distinct_count();
                    d <= 1 || d as f64 / n > 0.99
                }
                FeatureKind::MultiCategorical => c.n_missing() == c.len(),
            }
        })
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (c, d) in table.columns.into_iter().zip(drop) {
        if d {
            dropped.push(c.name);
        } else {
            kept.push(c);
        }
    }
    (
        Table {
            name: table.name,
            columns: kept,
            n_rows: table.n_rows,
        },
        dropped,
    )
}

/// Symmetric 0/1 matrix over categorical columns with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    pub n: usize,
    entries: BitVec,
}

impl OverlapMatrix {
    pub fn identity(n: usize) -> Self {
        let mut entries = bitvec![0; n * n];
        for i in 0..n {
            entries.set(i * n + i, true);
        }
        OverlapMatrix { n, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn set_edge(&mut self, i: usize, j: usize) {
        self.entries.set(i * self.n + j, true);
        self.entries.set(j * self.n + i, true);
    }

    /// Build from a row-major boolean matrix; the input must be symmetric.
    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let n = rows.len();
        let mut m = OverlapMatrix::identity(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v {
                    m.set_edge(i, j);
                }
            }
        }
        m
    }
}

/// `M[i][j] = 1` iff `i == j` or `|S_i ∩ S_j| / min(|S_i|, |S_j|) > threshold`.
pub fn build_overlap_matrix<S: AsRef<str> + Eq + std::hash::Hash>(
    sets: &[HashSet<S>],
    threshold: f64,
) -> OverlapMatrix {
    let n = sets.len();
    let mut m = OverlapMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let (small, large) = if sets[i].len() <= sets[j].len() {
                (&sets[i], &sets[j])
            } else {
                (&sets[j], &sets[i])
            };
            if small.is_empty() {
                continue;
            }
            let common = small.iter().filter(|t| large.contains(*t)).count();
            if common as f64 / small.len() as f64 > threshold {
                m.set_edge(i, j);
            }
        }
    }
    m
}

/// Blocks of column indices keyed by block id (1-based, first-visit order).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockDictionary {
    pub blocks: BTreeMap<u32, Vec<usize>>,
    pub visited: Vec<bool>,
}

impl BlockDictionary {
    pub fn block_of(&self, column: usize) -> Option<u32> {
        self.blocks
            .iter()
            .find(|(_, cols)| cols.contains(&column))
            .map(|(&b, _)| b)
    }
}

/// Connected components of the overlap graph, in the order of a recursive
/// depth-first search that marks a column before descending into it. An
/// explicit stack replaces the recursion.
pub fn build_feature_blocks(m: &OverlapMatrix) -> BlockDictionary {
    let n = m.n;
    let mut visited = vec![false; n];
    let mut blocks = BTreeMap::new();
    let mut b = 0u32;
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        b += 1;
        let mut members = vec![start];
        // each frame: (column, next candidate j to inspect)
        let mut stack = vec![(start, 0usize)];
        while let Some(top) = stack.last_mut() {
            let (i, j) = *top;
            if j == n {
                stack.pop();
                continue;
            }
            top.1 += 1;
            if !visited[j] && m.get(i, j) {
                visited[j] = true;
                members.push(j);
                stack.push((j, 0));
            }
        }
        blocks.insert(b, members);
    }
    BlockDictionary { blocks, visited }
}

/// Per-block bijection between raw tokens and dense codes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncodingDictionary {
    pub blocks: BTreeMap<u32, Vec<String>>,
}

impl EncodingDictionary {
    pub fn decode(&self, block: u32, code: u32) -> Option<&str> {
        self.blocks
            .get(&block)?
            .get(code as usize)
            .map(String::as_str)
    }

    pub fn encode(&self, block: u32, token: &str) -> Option<u32> {
        self.blocks
            .get(&block)?
            .iter()
            .position(|t| t == token)
            .map(|p| p as u32)
    }
}

/// Categorical and multi-categorical columns of the bundle in table order
/// (main first), then schema order.
pub fn categorical_columns(bundle: &DatasetBundle) -> Vec<ColumnRef> {
    bundle
        .tables()
        .flat_map(|t| {
            t.columns
                .iter()
                .filter(|c| c.kind().is_categorical())
                .map(move |c| ColumnRef::new(&t.name, &c.name))
        })
        .collect()
}

/// Distinct raw tokens actually present in a raw-encoded column.
pub fn present_tokens(col: &ColumnData) -> HashSet<&str> {
    let (dict, codes): (&[String], Box<dyn Iterator<Item = u32> + '_>) = match &col.values {
        ColumnValues::Categorical {
            codes,
            encoding: Encoding::Raw(d),
        } => (
            d,
            Box::new(
                (0..codes.len())
                    .filter(|&r| !col.is_missing(r))
                    .map(|r| codes.get(r)),
            ),
        ),
        ColumnValues::MultiCategorical {
            values,
            encoding: Encoding::Raw(d),
            ..
        } => (d, Box::new(values.iter())),
        _ => return HashSet::new(),
    };
    let mut seen = bitvec![0; dict.len()];
    for c in codes {
        seen.set(c as usize, true);
    }
    seen.iter_ones().map(|i| dict[i].as_str()).collect()
}

fn find_column<'a>(bundle: &'a DatasetBundle, r: &ColumnRef) -> &'a ColumnData {
    bundle
        .table(&r.table)
        .and_then(|t| t.column(&r.column))
        .expect("column reference from this bundle")
}

/// Re-encode each block's columns into one shared dictionary. Within a
/// block, columns are scanned in `columns` order and rows top to bottom;
/// tokens get codes in first-occurrence order.
pub fn encode_blocks(
    bundle: &mut DatasetBundle,
    columns: &[ColumnRef],
    blocks: &BlockDictionary,
) -> EncodingDictionary {
    let encoded: Vec<(u32, Vec<String>, Vec<(usize, ColumnValues)>)> = blocks
        .blocks
        .par_iter()
        .map(|(&b, members)| {
            let mut members = members.clone();
            members.sort_unstable();
            let mut ids: HashMap<&str, u32> = HashMap::new();
            let mut tokens: Vec<String> = Vec::new();
            let mut out = Vec::with_capacity(members.len());
            for &m in &members {
                let col = find_column(bundle, &columns[m]);
                let dict = col
                    .encoding()
                    .and_then(|e| e.tokens())
                    .expect("raw-encoded column");
                let mut remap = vec![u32::MAX; dict.len()];
                let mut map = |local: u32| -> u32 {
                    let slot = &mut remap[local as usize];
                    if *slot == u32::MAX {
                        let tok = dict[local as usize].as_str();
                        *slot = *ids.entry(tok).or_insert_with(|| {
                            tokens.push(tok.to_string());
                            tokens.len() as u32 - 1
                        });
                    }
                    *slot
                };
                let values = match &col.values {
                    ColumnValues::Categorical { codes, .. } => {
                        let v = (0..codes.len())
                            .map(|r| {
                                if col.is_missing(r) {
                                    0
                                } else {
                                    map(codes.get(r))
                                }
                            })
                            .collect();
                        ColumnValues::Categorical {
                            codes: Codes::U32(v),
                            encoding: Encoding::Block(b),
                        }
                    }
                    ColumnValues::MultiCategorical {
                        values, offsets, ..
                    } => ColumnValues::MultiCategorical {
                        values: Codes::U32(values.iter().map(&mut map).collect()),
                        offsets: offsets.clone(),
                        encoding: Encoding::Block(b),
                    },
                    _ => unreachable!("blocks hold categorical columns only"),
                };
                out.push((m, values));
            }
            (b, tokens, out)
        })
        .collect();

    let mut dictionary = EncodingDictionary::default();
    for (b, tokens, cols) in encoded {
        for (m, values) in cols {
            let r = &columns[m];
            let table = if bundle.main.name == r.table {
                &mut bundle.main
            } else {
                bundle
                    .related
                    .iter_mut()
                    .find(|t| t.name == r.table)
                    .expect("known table")
            };
            table.column_mut(&r.column).expect("known column").values = values;
        }
        dictionary.blocks.insert(b, tokens);
    }
    dictionary
}

/// Stable ascending order by the first temporal column (missing times first);
/// identity when the table has none.
pub fn time_order(table: &Table) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.n_rows).collect();
    if let Some(t) = table
        .columns
        .iter()
        .find(|c| c.kind() == FeatureKind::Temporal)
    {
        order.sort_by_key(|&r| t.timestamp(r).map_or(i64::MIN, |v| v));
    }
    order
}

/// Narrow reals to single precision and codes to the smallest width class.
pub fn downcast(table: Table) -> Table {
    let columns = table
        .columns
        .into_par_iter()
        .map(|mut c| {
            c.values = match c.values {
                ColumnValues::Categorical { codes, encoding } => ColumnValues::Categorical {
                    codes: codes.narrow(),
                    encoding,
                },
                ColumnValues::MultiCategorical {
                    values,
                    offsets,
                    encoding,
                } => ColumnValues::MultiCategorical {
                    values: values.narrow(),
                    offsets,
                    encoding,
                },
                ColumnValues::Numerical(n) => ColumnValues::Numerical(n.narrow()),
                v @ ColumnValues::Temporal(_) => v,
            };
            c
        })
        .collect();
    Table { columns, ..table }
}

pub fn downcast_and_sort(table: Table) -> Table {
    let order = time_order(&table);
    downcast(table.take_rows(&order))
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub overlap_threshold: f64,
    /// Main rows `[0, split)` and `[split, n)` are sorted separately.
    pub main_split: usize,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub bundle: DatasetBundle,
    /// `None` when no relation touches the main table.
    pub base: Option<BaseFeatureMap>,
    pub columns: Vec<ColumnRef>,
    pub blocks: BlockDictionary,
    pub dictionary: EncodingDictionary,
    pub dropped: Vec<ColumnRef>,
    /// New main row `i` was old row `main_order[i]`.
    pub main_order: Vec<usize>,
}

/// Run every preprocessing step. Labels, if any, are not reordered; use `main_order`.
pub fn preprocess(mut bundle: DatasetBundle, cfg: &PreprocessConfig) -> Preprocessed {
    let base = detect_base_features(&bundle).ok();
    let empty = BaseFeatureMap::default();
    let b = base.as_ref().unwrap_or(&empty);

    let mut dropped = Vec::new();
    let main_name = bundle.main.name.clone();
    let tables: Vec<Table> = std::iter::once(bundle.main.clone())
        .chain(bundle.related.drain(..))
        .collect();
    let mut tables = tables.into_iter().map(|t| {
        let mut protected: HashSet<&str> = b.keys_of(&t.name).iter().map(String::as_str).collect();
        if t.name == main_name {
            protected.extend(b.sessions.iter().map(String::as_str));
        }
        let name = t.name.clone();
        let (t, d) = drop_low_information(t, &protected);
        dropped.extend(d.into_iter().map(|c| ColumnRef::new(&name, c)));
        t
    });
    let main = tables.next().expect("main");
    let related = tables.collect();
    bundle.main = main;
    bundle.related = related;
    for d in &dropped {
        debug!("dropped low-information column {d}");
    }

    let columns = categorical_columns(&bundle);
    let sets: Vec<HashSet<&str>> = columns
        .par_iter()
        .map(|r| present_tokens(find_column(&bundle, r)))
        .collect();
    let mut m = build_overlap_matrix(&sets, cfg.overlap_threshold);
    drop(sets);
    // join keys must share a dictionary regardless of overlap
    for rel in &bundle.relations {
        let l = columns
            .iter()
            .position(|c| c.table == rel.left_table && c.column == rel.left_key);
        let r = columns
            .iter()
            .position(|c| c.table == rel.right_table && c.column == rel.right_key);
        if let (Some(l), Some(r)) = (l, r) {
            m.set_edge(l, r);
        }
    }
    let blocks = build_feature_blocks(&m);
    let dictionary = encode_blocks(&mut bundle, &columns, &blocks);

    let n = bundle.main.n_rows;
    let split = cfg.main_split.min(n);
    let mut main_order = time_order(&bundle.main.take_rows(&(0..split).collect::<Vec<_>>()));
    let test_part: Vec<usize> = (split..n).collect();
    let test_order = time_order(&bundle.main.take_rows(&test_part));
    main_order.extend(test_order.into_iter().map(|i| test_part[i]));
    bundle.main = downcast(bundle.main.take_rows(&main_order));
    bundle.related = bundle
        .related
        .into_par_iter()
        .map(downcast_and_sort)
        .collect();

    Preprocessed {
        bundle,
        base,
        columns,
        blocks,
        dictionary,
        dropped,
        main_order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RelType, RelationSpec};

    fn cat(name: &str, cells: &[&str]) -> ColumnData {
        ColumnData::categorical_raw(name, cells.iter().map(|c| (!c.is_empty()).then_some(*c)))
    }

    fn bundle(main: Table, related: Vec<Table>, relations: Vec<RelationSpec>) -> DatasetBundle {
        DatasetBundle {
            main,
            related,
            relations,
            labels: None,
            time_budget_s: 60.0,
            mem_budget_bytes: 1 << 30,
        }
    }

    fn rel(left: &str, right: &str, lk: &str, rk: &str) -> RelationSpec {
        RelationSpec {
            left_table: left.into(),
            right_table: right.into(),
            left_key: lk.into(),
            right_key: rk.into(),
            rel_type: RelType::ManyToOne,
        }
    }

    #[test]
    fn factor_is_key_with_most_values() {
        let users: Vec<String> = (0..40).map(|i| format!("u{}", i % 20)).collect();
        let items: Vec<String> = (0..40).map(|i| format!("i{}", i % 5)).collect();
        let main = Table::new(
            "main",
            vec![
                ColumnData::categorical_raw("item_id", items.iter().map(|s| Some(s.as_str()))),
                ColumnData::categorical_raw("user_id", users.iter().map(|s| Some(s.as_str()))),
            ],
        )
        .unwrap();
        let u = Table::new("u", vec![cat("user_id", &["u1"])]).unwrap();
        let i = Table::new("i", vec![cat("item_id", &["i1"])]).unwrap();
        let b = bundle(
            main,
            vec![u, i],
            vec![
                rel("main", "u", "user_id", "user_id"),
                rel("main", "i", "item_id", "item_id"),
            ],
        );
        let base = detect_base_features(&b).unwrap();
        assert_eq!(base.factor, "user_id");
        assert_eq!(base.keys_of("main"), ["item_id", "user_id"]);
        assert_eq!(base.keys_of("u"), ["user_id"]);
    }

    #[test]
    fn session_requires_dependency_and_finer_grain() {
        let main = Table::new(
            "main",
            vec![
                cat("user", &["u1", "u1", "u2", "u1"]),
                cat("ip", &["a", "b", "c", "a"]),
                cat("city", &["NYC", "LA", "NYC", "LA"]),
            ],
        )
        .unwrap();
        let users = Table::new("users", vec![cat("user", &["u1", "u2"])]).unwrap();
        let b = bundle(
            main,
            vec![users],
            vec![rel("main", "users", "user", "user")],
        );
        let base = detect_base_features(&b).unwrap();
        assert_eq!(base.factor, "user");
        assert_eq!(base.sessions, ["ip"]);

        let single = bundle(b.main.clone(), vec![], vec![]);
        assert_eq!(
            detect_base_features(&single),
            Err(PreprocessError::NoKeyFound)
        );
    }

    #[test]
    fn drops_flat_and_id_like_columns_only() {
        let ids: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let t = Table::new(
            "t",
            vec![
                ColumnData::numerical("const", [5.0, 5.0, 5.0, 5.0].map(Some)),
                ColumnData::numerical("x", [1.0, 2.0, 3.0, 4.0].map(Some)),
                ColumnData::categorical_raw("uid", ids.iter().map(|s| Some(s.as_str()))),
                ColumnData::categorical_raw("key", ids.iter().map(|s| Some(s.as_str()))),
                cat("one", &["a", "a", "a", ""]),
                cat("two", &["a", "b", "a", "b"]),
                ColumnData::temporal("t", [Some(1), Some(1), Some(1), Some(1)]),
                ColumnData::numerical("empty", [None; 4]),
            ],
        )
        .unwrap();
        let (t, dropped) = drop_low_information(t, &HashSet::from(["key"]));
        assert_eq!(dropped, ["const", "uid", "one", "empty"]);
        let kept: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(kept, ["x", "key", "two", "t"]);
    }

    #[test]
    fn overlap_uses_min_denominator() {
        let a: HashSet<&str> = ["x", "y"].into();
        let b: HashSet<&str> = ["y", "z"].into();
        let c: HashSet<&str> = ["p", "q"].into();
        let m = build_overlap_matrix(&[a, b, c], 0.10);
        assert!(m.get(0, 1) && m.get(1, 0));
        assert!(!m.get(0, 2) && !m.get(2, 1));
        assert!((0..3).all(|i| m.get(i, i)));
    }

    #[test]
    fn blocks_follow_search_order() {
        // edges (0,1), (1,2); 3 isolated
        let mut m = OverlapMatrix::identity(4);
        m.set_edge(0, 1);
        m.set_edge(1, 2);
        let b = build_feature_blocks(&m);
        assert_eq!(b.blocks[&1], vec![0, 1, 2]);
        assert_eq!(b.blocks[&2], vec![3]);
        let none = build_feature_blocks(&OverlapMatrix::identity(3));
        assert_eq!(none.blocks.len(), 3);

        // depth-first: 0 -> 2 -> 1 before 3
        let mut m = OverlapMatrix::identity(4);
        m.set_edge(0, 2);
        m.set_edge(2, 1);
        m.set_edge(0, 3);
        assert_eq!(build_feature_blocks(&m).blocks[&1], vec![0, 2, 1, 3]);
    }

    #[test]
    fn shared_tokens_share_codes() {
        let main = Table::new(
            "main",
            vec![
                cat("fruit", &["apple", "peach", "apple"]),
                ColumnData::multi_categorical_raw(
                    "basket",
                    [Some(vec!["banana", "apple"]), None, Some(vec!["peach"])],
                ),
                cat("n", &["1", "2", "1"]),
            ],
        )
        .unwrap();
        let other = Table::new("o", vec![cat("m", &["1", "3", "3"])]).unwrap();
        let mut b = bundle(main, vec![other], vec![]);
        let columns = categorical_columns(&b);
        let mut m = OverlapMatrix::identity(4);
        m.set_edge(0, 1);
        let blocks = build_feature_blocks(&m);
        let dict = encode_blocks(&mut b, &columns, &blocks);

        let fruit = b.main.column("fruit").unwrap();
        let basket = b.main.column("basket").unwrap();
        assert_eq!(fruit.block(), basket.block());
        let apple = dict.encode(1, "apple").unwrap();
        assert_eq!(fruit.code(0), Some(apple));
        assert!(basket.list(0).any(|c| c == apple));
        assert_eq!(dict.blocks[&1], ["apple", "peach", "banana"]);
        // token "1" in two different blocks gets independent codes
        assert_eq!(dict.blocks[&2], ["1", "2"]);
        assert_eq!(dict.blocks[&3], ["1", "3"]);
        let n = b.main.column("n").unwrap();
        assert_eq!(dict.decode(2, n.code(1).unwrap()), Some("2"));
    }

    #[test]
    fn sort_is_stable_and_downcast_narrows() {
        let t = Table::new(
            "t",
            vec![
                ColumnData::temporal("ts", [Some(30), Some(10), Some(20), Some(10)]),
                ColumnData::numerical("x", [Some(3.0), Some(1.0), Some(2.0), Some(1.5)]),
                ColumnData::categorical_encoded("c", vec![200, 0, 5, 7], bitvec![0; 4], 1),
            ],
        )
        .unwrap();
        let s = downcast_and_sort(t);
        let ts: Vec<i64> = (0..4)
            .map(|r| s.column("ts").unwrap().timestamp(r).unwrap())
            .collect();
        assert_eq!(ts, [10, 10, 20, 30]);
        let x: Vec<f64> = (0..4)
            .map(|r| s.column("x").unwrap().number(r).unwrap())
            .collect();
        assert_eq!(x, [1.0, 1.5, 2.0, 3.0]);
        match &s.column("c").unwrap().values {
            ColumnValues::Categorical { codes, .. } => assert_eq!(codes.width_bytes(), 1),
            _ => unreachable!(),
        }
        match &s.column("x").unwrap().values {
            ColumnValues::Numerical(n) => assert_eq!(n.width_bytes(), 4),
            _ => unreachable!(),
        }
    }
}
