//! On-disk dataset format: an `info.json` schema plus one TSV file per table.
//!
//! ```text
//! {
//!   "tables": [{"name": "main", "path": "main.tsv", "main": true,
//!               "columns": {"user_id": "cat", "tags": "multi-cat", "t": "time"}}],
//!   "relations": [{"left": "main", "right": "users", "left_key": "user_id",
//!                  "right_key": "user_id", "type": "M-1"}],
//!   "label_column": "label",
//!   "time_budget_s": 300,
//!   "mem_budget_mb": 4096
//! }
//! ```
//!
//! Tables are tab-separated with a header line. An empty field is missing
//! for every kind; multi-categorical cells hold comma-separated tokens.
//! Labels live in `labels.tsv` next to the tables, one `0`/`1` per line.

mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::data::{
    ColumnData, DataError, DatasetBundle, FeatureKind, RelType, RelationSpec, Table,
};

pub use synthetic::{generate_synthetic, replicate_rows, split_train_test, SyntheticSpec};

pub const LABEL_FILE: &str = "labels.tsv";
const DEFAULT_MEM_MB: u64 = 4096;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown feature kind `{0}`")]
    UnknownFeatureKind(String),
    #[error("unknown relation type `{0}`")]
    UnknownRelationType(String),
    #[error("duplicate table name `{0}`")]
    DuplicateTableName(String),
    #[error("{file}: data row {row} has {found} fields, header has {expected}")]
    RowArity {
        file: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}: data row {row}, column `{column}`: cannot parse `{value}` as {kind}")]
    ValueParse {
        file: PathBuf,
        row: usize,
        column: String,
        value: String,
        kind: FeatureKind,
    },
    #[error("{file}: header has no column `{column}`")]
    MissingHeaderColumn { file: PathBuf, column: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableInfo {
    pub name: String,
    /// Relative to the dataset directory.
    pub path: String,
    pub main: bool,
    /// Declared columns in schema order.
    pub columns: Vec<(String, FeatureKind)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetInfo {
    pub tables: Vec<TableInfo>,
    pub relations: Vec<RelationSpec>,
    pub label_column: String,
    pub time_budget_s: f64,
    pub mem_budget_bytes: u64,
}

impl DatasetInfo {
    pub fn main_table(&self) -> &TableInfo {
        self.tables
            .iter()
            .find(|t| t.main)
            .expect("parse_info guarantees one main table")
    }

    pub fn related_tables(&self) -> impl Iterator<Item = &TableInfo> {
        self.tables.iter().filter(|t| !t.main)
    }

    /// Schema of an in-memory bundle, with each table stored at `<name>.tsv`.
    pub fn describe(bundle: &DatasetBundle, label_column: &str) -> DatasetInfo {
        let tables = bundle
            .tables()
            .map(|t| TableInfo {
                name: t.name.clone(),
                path: format!("{}.tsv", t.name),
                main: t.name == bundle.main.name,
                columns: t
                    .columns
                    .iter()
                    .map(|c| (c.name.clone(), c.kind()))
                    .collect(),
            })
            .collect();
        DatasetInfo {
            tables,
            relations: bundle.relations.clone(),
            label_column: label_column.to_string(),
            time_budget_s: bundle.time_budget_s,
            mem_budget_bytes: bundle.mem_budget_bytes,
        }
    }

    pub fn to_json(&self) -> String {
        use serde_json::{json, Map, Value};
        let tables: Vec<Value> = self
            .tables
            .iter()
            .map(|t| {
                let columns: Map<String, Value> = t
                    .columns
                    .iter()
                    .map(|(n, k)| (n.clone(), Value::from(k.as_str())))
                    .collect();
                json!({"name": t.name, "path": t.path, "main": t.main, "columns": columns})
            })
            .collect();
        let relations: Vec<Value> = self
            .relations
            .iter()
            .map(|r| {
                json!({"left": r.left_table, "right": r.right_table, "left_key": r.left_key,
                       "right_key": r.right_key, "type": r.rel_type.as_str()})
            })
            .collect();
        let doc = json!({
            "tables": tables,
            "relations": relations,
            "label_column": self.label_column,
            "time_budget_s": self.time_budget_s,
            "mem_budget_mb": self.mem_budget_bytes / (1 << 20),
        });
        serde_json::to_string_pretty(&doc).expect("json values always serialize") + "\n"
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInfo {
    tables: Vec<RawTable>,
    #[serde(default)]
    relations: Vec<RawRelation>,
    label_column: String,
    time_budget_s: f64,
    mem_budget_mb: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    name: String,
    path: String,
    #[serde(default)]
    main: bool,
    columns: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelation {
    left: String,
    right: String,
    left_key: String,
    right_key: String,
    #[serde(rename = "type")]
    rel_type: String,
}

fn schema_error(message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line: 0,
        column: 0,
        message: message.into(),
    }
}

pub fn parse_info(text: &str) -> Result<DatasetInfo, IngestError> {
    let raw: RawInfo = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut tables = Vec::with_capacity(raw.tables.len());
    for t in raw.tables {
        if tables.iter().any(|x: &TableInfo| x.name == t.name) {
            return Err(IngestError::DuplicateTableName(t.name));
        }
        let mut columns = Vec::with_capacity(t.columns.len());
        for (name, kind) in t.columns {
            let token = kind
                .as_str()
                .ok_or_else(|| schema_error(format!("kind of column `{name}` must be a string")))?;
            let kind = FeatureKind::parse(token)
                .ok_or_else(|| IngestError::UnknownFeatureKind(token.to_string()))?;
            columns.push((name, kind));
        }
        tables.push(TableInfo {
            name: t.name,
            path: t.path,
            main: t.main,
            columns,
        });
    }
    match tables.iter().filter(|t| t.main).count() {
        1 => {}
        n => {
            return Err(schema_error(format!(
                "expected exactly one main table, found {n}"
            )))
        }
    }

    let relations = raw
        .relations
        .into_iter()
        .map(|r| {
            let rel_type =
                RelType::parse(&r.rel_type).ok_or(IngestError::UnknownRelationType(r.rel_type))?;
            Ok(RelationSpec {
                left_table: r.left,
                right_table: r.right,
                left_key: r.left_key,
                right_key: r.right_key,
                rel_type,
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;

    if !(raw.time_budget_s > 0.0) {
        return Err(schema_error("time_budget_s must be positive"));
    }
    Ok(DatasetInfo {
        tables,
        relations,
        label_column: raw.label_column,
        time_budget_s: raw.time_budget_s,
        mem_budget_bytes: raw.mem_budget_mb.unwrap_or(DEFAULT_MEM_MB) << 20,
    })
}

pub fn read_info(path: &Path) -> Result<DatasetInfo, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_info(&text)
}

fn parse_cells<'a>(
    file: &Path,
    name: &str,
    kind: FeatureKind,
    cells: impl Iterator<Item = (usize, &'a str)>,
) -> Result<ColumnData, IngestError> {
    let bad = |row: usize, value: &str| IngestError::ValueParse {
        file: file.to_path_buf(),
        row,
        column: name.to_string(),
        value: value.to_string(),
        kind,
    };
    Ok(match kind {
        FeatureKind::Categorical => {
            ColumnData::categorical_raw(name, cells.map(|(_, c)| (!c.is_empty()).then_some(c)))
        }
        FeatureKind::MultiCategorical => ColumnData::multi_categorical_raw(
            name,
            cells.map(|(_, c)| (!c.is_empty()).then(|| c.split(',').filter(|t| !t.is_empty()))),
        ),
        FeatureKind::Numerical => {
            let mut out = Vec::new();
            for (row, c) in cells {
                out.push(if c.is_empty() {
                    None
                } else {
                    let v: f64 = c.parse().map_err(|_| bad(row, c))?;
                    (!v.is_nan()).then_some(v)
                });
            }
            ColumnData::numerical(name, out)
        }
        FeatureKind::Temporal => {
            let mut out = Vec::new();
            for (row, c) in cells {
                out.push(if c.is_empty() {
                    None
                } else {
                    match c.parse::<i64>() {
                        Ok(v) => Some(v),
                        Err(_) => {
                            let v: f64 = c.parse().map_err(|_| bad(row, c))?;
                            if !v.is_finite() {
                                return Err(bad(row, c));
                            }
                            Some(v.floor() as i64)
                        }
                    }
                });
            }
            ColumnData::temporal(name, out)
        }
    })
}

/// Parse one table file. Header columns that the schema does not declare are
/// ignored; declared columns come out in schema order.
pub fn load_table(path: &Path, info: &TableInfo) -> Result<Table, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let mut lines = text.split('\n');
    let header: Vec<&str> = lines
        .next()
        .unwrap_or("")
        .trim_end_matches('\r')
        .split('\t')
        .collect();
    let width = header.len();

    let mut fields: Vec<&str> = Vec::new();
    let mut n_rows = 0;
    for line in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() && width > 1 {
            continue;
        }
        let before = fields.len();
        fields.extend(line.split('\t'));
        if fields.len() - before != width {
            return Err(IngestError::RowArity {
                file: path.to_path_buf(),
                row: n_rows,
                expected: width,
                found: fields.len() - before,
            });
        }
        n_rows += 1;
    }
    // a single-column file cannot tell a trailing newline from an empty cell
    if width == 1 && text.ends_with('\n') && n_rows > 0 && fields.last() == Some(&"") {
        fields.pop();
        n_rows -= 1;
    }

    let positions =
        info.columns
            .iter()
            .map(|(name, _)| {
                header.iter().position(|h| h == name).ok_or_else(|| {
                    IngestError::MissingHeaderColumn {
                        file: path.to_path_buf(),
                        column: name.clone(),
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
    for h in &header {
        if !info.columns.iter().any(|(n, _)| n == h) {
            warn!("{}: ignoring undeclared column `{h}`", path.display());
        }
    }

    let columns = info
        .columns
        .par_iter()
        .zip(positions.par_iter())
        .map(|((name, kind), &pos)| {
            let cells = (0..n_rows).map(|r| (r, fields[r * width + pos]));
            parse_cells(path, name, *kind, cells)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(info.name.clone(), columns)?;
    table.n_rows = n_rows;
    table.check()?;
    Ok(table)
}

/// Read labels: one `0`/`1` per line, an optional header equal to `label_column`.
pub fn load_labels(path: &Path, label_column: &str) -> Result<Vec<u8>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if i == 0 && line == label_column {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        out.push(match line {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(IngestError::ValueParse {
                    file: path.to_path_buf(),
                    row: out.len(),
                    column: label_column.to_string(),
                    value: line.to_string(),
                    kind: FeatureKind::Categorical,
                })
            }
        });
    }
    Ok(out)
}

/// Load every table of `info` from `root` (in parallel) plus `labels.tsv` if present.
pub fn load_dataset(root: &Path, info: &DatasetInfo) -> Result<DatasetBundle, IngestError> {
    let mut tables = info
        .tables
        .par_iter()
        .map(|t| load_table(&root.join(&t.path), t).map(|tab| (t.main, tab)))
        .collect::<Result<Vec<_>, _>>()?;
    let main_pos = tables.iter().position(|(m, _)| *m).expect("one main table");
    let (_, main) = tables.remove(main_pos);
    let label_path = root.join(LABEL_FILE);
    let labels = if label_path.exists() {
        Some(load_labels(&label_path, &info.label_column)?)
    } else {
        None
    };
    let bundle = DatasetBundle {
        main,
        related: tables.into_iter().map(|(_, t)| t).collect(),
        relations: info.relations.clone(),
        labels,
        time_budget_s: info.time_budget_s,
        mem_budget_bytes: info.mem_budget_bytes,
    };
    Ok(crate::data::validate_bundle(bundle)?)
}

fn format_cell(col: &ColumnData, row: usize, out: &mut String) {
    use std::fmt::Write;
    if col.is_missing(row) {
        return;
    }
    match col.kind() {
        FeatureKind::Categorical => match col.token(row) {
            Some(t) => out.push_str(t),
            None => write!(out, "{}", col.code(row).unwrap_or(0)).unwrap(),
        },
        FeatureKind::MultiCategorical => {
            let tokens = col.tokens(row);
            if tokens.is_empty() {
                let codes: Vec<String> = col.list(row).map(|c| c.to_string()).collect();
                out.push_str(&codes.join(","));
            } else {
                out.push_str(&tokens.join(","));
            }
        }
        FeatureKind::Numerical => write!(out, "{}", col.number(row).unwrap()).unwrap(),
        FeatureKind::Temporal => write!(out, "{}", col.timestamp(row).unwrap()).unwrap(),
    }
}

pub fn table_to_tsv(table: &Table) -> String {
    let mut out = String::new();
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    out.push_str(&names.join("\t"));
    out.push('\n');
    for row in 0..table.n_rows {
        for (i, col) in table.columns.iter().enumerate() {
            if i > 0 {
                out.push('\t');
            }
            format_cell(col, row, &mut out);
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), IngestError> {
    fs::write(path, contents).map_err(|e| IngestError::io(path, e))
}

/// Write the tables of `bundle` to the paths named in `info` under `root`,
/// plus `labels.tsv` when labels are present. Does not write `info.json`.
pub fn write_dataset(
    bundle: &DatasetBundle,
    info: &DatasetInfo,
    root: &Path,
) -> Result<(), IngestError> {
    fs::create_dir_all(root).map_err(|e| IngestError::io(root, e))?;
    for t in bundle.tables() {
        let Some(ti) = info.tables.iter().find(|ti| ti.name == t.name) else {
            return Err(DataError::MissingTable(t.name.clone()).into());
        };
        write_file(&root.join(&ti.path), &table_to_tsv(t))?;
    }
    if let Some(labels) = &bundle.labels {
        let mut text = String::with_capacity(labels.len() * 2);
        for &l in labels {
            text.push(if l == 1 { '1' } else { '0' });
            text.push('\n');
        }
        write_file(&root.join(LABEL_FILE), &text)?;
    }
    Ok(())
}
