//! Typed tables, relations and the dataset bundle every stage consumes.

mod column;
mod table;

use std::collections::BTreeMap;

use thiserror::Error;

pub use column::{Codes, ColumnData, ColumnValues, Encoding, FeatureKind, Numbers};
pub use table::{RelType, RelationSpec, Table};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing table `{0}`")]
    MissingTable(String),
    #[error("table `{table}` has no column `{column}`")]
    MissingColumn { table: String, column: String },
    #[error("column `{table}.{column}` is {found}, expected {expected}")]
    KindMismatch {
        table: String,
        column: String,
        expected: FeatureKind,
        found: FeatureKind,
    },
    #[error("label vector has {found} entries for {expected} main rows")]
    LabelLengthMismatch { expected: usize, found: usize },
    #[error("label at row {row} is {value}, expected 0 or 1")]
    InvalidLabel { row: usize, value: u8 },
    #[error("column `{table}.{column}` has {len} rows, table has {expected}")]
    RaggedColumn {
        table: String,
        column: String,
        len: usize,
        expected: usize,
    },
    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
}

/// Main table, related tables, their links, optional labels and budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub main: Table,
    pub related: Vec<Table>,
    pub relations: Vec<RelationSpec>,
    pub labels: Option<Vec<u8>>,
    pub time_budget_s: f64,
    pub mem_budget_bytes: u64,
}

impl DatasetBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        if self.main.name == name {
            Some(&self.main)
        } else {
            self.related.iter().find(|t| t.name == name)
        }
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        std::iter::once(&self.main).chain(self.related.iter())
    }

    pub fn tables_mut(&mut self) -> impl Iterator<Item = &mut Table> {
        std::iter::once(&mut self.main).chain(self.related.iter_mut())
    }
}

/// Check every structural invariant; returns the bundle unchanged on success.
pub fn validate_bundle(bundle: DatasetBundle) -> Result<DatasetBundle, DataError> {
    let mut seen = std::collections::HashSet::new();
    for t in bundle.tables() {
        if !seen.insert(t.name.as_str()) {
            return Err(DataError::DuplicateTable(t.name.clone()));
        }
        t.check()?;
    }
    for rel in &bundle.relations {
        for (tname, key) in [
            (&rel.left_table, &rel.left_key),
            (&rel.right_table, &rel.right_key),
        ] {
            let table = bundle
                .table(tname)
                .ok_or_else(|| DataError::MissingTable(tname.clone()))?;
            let col = table.column(key).ok_or_else(|| DataError::MissingColumn {
                table: tname.clone(),
                column: key.clone(),
            })?;
            if col.kind() != FeatureKind::Categorical {
                return Err(DataError::KindMismatch {
                    table: tname.clone(),
                    column: key.clone(),
                    expected: FeatureKind::Categorical,
                    found: col.kind(),
                });
            }
        }
    }
    if let Some(labels) = &bundle.labels {
        if labels.len() != bundle.main.n_rows {
            return Err(DataError::LabelLengthMismatch {
                expected: bundle.main.n_rows,
                found: labels.len(),
            });
        }
        if let Some((row, &value)) = labels.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(DataError::InvalidLabel { row, value });
        }
    }
    Ok(bundle)
}

/// Key, factor and session columns found by base-feature detection.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BaseFeatureMap {
    /// Key columns per table name, in schema order.
    pub keys: BTreeMap<String, Vec<String>>,
    /// Main-table key with the most distinct values.
    pub factor: String,
    /// Main-table categorical columns functionally dependent on the factor.
    pub sessions: Vec<String>,
}

impl BaseFeatureMap {
    pub fn keys_of(&self, table: &str) -> &[String] {
        self.keys.get(table).map_or(&[], |v| v.as_slice())
    }

    pub fn is_key(&self, table: &str, column: &str) -> bool {
        self.keys_of(table).iter().any(|k| k == column)
    }
}
