use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::column::ColumnData;
use super::DataError;

/// An ordered set of equally long, uniquely named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<ColumnData>,
    pub n_rows: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<ColumnData>) -> Result<Self, DataError> {
        let name = name.into();
        let n_rows = columns.first().map_or(0, |c| c.len());
        let table = Table {
            name,
            columns,
            n_rows,
        };
        table.check()?;
        Ok(table)
    }

    /// Column lengths and name uniqueness.
    pub fn check(&self) -> Result<(), DataError> {
        let mut names = HashSet::new();
        for c in &self.columns {
            if c.len() != self.n_rows || c.payload_len() != self.n_rows {
                return Err(DataError::RaggedColumn {
                    table: self.name.clone(),
                    column: c.name.clone(),
                    len: c.len().min(c.payload_len()),
                    expected: self.n_rows,
                });
            }
            if !names.insert(c.name.as_str()) {
                return Err(DataError::DuplicateColumn {
                    table: self.name.clone(),
                    column: c.name.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut ColumnData> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn take_rows(&self, rows: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            columns: self.columns.iter().map(|c| c.take_rows(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Stack the rows of `other` (same schema) under this table.
    pub fn concat_rows(&self, other: &Table) -> Result<Table, DataError> {
        let mut columns = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let o = other
                .column(&c.name)
                .ok_or_else(|| DataError::MissingColumn {
                    table: other.name.clone(),
                    column: c.name.clone(),
                })?;
            columns.push(c.concat(o).ok_or_else(|| DataError::KindMismatch {
                table: other.name.clone(),
                column: c.name.clone(),
                expected: c.kind(),
                found: o.kind(),
            })?);
        }
        Ok(Table {
            name: self.name.clone(),
            columns,
            n_rows: self.n_rows + other.n_rows,
        })
    }
}

/// Cardinality of a link, read from the left table's side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelType {
    #[serde(rename = "1-1")]
    OneToOne,
    #[serde(rename = "M-1")]
    ManyToOne,
    #[serde(rename = "1-M")]
    OneToMany,
    #[serde(rename = "M-M")]
    ManyToMany,
}

impl RelType {
    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "1-1" => Some(RelType::OneToOne),
            "M-1" => Some(RelType::ManyToOne),
            "1-M" => Some(RelType::OneToMany),
            "M-M" => Some(RelType::ManyToMany),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelType::OneToOne => "1-1",
            RelType::ManyToOne => "M-1",
            RelType::OneToMany => "1-M",
            RelType::ManyToMany => "M-M",
        }
    }

    /// The same link read from the other side.
    pub fn flipped(self) -> Self {
        match self {
            RelType::ManyToOne => RelType::OneToMany,
            RelType::OneToMany => RelType::ManyToOne,
            r => r,
        }
    }

    /// Each left row matches at most one right row.
    pub fn is_join(self) -> bool {
        matches!(self, RelType::OneToOne | RelType::ManyToOne)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub left_table: String,
    pub right_table: String,
    pub left_key: String,
    pub right_key: String,
    pub rel_type: RelType,
}

impl RelationSpec {
    pub fn flipped(&self) -> RelationSpec {
        RelationSpec {
            left_table: self.right_table.clone(),
            right_table: self.left_table.clone(),
            left_key: self.right_key.clone(),
            right_key: self.left_key.clone(),
            rel_type: self.rel_type.flipped(),
        }
    }
}
