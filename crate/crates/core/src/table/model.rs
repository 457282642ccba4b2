// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::cell::{CellKind, CellValue};
use super::TableError;

/// Provenance role of a column in the canonical table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    #[default]
    Canonical,
    Derived,
    Helper,
    RawSnapshot,
}

impl ColumnRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnRole::Canonical => "canonical",
            ColumnRole::Derived => "derived",
            ColumnRole::Helper => "helper",
            ColumnRole::RawSnapshot => "raw_snapshot",
        }
    }
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(default)]
    pub role: ColumnRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_kind: Option<CellKind>,
}

impl Column {
    pub fn new(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            role: ColumnRole::Canonical,
            declared_kind: None,
        }
    }

    pub fn with_role(mut self, role: ColumnRole) -> Self {
        self.role = role;
        self
    }

    pub fn with_kind(mut self, kind: CellKind) -> Self {
        self.declared_kind = Some(kind);
        self
    }
}

/// A row-major table.
///
/// `row_ids` carries stable row identity through reordering operators; raw
/// ingestion leaves it unset and the executor assigns `0..n` on entry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub table_id: String,
    pub title: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<CellValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_ids: Option<Vec<u64>>,
}

impl Table {
    /// Builds a table and checks every structural invariant.
    pub fn new(
        table_id: impl Into<String>,
        columns: Vec<Column>,
        rows: Vec<Vec<CellValue>>,
    ) -> Result<Self, TableError> {
        let table = Table {
            table_id: table_id.into(),
            title: String::new(),
            columns,
            rows,
            row_ids: None,
        };
        table.check()?;
        Ok(table)
    }

    /// Convenience constructor for text-only tables.
    pub fn from_text_rows(
        table_id: impl Into<String>,
        names: &[&str],
        rows: &[&[&str]],
    ) -> Result<Self, TableError> {
        let columns = names.iter().map(|n| Column::new(*n)).collect();
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|c| CellValue::text(*c)).collect())
            .collect();
        Table::new(table_id, columns, rows)
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn check(&self) -> Result<(), TableError> {
        let mut seen = HashSet::new();
        let mut dups = BTreeSet::new();
        for c in &self.columns {
            if c.name.is_empty() {
                return Err(TableError::EmptyColumnName);
            }
            if !seen.insert(c.name.as_str()) {
                dups.insert(c.name.clone());
            }
        }
        if !dups.is_empty() {
            return Err(TableError::DuplicateColumns(dups.into_iter().collect()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(TableError::RaggedRow {
                    row: i,
                    expected: self.columns.len(),
                    found: row.len(),
                });
            }
        }
        for (ci, c) in self.columns.iter().enumerate() {
            if let Some(kind) = c.declared_kind {
                for (ri, row) in self.rows.iter().enumerate() {
                    let k = row[ci].kind();
                    if k != CellKind::Null && k != kind {
                        return Err(TableError::KindMismatch {
                            column: c.name.clone(),
                            row: ri,
                            declared: kind,
                            found: k,
                        });
                    }
                }
            }
        }
        if let Some(ids) = &self.row_ids {
            if ids.len() != self.rows.len() {
                return Err(TableError::RowIds("row_ids length differs from row count".into()));
            }
            let unique: HashSet<_> = ids.iter().collect();
            if unique.len() != ids.len() {
                return Err(TableError::RowIds("row_ids are not unique".into()));
            }
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_rows(), self.num_columns())
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize, TableError> {
        self.column_index(name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column_index(name).is_some()
    }

    /// Clones a column's cells in row order.
    pub fn column_values(&self, name: &str) -> Result<Vec<CellValue>, TableError> {
        let idx = self.require_column(name)?;
        Ok(self.rows.iter().map(|r| r[idx].clone()).collect())
    }

    pub fn cell(&self, row: usize, name: &str) -> Option<&CellValue> {
        let idx = self.column_index(name)?;
        self.rows.get(row).map(|r| &r[idx])
    }

    /// Appends a column, or replaces the cells of an existing one in place.
    pub fn set_column(&mut self, column: Column, values: Vec<CellValue>) -> Result<(), TableError> {
        if values.len() != self.rows.len() {
            return Err(TableError::RaggedRow {
                row: values.len().min(self.rows.len()),
                expected: self.rows.len(),
                found: values.len(),
            });
        }
        match self.column_index(&column.name) {
            Some(idx) => {
                self.columns[idx] = column;
                for (row, v) in self.rows.iter_mut().zip(values) {
                    row[idx] = v;
                }
            }
            None => {
                self.columns.push(column);
                for (row, v) in self.rows.iter_mut().zip(values) {
                    row.push(v);
                }
            }
        }
        Ok(())
    }

    /// Inserts a new column at `position`.
    pub fn insert_column(
        &mut self,
        position: usize,
        column: Column,
        values: Vec<CellValue>,
    ) -> Result<(), TableError> {
        if self.has_column(&column.name) {
            return Err(TableError::DuplicateColumns(vec![column.name]));
        }
        if values.len() != self.rows.len() {
            return Err(TableError::RaggedRow {
                row: 0,
                expected: self.rows.len(),
                found: values.len(),
            });
        }
        let pos = position.min(self.columns.len());
        self.columns.insert(pos, column);
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.insert(pos, v);
        }
        Ok(())
    }

    pub fn remove_column(&mut self, name: &str) -> Result<Vec<CellValue>, TableError> {
        let idx = self.require_column(name)?;
        self.columns.remove(idx);
        Ok(self.rows.iter_mut().map(|r| r.remove(idx)).collect())
    }

    /// A table holding only the named columns, in the given order, sharing
    /// row identity with `self`.
    pub fn project(&self, names: &[String]) -> Result<Table, TableError> {
        let mut seen = HashSet::new();
        let dups: Vec<String> = names.iter().filter(|n| !seen.insert(n.as_str())).cloned().collect();
        if !dups.is_empty() {
            return Err(TableError::DuplicateColumns(dups));
        }
        let idxs = names
            .iter()
            .map(|n| self.require_column(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Table {
            table_id: self.table_id.clone(),
            title: self.title.clone(),
            columns: idxs.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idxs.iter().map(|&i| r[i].clone()).collect())
                .collect(),
            row_ids: self.row_ids.clone(),
        })
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn take_rows(&self, indices: &[usize]) -> Table {
        Table {
            table_id: self.table_id.clone(),
            title: self.title.clone(),
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: self
                .row_ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i]).collect()),
        }
    }

    pub fn schema(&self) -> SchemaDescriptor {
        SchemaDescriptor {
            columns: self
                .columns
                .iter()
                .map(|c| SchemaColumn {
                    name: c.name.clone(),
                    role: c.role,
                    kind: c.declared_kind,
                })
                .collect(),
            primary_key: Vec::new(),
        }
    }

    /// Like [`Table::schema`], but every column carries a kind: the declared
    /// one, else the single kind its non-null cells share, else text.
    pub fn typed_schema(&self) -> SchemaDescriptor {
        let mut schema = self.schema();
        for (i, c) in schema.columns.iter_mut().enumerate() {
            c.kind = Some(super::sql::effective_kind(self, i));
        }
        schema
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaColumn {
    pub name: String,
    pub role: ColumnRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CellKind>,
}

/// Column list plus primary key; the target schema a plan promises.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub columns: Vec<SchemaColumn>,
    #[serde(default)]
    pub primary_key: Vec<String>,
}

impl SchemaDescriptor {
    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    /// Checks that the key columns exist and, against `table`, that key
    /// tuples are unique.
    pub fn check_primary_key(&self, table: &Table) -> Result<(), TableError> {
        for k in &self.primary_key {
            if !self.contains(k) {
                return Err(TableError::UnknownColumn(k.clone()));
            }
        }
        if self.primary_key.is_empty() {
            return Ok(());
        }
        let idxs = self
            .primary_key
            .iter()
            .map(|k| table.require_column(k))
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen: HashMap<Vec<String>, usize> = HashMap::new();
        for (ri, row) in table.rows.iter().enumerate() {
            let key: Vec<String> = idxs
                .iter()
                .map(|&i| format!("{}:{}", row[i].kind(), row[i].to_text()))
                .collect();
            if let Some(first) = seen.insert(key, ri) {
                return Err(TableError::DuplicateKey { first, second: ri });
            }
        }
        Ok(())
    }
}
