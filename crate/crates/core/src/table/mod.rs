// SPDX-License-Identifier: Apache-2.0

//! In-memory tables: cell values, ingestion from CSV and pipe-table
//! markdown, markdown serialization for prompts, and SQL export.

mod cell;
mod csv_io;
mod markdown;
mod model;
mod sql;

pub use cell::{format_date, format_float, parse_plain_number, CellKind, CellValue};
pub use csv_io::{ingest_csv, read_typed_csv, write_csv, CsvOptions};
pub use markdown::{ingest_markdown, serialize_markdown, DEFAULT_MAX_ROWS};
pub use model::{Column, ColumnRole, SchemaColumn, SchemaDescriptor, Table};
pub use sql::{export_sql, sanitize_identifier, SqlOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("input is not valid UTF-8: {0}")]
    InvalidUtf8(String),
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    /// Ingestion-time ragged record; `record` counts the header as record 0.
    #[error("record {record}: expected {expected} cells, found {found}")]
    RaggedRecord {
        record: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column names: {}", .0.join(", "))]
    DuplicateColumns(Vec<String>),
    #[error("column names must be non-empty")]
    EmptyColumnName,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` row {row}: declared {declared}, found {found}")]
    KindMismatch {
        column: String,
        row: usize,
        declared: CellKind,
        found: CellKind,
    },
    #[error("invalid row ids: {0}")]
    RowIds(String),
    #[error("duplicate primary key in rows {first} and {second}")]
    DuplicateKey { first: usize, second: usize },
    #[error("markdown: {0}")]
    Markdown(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("table has no columns")]
    NoColumns,
}
