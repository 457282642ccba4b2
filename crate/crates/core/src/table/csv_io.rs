// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::collections::HashSet;

use super::cell::{parse_plain_number, CellKind, CellValue};
use super::model::{Column, SchemaDescriptor, Table};
use super::TableError;

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub quote: u8,
    pub has_header: bool,
    pub table_id: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            quote: b'"',
            has_header: true,
            table_id: "table".to_string(),
        }
    }
}

/// Name given to a header cell that is empty.
pub(crate) fn unnamed_column(index: usize) -> String {
    format!("unnamed_{index}")
}

pub(crate) fn strip_bom(bytes: &[u8]) -> &[u8] {
    bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes)
}

/// Reads RFC-4180 style CSV. Every cell is ingested as `Text`, byte-exact.
pub fn ingest_csv(bytes: &[u8], options: &CsvOptions) -> Result<Table, TableError> {
    let bytes = strip_bom(bytes);
    std::str::from_utf8(bytes).map_err(|e| TableError::InvalidUtf8(e.to_string()))?;

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .quote(options.quote)
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }

    let (names, data, first_record) = if options.has_header {
        let mut it = records.into_iter();
        match it.next() {
            Some(header) => (header, it.collect::<Vec<_>>(), 1),
            None => (Vec::new(), Vec::new(), 1),
        }
    } else {
        let width = records.first().map_or(0, Vec::len);
        let names = (1..=width).map(|i| format!("column_{i}")).collect();
        (names, records, 0)
    };

    let names: Vec<String> = names
        .into_iter()
        .enumerate()
        .map(|(i, n)| if n.is_empty() { unnamed_column(i) } else { n })
        .collect();
    check_unique(&names)?;

    let mut rows = Vec::with_capacity(data.len());
    for (i, rec) in data.into_iter().enumerate() {
        if rec.len() != names.len() {
            return Err(TableError::RaggedRecord {
                record: i + first_record,
                expected: names.len(),
                found: rec.len(),
            });
        }
        rows.push(rec.into_iter().map(CellValue::Text).collect());
    }

    let columns = names.into_iter().map(Column::new).collect();
    Table::new(options.table_id.clone(), columns, rows)
}

pub(crate) fn check_unique(names: &[String]) -> Result<(), TableError> {
    let mut seen = HashSet::new();
    let dups: BTreeSet<String> = names
        .iter()
        .filter(|n| !seen.insert(n.as_str()))
        .cloned()
        .collect();
    if dups.is_empty() {
        Ok(())
    } else {
        Err(TableError::DuplicateColumns(dups.into_iter().collect()))
    }
}

/// Writes cells in their canonical text form. `Null` becomes an empty field.
pub fn write_csv(table: &Table) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(table.columns.iter().map(|c| c.name.as_str()))
        .expect("writing to a Vec cannot fail");
    for row in &table.rows {
        writer
            .write_record(row.iter().map(CellValue::to_text))
            .expect("writing to a Vec cannot fail");
    }
    let bytes = writer.into_inner().expect("flush to Vec");
    String::from_utf8(bytes).expect("cells are UTF-8")
}

/// Reads a CSV previously produced by [`write_csv`] back into typed cells
/// using the kinds recorded in `schema`. Empty fields in non-text columns
/// read back as `Null`.
pub fn read_typed_csv(bytes: &[u8], schema: &SchemaDescriptor, table_id: &str) -> Result<Table, TableError> {
    let opts = CsvOptions {
        table_id: table_id.to_string(),
        ..CsvOptions::default()
    };
    let text = ingest_csv(bytes, &opts)?;
    let mut columns = Vec::with_capacity(text.columns.len());
    let mut kinds = Vec::with_capacity(text.columns.len());
    for col in &text.columns {
        let sc = schema
            .columns
            .iter()
            .find(|c| c.name == col.name)
            .ok_or_else(|| TableError::UnknownColumn(col.name.clone()))?;
        let mut c = Column::new(&col.name).with_role(sc.role);
        c.declared_kind = sc.kind;
        columns.push(c);
        kinds.push(sc.kind);
    }
    let rows = text
        .rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .zip(&kinds)
                .map(|(cell, kind)| {
                    let s = cell.as_text().unwrap_or_default();
                    decode_typed(s, *kind)
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    Table::new(table_id, columns, rows).map(|t| t.with_title(text.title))
}

fn decode_typed(s: &str, kind: Option<CellKind>) -> Result<CellValue, TableError> {
    let bad = || TableError::Csv(format!("cannot decode `{s}` as {}", kind.map_or("text", |k| k.as_str())));
    Ok(match kind {
        None | Some(CellKind::Text) => CellValue::text(s),
        Some(_) if s.is_empty() => CellValue::Null,
        Some(CellKind::Null) => CellValue::Null,
        Some(CellKind::Boolean) => match s {
            "true" => CellValue::Boolean(true),
            "false" => CellValue::Boolean(false),
            _ => return Err(bad()),
        },
        Some(CellKind::Integer) => CellValue::Integer(s.parse().map_err(|_| bad())?),
        Some(CellKind::Float) => match parse_plain_number(s) {
            Some(CellValue::Float(f)) => CellValue::Float(f),
            Some(CellValue::Integer(i)) => CellValue::Float(i as f64),
            _ => return Err(bad()),
        },
        Some(CellKind::Date) => CellValue::Date(
            chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| bad())?,
        ),
    })
}
