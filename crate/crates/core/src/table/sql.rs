// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;
use std::fmt::Write as _;

use super::cell::{format_float, CellKind, CellValue};
use super::model::Table;
use super::TableError;

#[derive(Debug, Clone)]
pub struct SqlOptions {
    pub table_name: String,
}

impl Default for SqlOptions {
    fn default() -> Self {
        SqlOptions {
            table_name: "t".to_string(),
        }
    }
}

const RESERVED: &[&str] = &[
    "all", "and", "as", "asc", "between", "by", "case", "check", "column", "create", "default",
    "delete", "desc", "distinct", "drop", "else", "end", "exists", "from", "group", "having", "in",
    "index", "insert", "into", "is", "join", "key", "like", "limit", "not", "null", "on", "or",
    "order", "primary", "references", "select", "set", "table", "then", "to", "union", "unique",
    "update", "values", "when", "where", "with",
];

/// Lowercases, maps runs of non-alphanumerics to one `_`, and prefixes `c_`
/// when the result starts with a digit or is a reserved word.
pub fn sanitize_identifier(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    if out.is_empty() || out == "_" {
        return "c".to_string();
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) || RESERVED.contains(&out.as_str()) {
        out.insert_str(0, "c_");
    }
    out
}

/// Sanitized, collision-free identifiers for a list of names.
pub(crate) fn unique_identifiers<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut used = HashSet::new();
    names
        .into_iter()
        .map(|n| {
            let base = sanitize_identifier(n);
            let mut candidate = base.clone();
            let mut k = 2;
            while !used.insert(candidate.clone()) {
                candidate = format!("{base}_{k}");
                k += 1;
            }
            candidate
        })
        .collect()
}

/// Effective kind of a column: the declared kind, else the single kind
/// shared by all non-null cells, else `Text`.
pub(crate) fn effective_kind(table: &Table, col: usize) -> CellKind {
    if let Some(k) = table.columns[col].declared_kind {
        return k;
    }
    let mut kind = None;
    for row in &table.rows {
        let k = row[col].kind();
        if k == CellKind::Null {
            continue;
        }
        match kind {
            None => kind = Some(k),
            Some(prev) if prev == k => {}
            Some(_) => return CellKind::Text,
        }
    }
    kind.unwrap_or(CellKind::Text)
}

fn sql_type(kind: CellKind) -> &'static str {
    match kind {
        CellKind::Integer => "INTEGER",
        CellKind::Float => "REAL",
        CellKind::Boolean => "BOOLEAN",
        _ => "TEXT",
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn literal(v: &CellValue, kind: CellKind) -> String {
    match (v, kind) {
        (CellValue::Null, _) => "NULL".to_string(),
        (CellValue::Integer(i), CellKind::Integer) => i.to_string(),
        (CellValue::Float(f), CellKind::Float) => format_float(*f),
        (CellValue::Boolean(b), CellKind::Boolean) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        (other, _) => quote(&other.to_text()),
    }
}

/// Renders one `CREATE TABLE` plus one `INSERT` per row. A comment header
/// maps each SQL identifier back to its source column name.
pub fn export_sql(table: &Table, options: &SqlOptions) -> Result<String, TableError> {
    if table.columns.is_empty() {
        return Err(TableError::NoColumns);
    }
    let idents = unique_identifiers(table.column_names());
    let kinds: Vec<CellKind> = (0..table.num_columns()).map(|i| effective_kind(table, i)).collect();
    let tname = sanitize_identifier(&options.table_name);

    let mut out = String::new();
    out.push_str("-- column mapping (identifier <- source name)\n");
    for (ident, col) in idents.iter().zip(&table.columns) {
        let _ = writeln!(out, "-- {ident} <- {}", serde_json::to_string(&col.name).unwrap_or_default());
    }
    let defs: Vec<String> = idents
        .iter()
        .zip(&kinds)
        .map(|(i, k)| format!("{i} {}", sql_type(*k)))
        .collect();
    let _ = writeln!(out, "CREATE TABLE {tname} ({});", defs.join(", "));
    for row in &table.rows {
        let vals: Vec<String> = row.iter().zip(&kinds).map(|(v, k)| literal(v, *k)).collect();
        let _ = writeln!(out, "INSERT INTO {tname} VALUES ({});", vals.join(", "));
    }
    Ok(out)
}
