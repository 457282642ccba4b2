// SPDX-License-Identifier: Apache-2.0

//! GitHub pipe tables, the wire format tables take inside prompts.

use super::cell::CellValue;
use super::csv_io::{check_unique, unnamed_column};
use super::model::{Column, Table};
use super::TableError;

/// Rows emitted into prompts unless overridden.
pub const DEFAULT_MAX_ROWS: usize = 50;

/// Serializes the header, the separator and the first `max_rows` rows.
///
/// Pipes inside cells are escaped as `\|`, newlines become `<br>`. Cell text
/// is otherwise passed through untruncated.
pub fn serialize_markdown(table: &Table, max_rows: usize) -> String {
    if table.columns.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    push_row(&mut out, table.columns.iter().map(|c| escape(&c.name)));
    push_row(&mut out, table.columns.iter().map(|_| "---".to_string()));
    for row in table.rows.iter().take(max_rows) {
        push_row(&mut out, row.iter().map(|c| escape(&c.to_text())));
    }
    out
}

fn push_row(out: &mut String, cells: impl Iterator<Item = String>) {
    out.push('|');
    for c in cells {
        out.push(' ');
        out.push_str(&c);
        out.push_str(" |");
    }
    out.push('\n');
}

fn escape(s: &str) -> String {
    s.replace('|', "\\|").replace("\r\n", "<br>").replace('\n', "<br>")
}

/// Splits a pipe-table line on unescaped pipes, dropping the optional outer
/// pipes and trimming padding around each cell.
fn split_row(line: &str) -> Vec<String> {
    let line = line.trim_matches(|c| c == ' ' || c == '\t');
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&'|') => {
                chars.next();
                cur.push('|');
            }
            '|' => cells.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    cells.push(cur);
    if line.starts_with('|') && !cells.is_empty() {
        cells.remove(0);
    }
    if line.ends_with('|') && !line.ends_with("\\|") && !cells.is_empty() {
        cells.pop();
    }
    cells
        .into_iter()
        .map(|c| c.trim_matches(|ch| ch == ' ' || ch == '\t').to_string())
        .collect()
}

fn is_separator(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells.iter().all(|c| {
            let c = c.trim();
            let inner = c.strip_prefix(':').unwrap_or(c);
            let inner = inner.strip_suffix(':').unwrap_or(inner);
            !inner.is_empty() && inner.chars().all(|ch| ch == '-')
        })
}

/// Parses a GitHub-style pipe table. All cells are ingested as `Text`.
pub fn ingest_markdown(text: &str) -> Result<Table, TableError> {
    let mut lines = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .skip_while(|l| l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| TableError::Markdown("empty input".into()))?;
    let names = split_row(header);
    let sep = lines
        .next()
        .ok_or_else(|| TableError::Markdown("missing separator row".into()))?;
    let sep_cells = split_row(sep);
    if !is_separator(&sep_cells) {
        return Err(TableError::Markdown("missing separator row".into()));
    }
    if sep_cells.len() != names.len() {
        return Err(TableError::Markdown(format!(
            "separator has {} cells, header has {}",
            sep_cells.len(),
            names.len()
        )));
    }
    let names: Vec<String> = names
        .into_iter()
        .enumerate()
        .map(|(i, n)| if n.is_empty() { unnamed_column(i) } else { n })
        .collect();
    check_unique(&names)?;

    let mut rows = Vec::new();
    let body: Vec<&str> = lines.collect();
    let last = body.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |p| p + 1);
    for (i, line) in body[..last].iter().enumerate() {
        let cells = split_row(line);
        if cells.len() != names.len() {
            return Err(TableError::RaggedRecord {
                record: i + 1,
                expected: names.len(),
                found: cells.len(),
            });
        }
        rows.push(cells.into_iter().map(CellValue::Text).collect());
    }
    Table::new("table", names.into_iter().map(Column::new).collect(), rows)
}
