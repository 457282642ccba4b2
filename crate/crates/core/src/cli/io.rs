// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde_json::Value;

use tablecanon::structure::{flatten_hierarchy, HierarchicalTable};
use tablecanon::table::{ingest_csv, ingest_markdown, CsvOptions, Table};

pub const TABLE_EXTENSIONS: [&str; 4] = ["csv", "md", "markdown", "json"];

pub fn default_table_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "table".to_string())
}

/// Reads a table by extension: CSV, pipe-table markdown, or a hierarchical
/// table as JSON (flattened on load).
pub fn read_table(path: &Path, table_id: Option<&str>) -> Result<Table, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let id = table_id.map(str::to_string).unwrap_or_else(|| default_table_id(path));
    let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    let table = match ext.as_str() {
        "md" | "markdown" => {
            let text = String::from_utf8(bytes).map_err(|e| format!("{}: {e}", path.display()))?;
            let mut t = ingest_markdown(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            t.table_id = id;
            t
        }
        "json" => {
            let h: HierarchicalTable =
                serde_json::from_slice(&bytes).map_err(|e| format!("{}: not a hierarchical table: {e}", path.display()))?;
            let (mut t, meta) = flatten_hierarchy(&h).map_err(|e| format!("{}: {e}", path.display()))?;
            for w in &meta.warnings {
                log::warn!("{}: {w}", path.display());
            }
            t.table_id = id;
            t
        }
        _ => ingest_csv(&bytes, &CsvOptions { table_id: id, ..CsvOptions::default() })
            .map_err(|e| format!("{}: {e}", path.display()))?,
    };
    Ok(table)
}

/// Table files directly inside `dir`, sorted by name.
pub fn table_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| format!("cannot list {}: {e}", dir.display()))? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
        if path.is_file() && TABLE_EXTENSIONS.contains(&ext.as_str()) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Parses JSON Lines, skipping blank lines.
pub fn read_jsonl(path: &Path) -> Result<Vec<Value>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1)))
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
