// SPDX-License-Identifier: Apache-2.0

//! Hierarchical tables: nested column headers and indented row groups,
//! flattened into one flat table plus the metadata needed to undo it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{CellValue, Column, Table, TableError};

pub const HEADER_JOIN: &str = " / ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<HeaderNode>,
}

impl HeaderNode {
    pub fn leaf(label: impl Into<String>) -> Self {
        HeaderNode { label: label.into(), children: Vec::new() }
    }

    pub fn group(label: impl Into<String>, children: Vec<HeaderNode>) -> Self {
        HeaderNode { label: label.into(), children }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum RowNode {
    Group { label: String, children: Vec<RowNode> },
    Leaf { cells: Vec<CellValue> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalTable {
    pub table_id: String,
    pub title: String,
    pub header: Vec<HeaderNode>,
    pub rows: Vec<RowNode>,
}

/// What [`unflatten`] needs to rebuild the trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlattenMeta {
    /// Number of `level_*` columns emitted first.
    pub row_depth: usize,
    /// Per leaf column, the header node index at each depth (preorder).
    pub header_paths: Vec<Vec<usize>>,
    /// Header labels by preorder node index.
    pub header_labels: Vec<String>,
    /// Per data row, the row-group node index at each depth (preorder).
    pub row_paths: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlattenError {
    #[error("header has no leaf columns")]
    EmptyHeader,
    #[error("row {row} has {found} cells, header has {expected} leaves")]
    RowWidth { row: usize, expected: usize, found: usize },
    #[error("metadata does not match the table: {0}")]
    Meta(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

pub fn level_column(level: usize) -> String {
    format!("level_{level}")
}

fn header_paths(nodes: &[HeaderNode], prefix: &mut Vec<usize>, labels: &mut Vec<String>, out: &mut Vec<Vec<usize>>) {
    for n in nodes {
        let id = labels.len();
        labels.push(n.label.clone());
        prefix.push(id);
        if n.children.is_empty() {
            out.push(prefix.clone());
        } else {
            header_paths(&n.children, prefix, labels, out);
        }
        prefix.pop();
    }
}

fn row_paths(nodes: &[RowNode], prefix: &mut Vec<usize>, labels: &mut Vec<String>, out: &mut Vec<(Vec<usize>, Vec<CellValue>)>) {
    for n in nodes {
        match n {
            RowNode::Leaf { cells } => out.push((prefix.clone(), cells.clone())),
            RowNode::Group { label, children } if children.is_empty() => {
                labels.push(label.clone());
            }
            RowNode::Group { label, children } => {
                prefix.push(labels.len());
                labels.push(label.clone());
                row_paths(children, prefix, labels, out);
                prefix.pop();
            }
        }
    }
}

/// Flattens `h`: header paths joined with `" / "`, row groups emitted as
/// leading `level_1..level_d` columns. Ragged trees are padded with empty
/// labels and noted in the metadata.
pub fn flatten_hierarchy(h: &HierarchicalTable) -> Result<(Table, FlattenMeta), FlattenError> {
    let mut header_labels = Vec::new();
    let mut hpaths = Vec::new();
    header_paths(&h.header, &mut Vec::new(), &mut header_labels, &mut hpaths);
    if hpaths.is_empty() {
        return Err(FlattenError::EmptyHeader);
    }
    let mut warnings = Vec::new();
    let hdepth = hpaths.iter().map(Vec::len).max().unwrap_or(0);
    if hpaths.iter().any(|p| p.len() != hdepth) {
        warnings.push(format!("ragged header: leaves at depths other than {hdepth} padded with empty labels"));
    }

    let mut group_labels = Vec::new();
    let mut leaves = Vec::new();
    row_paths(&h.rows, &mut Vec::new(), &mut group_labels, &mut leaves);
    let rdepth = leaves.iter().map(|(p, _)| p.len()).max().unwrap_or(0);
    let referenced: std::collections::HashSet<usize> = leaves.iter().flat_map(|(p, _)| p.iter().copied()).collect();
    let empty_groups = (0..group_labels.len()).filter(|g| !referenced.contains(g)).count();
    if empty_groups > 0 {
        warnings.push(format!("{empty_groups} empty row group(s) have no rows and are dropped"));
    }
    if leaves.iter().any(|(p, _)| p.len() != rdepth) {
        warnings.push(format!("ragged row groups: rows above depth {rdepth} get empty level labels"));
    }

    let mut names: Vec<String> = (1..=rdepth).map(level_column).collect();
    for p in &hpaths {
        let mut labels: Vec<&str> = p.iter().map(|&i| header_labels[i].as_str()).collect();
        labels.resize(hdepth, "");
        let mut name = labels.join(HEADER_JOIN);
        let base = name.clone();
        let mut n = 2;
        while name.is_empty() || names.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        if name != base {
            warnings.push(format!("column `{base}` renamed to `{name}` to stay unique"));
        }
        names.push(name);
    }

    let mut rows = Vec::with_capacity(leaves.len());
    for (r, (path, cells)) in leaves.iter().enumerate() {
        if cells.len() != hpaths.len() {
            return Err(FlattenError::RowWidth { row: r, expected: hpaths.len(), found: cells.len() });
        }
        let mut row: Vec<CellValue> = (0..rdepth)
            .map(|d| path.get(d).map_or_else(|| CellValue::text(""), |&g| CellValue::text(group_labels[g].clone())))
            .collect();
        row.extend(cells.iter().cloned());
        rows.push(row);
    }
    let columns = names.into_iter().map(Column::new).collect();
    let table = Table::new(h.table_id.clone(), columns, rows)?.with_title(h.title.clone());
    let meta = FlattenMeta {
        row_depth: rdepth,
        header_paths: hpaths,
        header_labels,
        row_paths: leaves.into_iter().map(|(p, _)| p).collect(),
        warnings,
    };
    Ok((table, meta))
}

/// Inverse of [`flatten_hierarchy`].
pub fn unflatten(table: &Table, meta: &FlattenMeta) -> Result<HierarchicalTable, FlattenError> {
    let leaf_cols = meta.header_paths.len();
    if table.num_columns() != meta.row_depth + leaf_cols {
        return Err(FlattenError::Meta(format!("expected {} columns", meta.row_depth + leaf_cols)));
    }
    if table.num_rows() != meta.row_paths.len() {
        return Err(FlattenError::Meta(format!("expected {} rows", meta.row_paths.len())));
    }

    // Headers: group consecutive leaves that share a node id at each depth.
    let header = build_header(&meta.header_paths, &meta.header_labels, 0, 0, leaf_cols);

    // Rows: same grouping on row-group node ids.
    let mut group_labels: std::collections::HashMap<usize, String> = std::collections::HashMap::new();
    for (r, path) in meta.row_paths.iter().enumerate() {
        for (d, &g) in path.iter().enumerate() {
            group_labels.entry(g).or_insert_with(|| table.rows[r][d].to_text());
        }
    }
    let label_of = |g: usize| group_labels.get(&g).cloned().unwrap_or_default();
    let leaves: Vec<Vec<CellValue>> = table.rows.iter().map(|r| r[meta.row_depth..].to_vec()).collect();
    let rows = build_rows(&meta.row_paths, &leaves, 0, 0, leaves.len(), &label_of);
    Ok(HierarchicalTable {
        table_id: table.table_id.clone(),
        title: table.title.clone(),
        header,
        rows,
    })
}

fn build_header(paths: &[Vec<usize>], labels: &[String], depth: usize, start: usize, end: usize) -> Vec<HeaderNode> {
    let mut out = Vec::new();
    let mut i = start;
    while i < end {
        let id = paths[i][depth];
        let mut j = i;
        while j < end && paths[j].get(depth) == Some(&id) {
            j += 1;
        }
        let children = if paths[i].len() > depth + 1 {
            build_header(paths, labels, depth + 1, i, j)
        } else {
            Vec::new()
        };
        out.push(HeaderNode { label: labels[id].clone(), children });
        i = j;
    }
    out
}

fn build_rows(paths: &[Vec<usize>], leaves: &[Vec<CellValue>], depth: usize, start: usize, end: usize, label_of: &impl Fn(usize) -> String) -> Vec<RowNode> {
    let mut out = Vec::new();
    let mut i = start;
    while i < end {
        match paths[i].get(depth) {
            None => {
                out.push(RowNode::Leaf { cells: leaves[i].clone() });
                i += 1;
            }
            Some(&g) => {
                let mut j = i;
                while j < end && paths[j].get(depth) == Some(&g) {
                    j += 1;
                }
                out.push(RowNode::Group {
                    label: label_of(g),
                    children: build_rows(paths, leaves, depth + 1, i, j, label_of),
                });
                i = j;
            }
        }
    }
    out
}
