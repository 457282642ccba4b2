// SPDX-License-Identifier: Apache-2.0

//! Losslessness audit and raw-table recovery.
//!
//! Every raw column must be reproducible from the canonical table: kept
//! as-is, rebuilt by the inverse of the step that consumed it, or copied in
//! a `<name>_raw` snapshot. Candidate rules are derived from the plan and
//! each one is checked by actually rebuilding the column, so a column is
//! only ever reported captured when recovery is exact.

use std::collections::BTreeMap;

use regex_syntax::hir::{Hir, HirKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dates::DateLayout;
use crate::ops::params::{GroupRef, OpParams};
use crate::ops::{execute_plan, snapshot_name, ExecError, ExecPolicy, Execution, StepTrace, RAW_ROW_ID_COLUMN, ROW_ID_COLUMN};
use crate::plan::TransformationPlan;
use crate::table::{format_float, CellValue, Column, ColumnRole, Table};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("audit is not lossless; nothing to recover")]
    NotLossless,
    #[error("canonical table lacks column `{0}` required for recovery")]
    MissingColumn(String),
    #[error("row alignment failed: {0}")]
    Alignment(String),
}

/// One piece of a rebuilt string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplatePart {
    Literal(String),
    Column(String),
}

/// A deterministic inverse that rebuilds one raw column from canonical
/// columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RecoveryRule {
    /// Canonical text form of a single column.
    TextForm { column: String },
    /// Number re-rendered (optionally comma-grouped) then the unit.
    NumberUnit {
        value: String,
        unit: Option<String>,
        grouped: bool,
        separator: String,
    },
    /// Literal text and column values concatenated.
    Template { parts: Vec<TemplatePart> },
    /// Date rendered in a fixed layout.
    DateText { column: String, layout: DateLayout },
    /// Canonical text looked up in an inverse table, else passed through.
    InverseMap { column: String, pairs: Vec<(String, String)> },
    /// Plain substring substitution.
    StringReplace { column: String, find: String, replace: String },
    /// Field `index` of `column` split on `separator` into `count` fields.
    Split {
        column: String,
        separator: String,
        index: usize,
        count: usize,
    },
    /// The category whose indicator is true.
    OneHot { columns: Vec<(String, String)> },
}

impl RecoveryRule {
    pub fn columns(&self) -> Vec<String> {
        match self {
            RecoveryRule::TextForm { column }
            | RecoveryRule::DateText { column, .. }
            | RecoveryRule::InverseMap { column, .. }
            | RecoveryRule::StringReplace { column, .. }
            | RecoveryRule::Split { column, .. } => vec![column.clone()],
            RecoveryRule::NumberUnit { value, unit, .. } => std::iter::once(value.clone()).chain(unit.clone()).collect(),
            RecoveryRule::Template { parts } => parts
                .iter()
                .filter_map(|p| match p {
                    TemplatePart::Column(c) => Some(c.clone()),
                    TemplatePart::Literal(_) => None,
                })
                .collect(),
            RecoveryRule::OneHot { columns } => columns.iter().map(|(c, _)| c.clone()).collect(),
        }
    }

    /// Rebuilt raw cell for canonical row `row`.
    fn recover(&self, t: &Table, row: usize) -> CellValue {
        let text = |c: &str| t.cell(row, c).map(CellValue::to_text).unwrap_or_default();
        let cell = |c: &str| t.cell(row, c).cloned().unwrap_or(CellValue::Null);
        match self {
            RecoveryRule::TextForm { column } => CellValue::Text(text(column)),
            RecoveryRule::NumberUnit { value, unit, grouped, separator } => {
                let unit = unit.as_deref().map(cell).unwrap_or(CellValue::Null);
                let number = match cell(value) {
                    CellValue::Null => None,
                    v => Some(render_number(&v, *grouped)),
                };
                CellValue::Text(match (number, unit.is_null()) {
                    (None, true) => String::new(),
                    (None, false) => return CellValue::Null,
                    (Some(n), true) => n,
                    (Some(n), false) => format!("{n}{separator}{}", unit.to_text()),
                })
            }
            RecoveryRule::Template { parts } => {
                let mut out = String::new();
                for p in parts {
                    match p {
                        TemplatePart::Literal(l) => out.push_str(l),
                        TemplatePart::Column(c) => match cell(c) {
                            CellValue::Null => return CellValue::Null,
                            v => out.push_str(&v.to_text()),
                        },
                    }
                }
                CellValue::Text(out)
            }
            RecoveryRule::DateText { column, layout } => match cell(column) {
                CellValue::Null => CellValue::text(""),
                CellValue::Date(d) => CellValue::Text(layout.format(d)),
                CellValue::Text(s) => match chrono::NaiveDate::parse_from_str(&s, "%Y-%m-%d") {
                    Ok(d) => CellValue::Text(layout.format(d)),
                    Err(_) => CellValue::Null,
                },
                _ => CellValue::Null,
            },
            RecoveryRule::InverseMap { column, pairs } => {
                let t = text(column);
                CellValue::Text(pairs.iter().find(|(k, _)| *k == t).map_or(t, |(_, v)| v.clone()))
            }
            RecoveryRule::StringReplace { column, find, replace } => CellValue::Text(text(column).replace(find, replace)),
            RecoveryRule::Split { column, separator, index, count } => match cell(column) {
                CellValue::Null => CellValue::Null,
                v => {
                    let s = v.to_text();
                    let parts: Vec<&str> = s.split(separator.as_str()).collect();
                    if parts.len() == *count {
                        CellValue::text(parts[*index])
                    } else {
                        CellValue::Null
                    }
                }
            },
            RecoveryRule::OneHot { columns } => {
                let hot: Vec<&String> = columns
                    .iter()
                    .filter(|(c, _)| matches!(cell(c), CellValue::Boolean(true)) || text(c) == "true")
                    .map(|(_, cat)| cat)
                    .collect();
                match hot.as_slice() {
                    [one] => CellValue::text(one.as_str()),
                    [] => CellValue::Null,
                    _ => CellValue::Null,
                }
            }
        }
    }
}

fn render_number(v: &CellValue, grouped: bool) -> String {
    let s = match v {
        CellValue::Float(f) => format_float(*f),
        other => other.to_text(),
    };
    if !grouped {
        return s;
    }
    let (sign, body) = s.strip_prefix('-').map_or(("", s.as_str()), |b| ("-", b));
    let (int, frac) = body.split_once('.').map_or((body, None), |(i, f)| (i, Some(f)));
    if !int.bytes().all(|b| b.is_ascii_digit()) {
        return s;
    }
    let mut out = String::from(sign);
    for (i, ch) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    out
}

/// How a raw column is accounted for in the canonical table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ColumnStatus {
    /// Serialized as `canonical`: the key `column` names the raw column.
    Retained {
        #[serde(rename = "canonical")]
        column: String,
    },
    FullyCaptured { by: Vec<String>, recovery: RecoveryRule },
    Snapshot {
        #[serde(rename = "snapshot")]
        column: String,
    },
    Lost,
}

impl ColumnStatus {
    pub fn is_ok(&self) -> bool {
        !matches!(self, ColumnStatus::Lost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    /// Raw row index.
    pub row: usize,
    pub expected: CellValue,
    pub found: CellValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAudit {
    pub column: String,
    #[serde(flatten)]
    pub status: ColumnStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_mismatch: Option<Mismatch>,
}

/// How canonical rows map back to raw rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case")]
pub enum RowAlignment {
    Position,
    Column { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossAudit {
    pub table_id: String,
    pub raw_rows: usize,
    pub alignment: RowAlignment,
    /// Every raw row appears exactly once in the canonical table.
    pub rows_complete: bool,
    pub columns: Vec<ColumnAudit>,
    /// Raw columns that need a snapshot to become recoverable.
    pub snapshots_needed: Vec<String>,
    pub lossless: bool,
}

impl LossAudit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audits always serialize")
    }
}

/// Canonical row → raw row, per alignment. `None` when the mapping is not
/// usable.
fn alignment_map(canonical: &Table, alignment: &RowAlignment, raw_rows: usize) -> Option<Vec<usize>> {
    match alignment {
        RowAlignment::Position => (canonical.num_rows() == raw_rows).then(|| (0..raw_rows).collect()),
        RowAlignment::Column { name } => canonical
            .column_values(name)
            .ok()?
            .iter()
            .map(|c| match c {
                CellValue::Integer(i) if *i >= 0 && (*i as usize) < raw_rows => Some(*i as usize),
                CellValue::Text(s) => s.parse::<usize>().ok().filter(|&i| i < raw_rows),
                _ => None,
            })
            .collect(),
    }
}

fn choose_alignment(canonical: &Table, raw_rows: usize) -> (RowAlignment, Vec<usize>) {
    if let Some(ids) = &canonical.row_ids {
        let ids: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let identity = ids.len() == raw_rows && ids.iter().enumerate().all(|(i, &r)| i == r);
        if identity {
            return (RowAlignment::Position, ids);
        }
        for name in [ROW_ID_COLUMN, RAW_ROW_ID_COLUMN] {
            let a = RowAlignment::Column { name: name.to_string() };
            if alignment_map(canonical, &a, raw_rows).as_ref() == Some(&ids) {
                return (a, ids);
            }
        }
        // Rows moved and no helper column records where from.
        return (RowAlignment::Position, ids);
    }
    (RowAlignment::Position, (0..canonical.num_rows().min(raw_rows)).collect())
}

/// All names a raw column goes by after renames, oldest first.
fn aliases(plan: &TransformationPlan, raw_name: &str) -> Vec<String> {
    let mut names = vec![raw_name.to_string()];
    for step in &plan.steps {
        if let Ok(OpParams::Rename { mapping }) = OpParams::from_step(step) {
            for (old, new) in mapping {
                if names.contains(&old) && !names.contains(&new) {
                    names.push(new);
                }
            }
        }
    }
    names
}

/// Literal/capture template of `pattern`, when it is nothing but a
/// concatenation of literals and captured groups.
fn regex_template(pattern: &str, targets: &[(GroupRef, String)]) -> Option<Vec<TemplatePart>> {
    let hir = regex_syntax::Parser::new().parse(pattern).ok()?;
    let items: Vec<&Hir> = match hir.kind() {
        HirKind::Concat(items) => items.iter().collect(),
        _ => vec![&hir],
    };
    let mut parts = Vec::new();
    for h in items {
        match h.kind() {
            HirKind::Literal(lit) => parts.push(TemplatePart::Literal(String::from_utf8(lit.0.to_vec()).ok()?)),
            HirKind::Capture(cap) => {
                let col = targets.iter().find_map(|(g, c)| {
                    let hit = match g {
                        GroupRef::Index(i) => *i == cap.index as usize,
                        GroupRef::Name(n) => cap.name.as_deref() == Some(n.as_str()),
                    };
                    hit.then(|| c.clone())
                })?;
                parts.push(TemplatePart::Column(col));
            }
            HirKind::Look(_) => {}
            _ => return None,
        }
    }
    Some(parts)
}

/// Candidate inverse rules for a raw column, in preference order.
fn candidates(raw_name: &str, plan: &TransformationPlan, traces: &[StepTrace], canonical: &Table) -> Vec<RecoveryRule> {
    let names = aliases(plan, raw_name);
    let reads_alias = |s: &str| names.iter().any(|n| n == s);
    let mut out = Vec::new();
    for step in &plan.steps {
        let Ok(p) = OpParams::from_step(step) else { continue };
        match p {
            OpParams::ParseNumber { source, target, unit_target, .. } if reads_alias(&source) => {
                for grouped in [true, false] {
                    for separator in [" ", ""] {
                        out.push(RecoveryRule::NumberUnit {
                            value: target.clone(),
                            unit: unit_target.clone(),
                            grouped,
                            separator: separator.to_string(),
                        });
                    }
                }
            }
            OpParams::ExtractRegex { source, pattern, targets } if reads_alias(&source) => {
                if let Some(parts) = regex_template(&pattern, &targets) {
                    out.push(RecoveryRule::Template { parts });
                }
            }
            OpParams::ParseDateText { source, target, formats } if reads_alias(&source) => {
                for f in formats {
                    out.push(RecoveryRule::DateText {
                        column: target.clone(),
                        layout: DateLayout::Strftime { format: f },
                    });
                }
                for layout in DateLayout::builtins() {
                    out.push(RecoveryRule::DateText { column: target.clone(), layout });
                }
            }
            OpParams::MapValues { source, target, mapping, .. } if reads_alias(&source) => {
                let mut pairs: Vec<(String, String)> = Vec::new();
                let mut ambiguous = false;
                for (k, v) in &mapping {
                    let key = v.to_text();
                    if pairs.iter().any(|(x, _)| *x == key) {
                        ambiguous = true;
                    }
                    pairs.push((key, k.clone()));
                }
                if !ambiguous {
                    out.push(RecoveryRule::InverseMap { column: target, pairs });
                }
            }
            OpParams::ReplaceValue { source, target, from, to } if reads_alias(&source) && from.len() == 1 => {
                out.push(RecoveryRule::InverseMap {
                    column: target,
                    pairs: vec![(to.to_text(), from[0].clone())],
                });
            }
            OpParams::ReplaceString { source, target, pattern, replacement, regex: false } if reads_alias(&source) && !replacement.is_empty() => {
                out.push(RecoveryRule::StringReplace {
                    column: target,
                    find: replacement,
                    replace: pattern,
                });
            }
            OpParams::CombineColumns { sources, target, separator } => {
                let count = sources.len();
                for (index, s) in sources.iter().enumerate() {
                    if reads_alias(s) && !separator.is_empty() {
                        out.push(RecoveryRule::Split {
                            column: target.clone(),
                            separator: separator.clone(),
                            index,
                            count,
                        });
                    }
                }
            }
            OpParams::OneHot { source, .. } if reads_alias(&source) => {
                let details = traces
                    .iter()
                    .find(|t| t.step_id == step.step_id)
                    .and_then(|t| t.details.as_ref())
                    .and_then(|d| d.get("categories"))
                    .and_then(Value::as_object);
                if let Some(map) = details {
                    out.push(RecoveryRule::OneHot {
                        columns: map
                            .iter()
                            .map(|(c, v)| (c.clone(), v.as_str().unwrap_or_default().to_string()))
                            .collect(),
                    });
                }
            }
            _ => {}
        }
    }
    // Any column whose text form happens to match: in-place casts, copies.
    for c in &canonical.columns {
        if c.role != ColumnRole::RawSnapshot {
            out.push(RecoveryRule::TextForm { column: c.name.clone() });
        }
    }
    out.retain(|r| r.columns().iter().all(|c| canonical.has_column(c)));
    out
}

/// Compares rebuilt cells with raw; `Err` holds the first mismatch.
fn verify(raw: &Table, raw_col: usize, map: &[usize], rebuilt: impl Fn(usize) -> CellValue) -> Result<(), Mismatch> {
    let mut pairs: Vec<(usize, usize)> = map.iter().enumerate().map(|(c, &r)| (r, c)).collect();
    pairs.sort_unstable();
    for (r, c) in pairs {
        let found = rebuilt(c);
        let expected = &raw.rows[r][raw_col];
        if &found != expected {
            return Err(Mismatch {
                row: r,
                expected: expected.clone(),
                found,
            });
        }
    }
    Ok(())
}

fn column_cells<'a>(canonical: &'a Table, name: &str) -> impl Fn(usize) -> CellValue + 'a {
    let idx = canonical.column_index(name);
    move |row| idx.map_or(CellValue::Null, |i| canonical.rows[row][i].clone())
}

/// Checks that every raw column of `raw` can be rebuilt from `canonical`.
pub fn audit_losslessness(raw: &Table, canonical: &Table, plan: &TransformationPlan, traces: &[StepTrace]) -> LossAudit {
    let raw_rows = raw.num_rows();
    let (alignment, map) = choose_alignment(canonical, raw_rows);
    let mut covered = vec![false; raw_rows];
    let mut dup = false;
    for &r in &map {
        if r < raw_rows {
            dup |= std::mem::replace(&mut covered[r], true);
        }
    }
    let rows_complete = !dup && covered.iter().all(|&c| c) && map.len() == raw_rows;
    let positional_ok = match &alignment {
        RowAlignment::Position => map.iter().enumerate().all(|(i, &r)| i == r),
        RowAlignment::Column { .. } => true,
    };

    let mut columns = Vec::with_capacity(raw.num_columns());
    for (ci, col) in raw.columns.iter().enumerate() {
        let mut best: Option<Mismatch> = None;
        let mut note = |m: Mismatch| {
            if best.as_ref().is_none_or(|b| m.row > b.row) {
                best = Some(m);
            }
        };
        let mut status = ColumnStatus::Lost;

        let names = aliases(plan, &col.name);
        for n in names.iter().rev() {
            if canonical.column_index(n).is_some_and(|i| canonical.columns[i].role != ColumnRole::RawSnapshot) {
                match verify(raw, ci, &map, column_cells(canonical, n)) {
                    Ok(()) => {
                        status = ColumnStatus::Retained { column: n.clone() };
                        break;
                    }
                    Err(m) => note(m),
                }
            }
        }
        if !status.is_ok() {
            for rule in candidates(&col.name, plan, traces, canonical) {
                match verify(raw, ci, &map, |row| rule.recover(canonical, row)) {
                    Ok(()) => {
                        status = ColumnStatus::FullyCaptured {
                            by: rule.columns(),
                            recovery: rule,
                        };
                        break;
                    }
                    Err(m) => note(m),
                }
            }
        }
        if !status.is_ok() {
            for n in &names {
                let snap = snapshot_name(n);
                if canonical.has_column(&snap) {
                    match verify(raw, ci, &map, column_cells(canonical, &snap)) {
                        Ok(()) => {
                            status = ColumnStatus::Snapshot { column: snap };
                            break;
                        }
                        Err(m) => note(m),
                    }
                }
            }
        }
        let first_mismatch = if status.is_ok() { None } else { best };
        columns.push(ColumnAudit {
            column: col.name.clone(),
            status,
            first_mismatch,
        });
    }
    let snapshots_needed: Vec<String> = columns.iter().filter(|c| !c.status.is_ok()).map(|c| c.column.clone()).collect();
    let lossless = rows_complete && positional_ok && snapshots_needed.is_empty();
    LossAudit {
        table_id: raw.table_id.clone(),
        raw_rows,
        alignment,
        rows_complete: rows_complete && positional_ok,
        columns,
        snapshots_needed,
        lossless,
    }
}

/// Rebuilds the raw table from `canonical` using the rules in `audit`.
pub fn recover_raw(canonical: &Table, audit: &LossAudit) -> Result<Table, AuditError> {
    if !audit.lossless {
        return Err(AuditError::NotLossless);
    }
    let map = alignment_map(canonical, &audit.alignment, audit.raw_rows)
        .ok_or_else(|| AuditError::Alignment(format!("{:?} does not map {} rows", audit.alignment, canonical.num_rows())))?;
    let mut slot: Vec<Option<usize>> = vec![None; audit.raw_rows];
    for (c, &r) in map.iter().enumerate() {
        if slot[r].replace(c).is_some() {
            return Err(AuditError::Alignment(format!("raw row {r} appears twice")));
        }
    }
    let order: Vec<usize> = slot
        .into_iter()
        .enumerate()
        .map(|(r, c)| c.ok_or_else(|| AuditError::Alignment(format!("raw row {r} is missing"))))
        .collect::<Result<_, _>>()?;

    let mut cols = Vec::with_capacity(audit.columns.len());
    let mut data: Vec<Vec<CellValue>> = Vec::with_capacity(audit.columns.len());
    for ca in &audit.columns {
        let values: Vec<CellValue> = match &ca.status {
            ColumnStatus::Retained { column } | ColumnStatus::Snapshot { column } => {
                let i = canonical.column_index(column).ok_or_else(|| AuditError::MissingColumn(column.clone()))?;
                order.iter().map(|&c| canonical.rows[c][i].clone()).collect()
            }
            ColumnStatus::FullyCaptured { recovery, .. } => {
                for c in recovery.columns() {
                    if !canonical.has_column(&c) {
                        return Err(AuditError::MissingColumn(c));
                    }
                }
                order.iter().map(|&c| recovery.recover(canonical, c)).collect()
            }
            ColumnStatus::Lost => return Err(AuditError::NotLossless),
        };
        cols.push(Column::new(ca.column.clone()));
        data.push(values);
    }
    let rows = (0..audit.raw_rows).map(|r| data.iter().map(|col| col[r].clone()).collect()).collect();
    Table::new(audit.table_id.clone(), cols, rows).map_err(|e| AuditError::Alignment(e.to_string()))
}

/// Executes `plan`, then re-executes with snapshots (and a row-id helper if
/// rows moved) for every raw column the audit could not account for.
pub fn make_lossless(plan: &TransformationPlan, raw: &Table, policy: &ExecPolicy) -> Result<(Execution, LossAudit), ExecError> {
    let exec = execute_plan(plan, raw, policy)?;
    let audit = audit_losslessness(raw, &exec.table, plan, &exec.traces);
    let moved = matches!(audit.alignment, RowAlignment::Position) && !audit.rows_complete;
    if audit.lossless || (audit.snapshots_needed.is_empty() && !moved) {
        return Ok((exec, audit));
    }
    let mut retry = policy.clone();
    for c in &audit.snapshots_needed {
        if !retry.snapshot_columns.contains(c) {
            retry.snapshot_columns.push(c.clone());
        }
    }
    retry.ensure_row_id |= moved;
    let exec = execute_plan(plan, raw, &retry)?;
    let audit = audit_losslessness(raw, &exec.table, plan, &exec.traces);
    Ok((exec, audit))
}

/// Counts of each status, keyed by status name.
pub fn status_counts(audit: &LossAudit) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for c in &audit.columns {
        let k = match c.status {
            ColumnStatus::Retained { .. } => "retained",
            ColumnStatus::FullyCaptured { .. } => "fully_captured",
            ColumnStatus::Snapshot { .. } => "snapshot",
            ColumnStatus::Lost => "lost",
        };
        *m.entry(k).or_insert(0) += 1;
    }
    m
}
