// SPDX-License-Identifier: Apache-2.0

//! Operator implementations. Each takes a table and resolved parameters and
//! returns a new table; none of them mutate their input.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde_json::{json, Value};
use thiserror::Error;

use super::custom::{CodegenFallback, CustomCall, CustomRegistry};
use super::expr::Conjunction;
use super::params::{compile_regex, one_hot_prefix, FillRule, GroupRef, OpParams, ParamError, Rule};
use crate::dates::{parse_date, slash_order, SlashOrder};
use crate::plan::PlanStep;
use crate::table::{parse_plain_number, CellKind, CellValue, Column, ColumnRole, Table, TableError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("column `{0}` already exists")]
    Collision(String),
    #[error("row {row}: cannot cast {value:?} to {kind}")]
    Cast { row: usize, value: String, kind: &'static str },
    #[error("row {row}: value {value:?} has no mapping")]
    Unmapped { row: usize, value: String },
    #[error("row {row}: column `{column}` is not numeric")]
    NonNumeric { column: String, row: usize },
    #[error("`{column}` has {count} distinct values, more than the limit of {max}")]
    Cardinality { column: String, count: usize, max: usize },
    #[error("custom operator `{0}` is not registered")]
    UnknownCustom(String),
    #[error("custom operator `{name}` failed: {message}")]
    Custom { name: String, message: String },
}

/// Result of one operator application.
#[derive(Debug, Clone)]
pub struct Applied {
    pub table: Table,
    /// Operator-specific facts worth keeping in the trace.
    pub details: Option<Value>,
}

impl From<Table> for Applied {
    fn from(table: Table) -> Self {
        Applied { table, details: None }
    }
}

/// Runtime services available to operators.
#[derive(Clone, Copy, Default)]
pub struct OpContext<'a> {
    pub registry: Option<&'a CustomRegistry>,
    pub fallback: Option<&'a dyn CodegenFallback>,
    /// The step being run; gives custom functions their declared columns.
    pub step: Option<&'a PlanStep>,
}

/// Applies one operator to `table`.
pub fn apply_op(table: &Table, params: &OpParams, ctx: &OpContext<'_>) -> Result<Applied, OpError> {
    Ok(match params {
        OpParams::AddRowId { name } => add_row_id(table, name)?.into(),
        OpParams::Rename { mapping } => rename(table, mapping)?.into(),
        OpParams::Select { columns } => table.project(columns)?.into(),
        OpParams::ParseDateText { source, target, formats } => parse_date_text(table, source, target, formats)?.into(),
        OpParams::ParseNumber { source, target, unit_target, pattern } => {
            parse_number(table, source, target, unit_target.as_deref(), pattern)?.into()
        }
        OpParams::ExtractRegex { source, pattern, targets } => extract_regex(table, source, pattern, targets)?.into(),
        OpParams::DeriveConditional { rules, default, target } => derive_conditional(table, rules, default, target)?.into(),
        OpParams::DeriveMath { expr, target } => {
            let values = (0..table.num_rows())
                .map(|r| expr.eval(&|c: &str| table.cell(r, c)))
                .collect();
            with_column(table, target, values)?.into()
        }
        OpParams::MapValues { source, target, mapping, strict } => map_values(table, source, target, mapping, *strict)?.into(),
        OpParams::ReplaceValue { source, target, from, to } => {
            let values = table
                .column_values(source)?
                .into_iter()
                .map(|c| if !c.is_null() && from.contains(&c.to_text()) { to.clone() } else { c })
                .collect();
            with_column(table, target, values)?.into()
        }
        OpParams::ReplaceString { source, target, pattern, replacement, regex } => {
            replace_string(table, source, target, pattern, replacement, *regex)?.into()
        }
        OpParams::CastColumn { source, target, to, strict } => cast_column(table, source, target, *to, *strict)?.into(),
        OpParams::FillnaStatic { columns, value } => {
            let mut out = table.clone();
            for c in columns {
                let values = table
                    .column_values(c)?
                    .into_iter()
                    .map(|v| if v.is_missing() { value.clone() } else { v })
                    .collect();
                replace_cells(&mut out, c, values)?;
            }
            out.into()
        }
        OpParams::FillnaDynamic { columns, rule } => {
            let mut out = table.clone();
            for c in columns {
                let values = fill_dynamic(c, table.column_values(c)?, *rule)?;
                replace_cells(&mut out, c, values)?;
            }
            out.into()
        }
        OpParams::CombineColumns { sources, target, separator } => {
            let idx = sources.iter().map(|s| table.require_column(s)).collect::<Result<Vec<_>, _>>()?;
            let values = table
                .rows
                .iter()
                .map(|row| CellValue::Text(idx.iter().map(|&i| row[i].to_text()).collect::<Vec<_>>().join(separator)))
                .collect();
            with_column(table, target, values)?.into()
        }
        OpParams::TrimWhitespace { columns } => {
            let mut out = table.clone();
            for c in columns {
                let values = table
                    .column_values(c)?
                    .into_iter()
                    .map(|v| match v {
                        CellValue::Text(s) => CellValue::Text(s.trim().to_string()),
                        other => other,
                    })
                    .collect();
                replace_cells(&mut out, c, values)?;
            }
            out.into()
        }
        OpParams::FilterRows { condition } => filter_rows(table, condition)?.into(),
        OpParams::Sort { keys } => sort(table, keys)?.into(),
        OpParams::DeduplicateRows { subset } => deduplicate(table, subset.as_deref())?.into(),
        OpParams::KeepRawSnapshot { source, target } => {
            let pos = table.require_column(source)?;
            if table.has_column(target) {
                return Err(OpError::Collision(target.clone()));
            }
            let mut out = table.clone();
            out.insert_column(pos + 1, Column::new(target.clone()).with_role(ColumnRole::RawSnapshot), table.column_values(source)?)?;
            out.into()
        }
        OpParams::BinNumeric { source, target, edges, labels } => {
            let values = table
                .column_values(source)?
                .iter()
                .map(|c| match c.as_number().and_then(|x| bin_index(x, edges)) {
                    None => CellValue::Null,
                    Some(i) => match labels {
                        Some(l) => CellValue::Text(l[i].clone()),
                        None => CellValue::Integer(i as i64),
                    },
                })
                .collect();
            with_column(table, target, values)?.into()
        }
        OpParams::OneHot { source, max_categories } => return one_hot(table, source, *max_categories),
        OpParams::Custom { name, args } => return custom(table, name, args, ctx),
    })
}

/// Appends `target`, or replaces its cells when it already exists.
fn with_column(table: &Table, target: &str, values: Vec<CellValue>) -> Result<Table, OpError> {
    let mut out = table.clone();
    if out.has_column(target) {
        replace_cells(&mut out, target, values)?;
    } else {
        out.set_column(Column::new(target), values)?;
    }
    Ok(out)
}

/// Replaces the cells of an existing column, keeping its role and dropping a
/// declared kind that no longer holds.
fn replace_cells(table: &mut Table, name: &str, values: Vec<CellValue>) -> Result<(), OpError> {
    let idx = table.require_column(name)?;
    let mut col = table.columns[idx].clone();
    if let Some(k) = col.declared_kind {
        if values.iter().any(|v| !v.is_null() && v.kind() != k) {
            col.declared_kind = None;
        }
    }
    table.set_column(col, values)?;
    Ok(())
}

fn add_row_id(table: &Table, name: &str) -> Result<Table, OpError> {
    if table.has_column(name) {
        return Err(OpError::Collision(name.to_string()));
    }
    let mut out = table.clone();
    let values = (0..table.num_rows() as i64).map(CellValue::Integer).collect();
    out.set_column(Column::new(name).with_role(ColumnRole::Helper).with_kind(CellKind::Integer), values)?;
    Ok(out)
}

fn rename(table: &Table, mapping: &[(String, String)]) -> Result<Table, OpError> {
    let map: HashMap<&str, &str> = mapping.iter().map(|(o, n)| (o.as_str(), n.as_str())).collect();
    for (old, _) in mapping {
        table.require_column(old)?;
    }
    let mut out = table.clone();
    let mut seen = HashSet::new();
    for col in &mut out.columns {
        if let Some(new) = map.get(col.name.as_str()) {
            col.name = new.to_string();
        }
        if !seen.insert(col.name.clone()) {
            return Err(OpError::Collision(col.name.clone()));
        }
    }
    Ok(out)
}

fn parse_date_text(table: &Table, source: &str, target: &str, formats: &[String]) -> Result<Table, OpError> {
    let cells = table.column_values(source)?;
    let texts: Vec<String> = cells.iter().map(CellValue::to_text).collect();
    let order = slash_order(texts.iter().map(String::as_str));
    let values = cells
        .iter()
        .zip(&texts)
        .map(|(c, t)| match c {
            CellValue::Null => CellValue::Null,
            CellValue::Date(d) => CellValue::Date(*d),
            _ => parse_date(t, formats, order).map_or(CellValue::Null, CellValue::Date),
        })
        .collect();
    with_column(table, target, values)
}

/// `(value, unit)` for one cell under the numeric `pattern`.
pub fn split_number(re: &regex::Regex, text: &str) -> (CellValue, CellValue) {
    let Some(m) = re.find(text) else {
        return (CellValue::Null, CellValue::Null);
    };
    let digits: String = m.as_str().chars().filter(|&c| c != ',').collect();
    let value = if digits.contains('.') {
        digits.parse::<f64>().map_or(CellValue::Null, CellValue::float)
    } else {
        match digits.parse::<i64>() {
            Ok(i) => CellValue::Integer(i),
            Err(_) => parse_plain_number(&digits).unwrap_or(CellValue::Null),
        }
    };
    let rest = text[m.end()..].trim();
    let unit = if rest.is_empty() { CellValue::Null } else { CellValue::text(rest) };
    (value, unit)
}

fn parse_number(table: &Table, source: &str, target: &str, unit_target: Option<&str>, pattern: &str) -> Result<Table, OpError> {
    let re = compile_regex(pattern).map_err(|e| ParamError::Invalid { name: "pattern".into(), message: e })?;
    let (values, units): (Vec<_>, Vec<_>) = table
        .column_values(source)?
        .iter()
        .map(|c| if c.is_null() { (CellValue::Null, CellValue::Null) } else { split_number(&re, &c.to_text()) })
        .unzip();
    let mut out = with_column(table, target, values)?;
    if let Some(u) = unit_target {
        out = with_column(&out, u, units)?;
    }
    Ok(out)
}

fn extract_regex(table: &Table, source: &str, pattern: &str, targets: &[(GroupRef, String)]) -> Result<Table, OpError> {
    let re = compile_regex(pattern).map_err(|e| ParamError::Invalid { name: "pattern".into(), message: e })?;
    let cells = table.column_values(source)?;
    let mut out = table.clone();
    let mut columns: Vec<Vec<CellValue>> = vec![Vec::with_capacity(cells.len()); targets.len()];
    for c in &cells {
        let text = c.to_text();
        let caps = if c.is_null() { None } else { re.captures(&text) };
        for (slot, (g, _)) in targets.iter().enumerate() {
            let m = caps.as_ref().and_then(|caps| match g {
                GroupRef::Index(i) => caps.get(*i),
                GroupRef::Name(n) => caps.name(n),
            });
            columns[slot].push(m.map_or(CellValue::Null, |m| CellValue::text(m.as_str())));
        }
    }
    for ((_, name), values) in targets.iter().zip(columns) {
        out = with_column(&out, name, values)?;
    }
    Ok(out)
}

fn derive_conditional(table: &Table, rules: &[Rule], default: &CellValue, target: &str) -> Result<Table, OpError> {
    for r in rules {
        for c in r.condition.columns() {
            table.require_column(c)?;
        }
    }
    let values = (0..table.num_rows())
        .map(|row| {
            rules
                .iter()
                .find(|r| r.condition.eval(|c| table.cell(row, c)))
                .map_or_else(|| default.clone(), |r| r.value.clone())
        })
        .collect();
    with_column(table, target, values)
}

fn map_values(table: &Table, source: &str, target: &str, mapping: &[(String, CellValue)], strict: bool) -> Result<Table, OpError> {
    let map: HashMap<&str, &CellValue> = mapping.iter().map(|(k, v)| (k.as_str(), v)).collect();
    let mut values = Vec::with_capacity(table.num_rows());
    for (row, c) in table.column_values(source)?.into_iter().enumerate() {
        if c.is_null() {
            values.push(c);
            continue;
        }
        let key = c.to_text();
        match map.get(key.as_str()) {
            Some(v) => values.push((*v).clone()),
            None if strict => return Err(OpError::Unmapped { row, value: key }),
            None => values.push(c),
        }
    }
    with_column(table, target, values)
}

fn replace_string(table: &Table, source: &str, target: &str, pattern: &str, replacement: &str, regex: bool) -> Result<Table, OpError> {
    let re = if regex {
        Some(compile_regex(pattern).map_err(|e| ParamError::Invalid { name: "pattern".into(), message: e })?)
    } else {
        None
    };
    let values = table
        .column_values(source)?
        .into_iter()
        .map(|c| match c {
            CellValue::Text(s) => CellValue::Text(match &re {
                Some(re) => re.replace_all(&s, replacement).into_owned(),
                None => s.replace(pattern, replacement),
            }),
            other => other,
        })
        .collect();
    with_column(table, target, values)
}

/// Converts one cell; `None` means the value does not fit `to`.
pub fn cast_cell(c: &CellValue, to: CellKind, slash: SlashOrder) -> Option<CellValue> {
    use CellValue as V;
    if c.is_null() {
        return Some(V::Null);
    }
    let integral = |f: f64| (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(V::Integer(f as i64));
    match to {
        CellKind::Null => None,
        CellKind::Text => Some(V::Text(c.to_text())),
        CellKind::Integer => match c {
            V::Integer(_) => Some(c.clone()),
            V::Float(f) => integral(*f),
            V::Boolean(b) => Some(V::Integer(*b as i64)),
            V::Text(s) => match parse_plain_number(s)? {
                V::Float(f) => integral(f),
                other => Some(other),
            },
            _ => None,
        },
        CellKind::Float => match c {
            V::Boolean(b) => Some(V::Float(if *b { 1.0 } else { 0.0 })),
            V::Integer(_) | V::Float(_) => c.as_number().map(V::float),
            V::Text(s) => parse_plain_number(s)?.as_number().map(V::float),
            _ => None,
        },
        CellKind::Boolean => match c {
            V::Boolean(_) => Some(c.clone()),
            V::Integer(0) => Some(V::Boolean(false)),
            V::Integer(1) => Some(V::Boolean(true)),
            V::Text(s) => match s.to_ascii_lowercase().as_str() {
                "true" | "1" => Some(V::Boolean(true)),
                "false" | "0" => Some(V::Boolean(false)),
                _ => None,
            },
            _ => None,
        },
        CellKind::Date => match c {
            V::Date(_) => Some(c.clone()),
            V::Text(s) => parse_date(s, &[], slash).map(V::Date),
            _ => None,
        },
    }
}

fn cast_column(table: &Table, source: &str, target: &str, to: CellKind, strict: bool) -> Result<Table, OpError> {
    let cells = table.column_values(source)?;
    let texts: Vec<String> = cells.iter().map(CellValue::to_text).collect();
    let slash = slash_order(texts.iter().map(String::as_str));
    let mut values = Vec::with_capacity(cells.len());
    for (row, c) in cells.iter().enumerate() {
        match cast_cell(c, to, slash) {
            Some(v) => values.push(v),
            None if strict => {
                return Err(OpError::Cast {
                    row,
                    value: c.to_text(),
                    kind: to.as_str(),
                })
            }
            None => values.push(CellValue::Null),
        }
    }
    with_column(table, target, values)
}

fn fill_dynamic(column: &str, mut values: Vec<CellValue>, rule: FillRule) -> Result<Vec<CellValue>, OpError> {
    match rule {
        FillRule::ForwardFill => {
            let mut last: Option<CellValue> = None;
            for v in &mut values {
                if v.is_missing() {
                    if let Some(l) = &last {
                        *v = l.clone();
                    }
                } else {
                    last = Some(v.clone());
                }
            }
        }
        FillRule::BackwardFill => {
            let mut next: Option<CellValue> = None;
            for v in values.iter_mut().rev() {
                if v.is_missing() {
                    if let Some(n) = &next {
                        *v = n.clone();
                    }
                } else {
                    next = Some(v.clone());
                }
            }
        }
        FillRule::ColumnMean => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (row, v) in values.iter().enumerate() {
                match v {
                    CellValue::Integer(i) => sum += *i as f64,
                    CellValue::Float(f) => sum += f,
                    v if v.is_missing() => continue,
                    _ => {
                        return Err(OpError::NonNumeric {
                            column: column.to_string(),
                            row,
                        })
                    }
                }
                count += 1;
            }
            if count > 0 {
                let mean = CellValue::float(sum / count as f64);
                for v in values.iter_mut().filter(|v| v.is_missing()) {
                    *v = mean.clone();
                }
            }
        }
        FillRule::ColumnMode => {
            let mut counts: Vec<(CellValue, usize)> = Vec::new();
            for v in values.iter().filter(|v| !v.is_missing()) {
                match counts.iter_mut().find(|(c, _)| c == v) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((v.clone(), 1)),
                }
            }
            // max_by_key keeps the last maximum; scan manually for the first.
            let mut best: Option<&(CellValue, usize)> = None;
            for entry in &counts {
                if best.is_none_or(|b| entry.1 > b.1) {
                    best = Some(entry);
                }
            }
            if let Some((mode, _)) = best {
                let mode = mode.clone();
                for v in values.iter_mut().filter(|v| v.is_missing()) {
                    *v = mode.clone();
                }
            }
        }
    }
    Ok(values)
}

fn filter_rows(table: &Table, condition: &Conjunction) -> Result<Table, OpError> {
    for c in condition.columns() {
        table.require_column(c)?;
    }
    let keep: Vec<usize> = (0..table.num_rows()).filter(|&r| condition.eval(|c| table.cell(r, c))).collect();
    Ok(table.take_rows(&keep))
}

/// Nulls go last in either direction; the original order breaks ties.
pub fn sort_key_cmp(a: &CellValue, b: &CellValue, ascending: bool) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ if ascending => a.sort_cmp(b),
        _ => b.sort_cmp(a),
    }
}

fn sort(table: &Table, keys: &[(String, bool)]) -> Result<Table, OpError> {
    let idx = keys
        .iter()
        .map(|(c, asc)| table.require_column(c).map(|i| (i, *asc)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<usize> = (0..table.num_rows()).collect();
    order.sort_by(|&x, &y| {
        idx.iter()
            .map(|&(i, asc)| sort_key_cmp(&table.rows[x][i], &table.rows[y][i], asc))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    Ok(table.take_rows(&order))
}

/// Hashable identity of a cell: kind plus canonical text.
pub(crate) fn cell_key(c: &CellValue) -> (CellKind, String) {
    (c.kind(), c.to_text())
}

fn deduplicate(table: &Table, subset: Option<&[String]>) -> Result<Table, OpError> {
    let idx: Vec<usize> = match subset {
        Some(cols) => cols.iter().map(|c| table.require_column(c)).collect::<Result<_, _>>()?,
        None => (0..table.num_columns()).collect(),
    };
    let mut seen = HashSet::new();
    let keep: Vec<usize> = (0..table.num_rows())
        .filter(|&r| seen.insert(idx.iter().map(|&i| cell_key(&table.rows[r][i])).collect::<Vec<_>>()))
        .collect();
    Ok(table.take_rows(&keep))
}

/// Bin of `x`: left-inclusive, right-exclusive, except the last bin which
/// also holds its right edge.
pub fn bin_index(x: f64, edges: &[f64]) -> Option<usize> {
    let last = edges.len().checked_sub(1)?;
    if last == 0 || x < edges[0] || x > edges[last] {
        return None;
    }
    if x == edges[last] {
        return Some(last - 1);
    }
    edges.windows(2).position(|w| w[0] <= x && x < w[1])
}

/// Lowercase alphanumerics with `_` between runs; `empty` for nothing.
pub fn sanitize_category(value: &str) -> String {
    let mut out = String::new();
    let mut gap = false;
    for ch in value.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('_');
            }
            gap = false;
            out.push(ch);
        } else {
            gap = true;
        }
    }
    if out.is_empty() {
        out.push_str("empty");
    }
    out
}

/// Indicator column names for `categories` under `source`, suffixing `_2`,
/// `_3`, ... where sanitized values collide.
pub fn one_hot_names(source: &str, categories: &[String]) -> Vec<String> {
    let prefix = one_hot_prefix(source);
    let mut used = HashSet::new();
    categories
        .iter()
        .map(|c| {
            let base = format!("{prefix}{}", sanitize_category(c));
            let mut name = base.clone();
            let mut n = 2;
            while !used.insert(name.clone()) {
                name = format!("{base}_{n}");
                n += 1;
            }
            name
        })
        .collect()
}

fn one_hot(table: &Table, source: &str, max: usize) -> Result<Applied, OpError> {
    let cells = table.column_values(source)?;
    let mut categories: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for c in cells.iter().filter(|c| !c.is_null()) {
        let t = c.to_text();
        if seen.insert(t.clone()) {
            categories.push(t);
        }
    }
    if categories.len() > max {
        return Err(OpError::Cardinality {
            column: source.to_string(),
            count: categories.len(),
            max,
        });
    }
    let names = one_hot_names(source, &categories);
    let mut out = table.clone();
    for (cat, name) in categories.iter().zip(&names) {
        if out.has_column(name) {
            return Err(OpError::Collision(name.clone()));
        }
        let values = cells
            .iter()
            .map(|c| CellValue::Boolean(!c.is_null() && &c.to_text() == cat))
            .collect();
        out.set_column(Column::new(name.clone()).with_role(ColumnRole::Derived).with_kind(CellKind::Boolean), values)?;
    }
    let map: serde_json::Map<String, Value> = names.iter().cloned().zip(categories.iter().map(|c| json!(c))).collect();
    Ok(Applied {
        table: out,
        details: Some(json!({ "categories": Value::Object(map) })),
    })
}

fn custom(table: &Table, name: &str, args: &Value, ctx: &OpContext<'_>) -> Result<Applied, OpError> {
    let empty: [String; 0] = [];
    let (reads, writes) = match ctx.step {
        Some(s) => (s.reads.as_slice(), s.writes.as_slice()),
        None => (&empty[..], &empty[..]),
    };
    let fail = |message: String| OpError::Custom { name: name.to_string(), message };
    if let Some(f) = ctx.registry.and_then(|r| r.get(name)) {
        let call = CustomCall { view: table, args, reads, writes };
        let out = f(&call).map_err(fail)?;
        return Ok(Applied {
            table: out,
            details: Some(json!({ "custom": name, "source": "registry" })),
        });
    }
    match (ctx.fallback, ctx.step) {
        (Some(fb), Some(step)) => {
            let out = fb.run(step, table).map_err(fail)?;
            Ok(Applied {
                table: out,
                details: Some(json!({ "custom": name, "source": "codegen" })),
            })
        }
        _ => Err(OpError::UnknownCustom(name.to_string())),
    }
}
