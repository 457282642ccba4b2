// SPDX-License-Identifier: Apache-2.0

//! Typed operator parameters resolved from a plan step.
//!
//! `source` defaults to the step's single read and `target` to its single
//! write, so terse planner output still resolves.

use regex::Regex;
use serde_json::Value;
use thiserror::Error;

use super::expr::{Conjunction, ExprError, MathExpr};
use crate::plan::{Operator, PlanStep};
use crate::table::{CellKind, CellValue};

/// Default numeric pattern; includes commas so grouped numbers match whole.
pub const DEFAULT_NUMBER_PATTERN: &str = r"[0-9,]+(\.[0-9]+)?";
pub const DEFAULT_ROW_ID: &str = "_row_id";
pub const DEFAULT_MAX_CATEGORIES: usize = 64;
const REGEX_SIZE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("missing parameter `{0}`")]
    Missing(String),
    #[error("parameter `{name}`: {message}")]
    Invalid { name: String, message: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn invalid(name: &str, message: impl Into<String>) -> ParamError {
    ParamError::Invalid {
        name: name.to_string(),
        message: message.into(),
    }
}

/// Compiles a pattern in the engine's dialect: linear-time, no lookaround or
/// backreferences.
pub fn compile_regex(pattern: &str) -> Result<Regex, String> {
    regex::RegexBuilder::new(pattern)
        .size_limit(REGEX_SIZE_LIMIT)
        .build()
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillRule {
    ForwardFill,
    BackwardFill,
    ColumnMean,
    ColumnMode,
}

impl FillRule {
    fn parse(s: &str) -> Option<FillRule> {
        Some(match s {
            "forward_fill" | "ffill" => FillRule::ForwardFill,
            "backward_fill" | "bfill" => FillRule::BackwardFill,
            "column_mean" | "mean" => FillRule::ColumnMean,
            "column_mode" | "mode" => FillRule::ColumnMode,
            _ => return None,
        })
    }
}

/// A capture group addressed by index or name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub condition: Conjunction,
    pub value: CellValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpParams {
    AddRowId { name: String },
    Rename { mapping: Vec<(String, String)> },
    Select { columns: Vec<String> },
    ParseDateText { source: String, target: String, formats: Vec<String> },
    ParseNumber { source: String, target: String, unit_target: Option<String>, pattern: String },
    ExtractRegex { source: String, pattern: String, targets: Vec<(GroupRef, String)> },
    DeriveConditional { rules: Vec<Rule>, default: CellValue, target: String },
    DeriveMath { expr: MathExpr, target: String },
    MapValues { source: String, target: String, mapping: Vec<(String, CellValue)>, strict: bool },
    ReplaceValue { source: String, target: String, from: Vec<String>, to: CellValue },
    ReplaceString { source: String, target: String, pattern: String, replacement: String, regex: bool },
    CastColumn { source: String, target: String, to: CellKind, strict: bool },
    FillnaStatic { columns: Vec<String>, value: CellValue },
    FillnaDynamic { columns: Vec<String>, rule: FillRule },
    CombineColumns { sources: Vec<String>, target: String, separator: String },
    TrimWhitespace { columns: Vec<String> },
    FilterRows { condition: Conjunction },
    Sort { keys: Vec<(String, bool)> },
    DeduplicateRows { subset: Option<Vec<String>> },
    KeepRawSnapshot { source: String, target: String },
    BinNumeric { source: String, target: String, edges: Vec<f64>, labels: Option<Vec<String>> },
    OneHot { source: String, max_categories: usize },
    Custom { name: String, args: Value },
}

struct Reader<'a> {
    step: &'a PlanStep,
}

impl<'a> Reader<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.step.params.get(key).filter(|v| !v.is_null())
    }

    fn string(&self, key: &str) -> Result<Option<String>, ParamError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(invalid(key, "expected a string")),
        }
    }

    fn req_string(&self, key: &str) -> Result<String, ParamError> {
        self.string(key)?.ok_or_else(|| ParamError::Missing(key.to_string()))
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ParamError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(_) => Err(invalid(key, "expected a boolean")),
        }
    }

    fn strings(&self, key: &str) -> Result<Option<Vec<String>>, ParamError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(vec![s.clone()])),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| invalid(key, "expected strings"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(invalid(key, "expected a string or list of strings")),
        }
    }

    fn cell(&self, key: &str) -> Result<Option<CellValue>, ParamError> {
        match self.step.params.get(key) {
            None => Ok(None),
            Some(v) => CellValue::from_json(v)
                .map(Some)
                .ok_or_else(|| invalid(key, "expected a scalar")),
        }
    }

    /// `source` param, else the single declared read.
    fn source(&self) -> Result<String, ParamError> {
        if let Some(s) = self.string("source")?.or(self.string("column")?) {
            return Ok(s);
        }
        match self.step.reads.as_slice() {
            [one] => Ok(one.clone()),
            _ => Err(ParamError::Missing("source".into())),
        }
    }

    /// `target` param, else the single declared write, else `fallback`.
    fn target(&self, fallback: Option<&str>) -> Result<String, ParamError> {
        if let Some(t) = self.string("target")? {
            return Ok(t);
        }
        match self.step.writes.as_slice() {
            [one] => Ok(one.clone()),
            _ => fallback
                .map(str::to_string)
                .ok_or_else(|| ParamError::Missing("target".into())),
        }
    }

    /// `columns` (or `source`) param, else all declared reads.
    fn columns(&self) -> Result<Vec<String>, ParamError> {
        if let Some(c) = self.strings("columns")? {
            return Ok(c);
        }
        if let Some(s) = self.string("source")? {
            return Ok(vec![s]);
        }
        if self.step.reads.is_empty() {
            return Err(ParamError::Missing("columns".into()));
        }
        Ok(self.step.reads.clone())
    }
}

fn string_map(value: &Value, key: &str) -> Result<Vec<(String, Value)>, ParamError> {
    match value {
        Value::Object(m) => Ok(m.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
        _ => Err(invalid(key, "expected an object")),
    }
}

impl OpParams {
    /// Resolves and checks the parameters of `step`. Regexes, conditions and
    /// expressions are compiled here so bad plans fail before execution.
    pub fn from_step(step: &PlanStep) -> Result<OpParams, ParamError> {
        let op = step
            .operator()
            .ok_or_else(|| ParamError::UnknownOperator(step.op.clone()))?;
        let r = Reader { step };
        let params = match op {
            Operator::AddRowId => OpParams::AddRowId {
                name: r
                    .string("name")?
                    .or_else(|| step.writes.first().cloned())
                    .unwrap_or_else(|| DEFAULT_ROW_ID.to_string()),
            },
            Operator::Rename => {
                let raw = r.get("mapping").or(r.get("columns")).ok_or(ParamError::Missing("mapping".into()))?;
                let mut mapping = Vec::new();
                for (k, v) in string_map(raw, "mapping")? {
                    let new = v.as_str().ok_or_else(|| invalid("mapping", "values must be strings"))?;
                    mapping.push((k, new.to_string()));
                }
                let mut seen = std::collections::HashSet::new();
                for (_, new) in &mapping {
                    if !seen.insert(new.as_str()) {
                        return Err(invalid("mapping", format!("not injective: `{new}` used twice")));
                    }
                }
                OpParams::Rename { mapping }
            }
            Operator::Select => OpParams::Select {
                columns: match r.strings("columns")? {
                    Some(c) => c,
                    None => step.reads.clone(),
                },
            },
            Operator::ParseDateText => OpParams::ParseDateText {
                source: r.source()?,
                target: r.target(None)?,
                formats: r.strings("formats")?.unwrap_or_default(),
            },
            Operator::ParseNumber => {
                let pattern = r.string("pattern")?.unwrap_or_else(|| DEFAULT_NUMBER_PATTERN.to_string());
                compile_regex(&pattern).map_err(|e| invalid("pattern", e))?;
                let target = match r.string("target")? {
                    Some(t) => t,
                    None => step
                        .writes
                        .first()
                        .cloned()
                        .ok_or_else(|| ParamError::Missing("target".into()))?,
                };
                let unit_target = match r.string("unit_target")? {
                    Some(u) => Some(u),
                    None if r.string("target")?.is_none() && step.writes.len() == 2 => Some(step.writes[1].clone()),
                    None => None,
                };
                OpParams::ParseNumber {
                    source: r.source()?,
                    target,
                    unit_target,
                    pattern,
                }
            }
            Operator::ExtractRegex => {
                let pattern = r.req_string("pattern")?;
                let re = compile_regex(&pattern).map_err(|e| invalid("pattern", e))?;
                let groups = re.captures_len() - 1;
                let targets = match r.get("targets").or(r.get("groups")) {
                    Some(Value::Object(m)) => m
                        .iter()
                        .map(|(k, v)| {
                            let col = v
                                .as_str()
                                .ok_or_else(|| invalid("targets", "column names must be strings"))?
                                .to_string();
                            let g = match k.parse::<usize>() {
                                Ok(i) => GroupRef::Index(i),
                                Err(_) => GroupRef::Name(k.clone()),
                            };
                            Ok((g, col))
                        })
                        .collect::<Result<Vec<_>, ParamError>>()?,
                    Some(Value::Array(_)) | Some(Value::String(_)) => r
                        .strings("targets")?
                        .unwrap_or_default()
                        .into_iter()
                        .enumerate()
                        .map(|(i, c)| (GroupRef::Index(i + 1), c))
                        .collect(),
                    Some(_) => return Err(invalid("targets", "expected an object or list")),
                    None => step
                        .writes
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (GroupRef::Index(i + 1), c.clone()))
                        .collect(),
                };
                if targets.is_empty() {
                    return Err(ParamError::Missing("targets".into()));
                }
                for (g, _) in &targets {
                    let ok = match g {
                        GroupRef::Index(i) => *i >= 1 && *i <= groups,
                        GroupRef::Name(n) => re.capture_names().flatten().any(|x| x == n),
                    };
                    if !ok {
                        return Err(invalid(
                            "targets",
                            format!("pattern has {groups} capture groups; {g:?} does not exist"),
                        ));
                    }
                }
                OpParams::ExtractRegex {
                    source: r.source()?,
                    pattern,
                    targets,
                }
            }
            Operator::DeriveConditional => {
                let rules_v = r.get("rules").ok_or(ParamError::Missing("rules".into()))?;
                let items = rules_v.as_array().ok_or_else(|| invalid("rules", "expected a list"))?;
                let mut rules = Vec::with_capacity(items.len());
                for item in items {
                    let obj = item.as_object().ok_or_else(|| invalid("rules", "rules must be objects"))?;
                    let cond = obj.get("condition").ok_or(ParamError::Missing("rules[].condition".into()))?;
                    let value = match obj.get("value") {
                        Some(v) => CellValue::from_json(v).ok_or_else(|| invalid("rules[].value", "expected a scalar"))?,
                        None => return Err(ParamError::Missing("rules[].value".into())),
                    };
                    rules.push(Rule {
                        condition: Conjunction::parse_json(cond)?,
                        value,
                    });
                }
                OpParams::DeriveConditional {
                    rules,
                    default: r.cell("default")?.unwrap_or(CellValue::Null),
                    target: r.target(None)?,
                }
            }
            Operator::DeriveMath => {
                let text = r.string("expr")?.or(r.string("expression")?).ok_or(ParamError::Missing("expr".into()))?;
                OpParams::DeriveMath {
                    expr: MathExpr::parse(&text)?,
                    target: r.target(None)?,
                }
            }
            Operator::MapValues => {
                let raw = r.get("mapping").ok_or(ParamError::Missing("mapping".into()))?;
                let mapping = string_map(raw, "mapping")?
                    .into_iter()
                    .map(|(k, v)| {
                        CellValue::from_json(&v)
                            .map(|c| (k, c))
                            .ok_or_else(|| invalid("mapping", "values must be scalars"))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let source = r.source()?;
                OpParams::MapValues {
                    target: r.target(Some(&source))?,
                    source,
                    mapping,
                    strict: r.bool("strict", false)?,
                }
            }
            Operator::ReplaceValue => {
                let source = r.source()?;
                let (from, to) = if let Some(m) = r.get("mapping") {
                    let pairs = string_map(m, "mapping")?;
                    if pairs.len() != 1 {
                        return Err(invalid("mapping", "use `from`/`to` for several values"));
                    }
                    let (k, v) = pairs.into_iter().next().expect("one pair");
                    (vec![k], CellValue::from_json(&v).ok_or_else(|| invalid("mapping", "expected a scalar"))?)
                } else {
                    let from = match r.get("from").or(r.get("old")) {
                        Some(Value::Array(items)) => items
                            .iter()
                            .map(|v| CellValue::from_json(v).map(|c| c.to_text()))
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| invalid("from", "expected scalars"))?,
                        Some(v) => vec![CellValue::from_json(v).ok_or_else(|| invalid("from", "expected a scalar"))?.to_text()],
                        None => return Err(ParamError::Missing("from".into())),
                    };
                    let to = match step.params.get("to").or(step.params.get("new")) {
                        Some(v) => CellValue::from_json(v).ok_or_else(|| invalid("to", "expected a scalar"))?,
                        None => return Err(ParamError::Missing("to".into())),
                    };
                    (from, to)
                };
                OpParams::ReplaceValue {
                    target: r.target(Some(&source))?,
                    source,
                    from,
                    to,
                }
            }
            Operator::ReplaceString => {
                let source = r.source()?;
                let pattern = r.string("pattern")?.or(r.string("old")?).ok_or(ParamError::Missing("pattern".into()))?;
                let regex = r.bool("regex", false)?;
                if regex {
                    compile_regex(&pattern).map_err(|e| invalid("pattern", e))?;
                } else if pattern.is_empty() {
                    return Err(invalid("pattern", "must be non-empty"));
                }
                OpParams::ReplaceString {
                    target: r.target(Some(&source))?,
                    source,
                    replacement: r.string("replacement")?.or(r.string("new")?).unwrap_or_default(),
                    pattern,
                    regex,
                }
            }
            Operator::CastColumn => {
                let source = r.source()?;
                let name = r.string("to")?.or(r.string("dtype")?).or(r.string("type")?).ok_or(ParamError::Missing("to".into()))?;
                let to = CellKind::parse(&name)
                    .filter(|k| *k != CellKind::Null)
                    .ok_or_else(|| invalid("to", format!("unknown kind `{name}`")))?;
                OpParams::CastColumn {
                    target: r.target(Some(&source))?,
                    source,
                    to,
                    strict: r.bool("strict", false)?,
                }
            }
            Operator::FillnaStatic => OpParams::FillnaStatic {
                columns: r.columns()?,
                value: r.cell("value")?.ok_or(ParamError::Missing("value".into()))?,
            },
            Operator::FillnaDynamic => {
                let name = r.string("rule")?.or(r.string("method")?).ok_or(ParamError::Missing("rule".into()))?;
                OpParams::FillnaDynamic {
                    columns: r.columns()?,
                    rule: FillRule::parse(&name).ok_or_else(|| invalid("rule", format!("unknown fill rule `{name}`")))?,
                }
            }
            Operator::CombineColumns => OpParams::CombineColumns {
                sources: match r.strings("sources")?.or(r.strings("columns")?) {
                    Some(s) => s,
                    None => step.reads.clone(),
                },
                target: r.target(None)?,
                separator: r.string("separator")?.unwrap_or_else(|| " ".to_string()),
            },
            Operator::TrimWhitespace => OpParams::TrimWhitespace { columns: r.columns()? },
            Operator::FilterRows => OpParams::FilterRows {
                condition: Conjunction::parse_json(r.get("condition").ok_or(ParamError::Missing("condition".into()))?)?,
            },
            Operator::Sort => {
                let by = r
                    .strings("by")?
                    .or(r.strings("columns")?)
                    .unwrap_or_else(|| step.reads.clone());
                if by.is_empty() {
                    return Err(ParamError::Missing("by".into()));
                }
                let dirs = match r.get("ascending") {
                    None => vec![true; by.len()],
                    Some(Value::Bool(b)) => vec![*b; by.len()],
                    Some(Value::Array(items)) => {
                        let d = items
                            .iter()
                            .map(Value::as_bool)
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| invalid("ascending", "expected booleans"))?;
                        if d.len() != by.len() {
                            return Err(invalid("ascending", "length differs from `by`"));
                        }
                        d
                    }
                    Some(_) => return Err(invalid("ascending", "expected a boolean or list")),
                };
                OpParams::Sort {
                    keys: by.into_iter().zip(dirs).collect(),
                }
            }
            Operator::DeduplicateRows => OpParams::DeduplicateRows {
                subset: r.strings("subset")?.or(r.strings("columns")?),
            },
            Operator::KeepRawSnapshot => {
                let source = r.source()?;
                OpParams::KeepRawSnapshot {
                    target: format!("{source}_raw"),
                    source,
                }
            }
            Operator::BinNumeric => {
                let edges = match r.get("edges").or(r.get("bins")) {
                    Some(Value::Array(items)) => items
                        .iter()
                        .map(|v| v.as_f64().filter(|f| f.is_finite()))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| invalid("edges", "expected finite numbers"))?,
                    Some(_) => return Err(invalid("edges", "expected a list")),
                    None => return Err(ParamError::Missing("edges".into())),
                };
                if edges.len() < 2 {
                    return Err(invalid("edges", "need at least two edges"));
                }
                if edges.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("edges", "must be strictly increasing"));
                }
                let labels = r.strings("labels")?;
                if let Some(l) = &labels {
                    if l.len() != edges.len() - 1 {
                        return Err(invalid("labels", format!("expected {} labels", edges.len() - 1)));
                    }
                }
                OpParams::BinNumeric {
                    source: r.source()?,
                    target: r.target(None)?,
                    edges,
                    labels,
                }
            }
            Operator::OneHot => OpParams::OneHot {
                source: r.source()?,
                max_categories: match r.get("max_categories") {
                    None => DEFAULT_MAX_CATEGORIES,
                    Some(v) => v
                        .as_u64()
                        .map(|n| n as usize)
                        .ok_or_else(|| invalid("max_categories", "expected a non-negative integer"))?,
                },
            },
            Operator::Custom => OpParams::Custom {
                name: r.req_string("name")?,
                args: step.params.get("args").cloned().unwrap_or(Value::Null),
            },
        };
        Ok(params)
    }

    /// Columns the step reads through its parameters.
    pub fn referenced_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = match self {
            OpParams::AddRowId { .. } | OpParams::Custom { .. } => Vec::new(),
            OpParams::Rename { mapping } => mapping.iter().map(|(o, _)| o.clone()).collect(),
            OpParams::Select { columns } => columns.clone(),
            OpParams::ParseDateText { source, .. }
            | OpParams::ParseNumber { source, .. }
            | OpParams::ExtractRegex { source, .. }
            | OpParams::MapValues { source, .. }
            | OpParams::ReplaceValue { source, .. }
            | OpParams::ReplaceString { source, .. }
            | OpParams::CastColumn { source, .. }
            | OpParams::KeepRawSnapshot { source, .. }
            | OpParams::BinNumeric { source, .. }
            | OpParams::OneHot { source, .. } => vec![source.clone()],
            OpParams::DeriveConditional { rules, .. } => rules
                .iter()
                .flat_map(|r| r.condition.columns().map(str::to_string))
                .collect(),
            OpParams::DeriveMath { expr, .. } => expr.columns(),
            OpParams::FillnaStatic { columns, .. }
            | OpParams::FillnaDynamic { columns, .. }
            | OpParams::TrimWhitespace { columns } => columns.clone(),
            OpParams::CombineColumns { sources, .. } => sources.clone(),
            OpParams::FilterRows { condition } => condition.columns().map(str::to_string).collect(),
            OpParams::Sort { keys } => keys.iter().map(|(c, _)| c.clone()).collect(),
            OpParams::DeduplicateRows { subset } => subset.clone().unwrap_or_default(),
        };
        let mut seen = std::collections::HashSet::new();
        out.retain(|c| seen.insert(c.clone()));
        out
    }

    /// Columns the step writes, when known before execution. `None` means
    /// data-dependent (one-hot indicators, custom operators).
    pub fn produced_columns(&self) -> Option<Vec<String>> {
        Some(match self {
            OpParams::AddRowId { name } => vec![name.clone()],
            OpParams::Rename { mapping } => mapping.iter().map(|(_, n)| n.clone()).collect(),
            OpParams::Select { .. }
            | OpParams::FilterRows { .. }
            | OpParams::Sort { .. }
            | OpParams::DeduplicateRows { .. } => Vec::new(),
            OpParams::ParseNumber { target, unit_target, .. } => {
                let mut v = vec![target.clone()];
                v.extend(unit_target.clone());
                v
            }
            OpParams::ExtractRegex { targets, .. } => targets.iter().map(|(_, c)| c.clone()).collect(),
            OpParams::ParseDateText { target, .. }
            | OpParams::DeriveConditional { target, .. }
            | OpParams::DeriveMath { target, .. }
            | OpParams::MapValues { target, .. }
            | OpParams::ReplaceValue { target, .. }
            | OpParams::ReplaceString { target, .. }
            | OpParams::CastColumn { target, .. }
            | OpParams::CombineColumns { target, .. }
            | OpParams::KeepRawSnapshot { target, .. }
            | OpParams::BinNumeric { target, .. } => vec![target.clone()],
            OpParams::FillnaStatic { columns, .. }
            | OpParams::FillnaDynamic { columns, .. }
            | OpParams::TrimWhitespace { columns } => columns.clone(),
            OpParams::OneHot { .. } | OpParams::Custom { .. } => return None,
        })
    }
}

/// Column name prefix of one-hot indicators for `source`.
pub fn one_hot_prefix(source: &str) -> String {
    format!("{source}__")
}

/// `true` when `write` is a declared pattern (`prefix*`) matching `name`.
pub fn write_pattern_matches(write: &str, name: &str) -> bool {
    match write.strip_suffix('*') {
        Some(prefix) => name.starts_with(prefix),
        None => write == name,
    }
}
