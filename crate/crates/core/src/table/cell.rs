// SPDX-License-Identifier: Apache-2.0

//! Tagged scalar cell values.

use std::cmp::Ordering;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// The kind lattice every cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Null,
    Boolean,
    Integer,
    Float,
    Text,
    Date,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Null => "null",
            CellKind::Boolean => "boolean",
            CellKind::Integer => "integer",
            CellKind::Float => "float",
            CellKind::Text => "text",
            CellKind::Date => "date",
        }
    }

    /// Parses a kind name as written in plans (`"int"`, `"integer"`, `"str"`, ...).
    pub fn parse(name: &str) -> Option<CellKind> {
        let kind = match name.trim().to_ascii_lowercase().as_str() {
            "null" => CellKind::Null,
            "bool" | "boolean" => CellKind::Boolean,
            "int" | "integer" | "int64" => CellKind::Integer,
            "float" | "double" | "real" | "float64" | "number" | "numeric" => CellKind::Float,
            "text" | "string" | "str" => CellKind::Text,
            "date" => CellKind::Date,
            _ => return None,
        };
        Some(kind)
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single table cell.
///
/// Floats are always finite; constructors that could produce NaN or an
/// infinity fall back to [`CellValue::Null`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CellValue {
    Null,
    Boolean(bool),
    Integer(i64),
    Float(f64),
    Text(String),
    Date(NaiveDate),
}

impl CellValue {
    pub fn text(s: impl Into<String>) -> Self {
        CellValue::Text(s.into())
    }

    /// Builds a float cell, mapping non-finite values to `Null`.
    pub fn float(v: f64) -> Self {
        if v.is_finite() {
            CellValue::Float(v)
        } else {
            CellValue::Null
        }
    }

    pub fn date(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(CellValue::Date)
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellValue::Null => CellKind::Null,
            CellValue::Boolean(_) => CellKind::Boolean,
            CellValue::Integer(_) => CellKind::Integer,
            CellValue::Float(_) => CellKind::Float,
            CellValue::Text(_) => CellKind::Text,
            CellValue::Date(_) => CellKind::Date,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, CellValue::Null)
    }

    /// `Null` or empty text: the values fill operators treat as missing.
    pub fn is_missing(&self) -> bool {
        match self {
            CellValue::Null => true,
            CellValue::Text(s) => s.is_empty(),
            _ => false,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Canonical text form used by every serializer.
    ///
    /// `Null` renders as the empty string, dates as `YYYY-MM-DD`, and floats
    /// as the shortest decimal that round-trips.
    pub fn to_text(&self) -> String {
        match self {
            CellValue::Null => String::new(),
            CellValue::Boolean(b) => b.to_string(),
            CellValue::Integer(i) => i.to_string(),
            CellValue::Float(f) => format_float(*f),
            CellValue::Text(s) => s.clone(),
            CellValue::Date(d) => format_date(*d),
        }
    }

    /// Numeric view: integers, floats and text that parses exactly as a number.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Integer(i) => Some(*i as f64),
            CellValue::Float(f) => Some(*f),
            CellValue::Text(s) => parse_plain_number(s).and_then(|c| match c {
                CellValue::Integer(i) => Some(i as f64),
                CellValue::Float(f) => Some(f),
                _ => None,
            }),
            _ => None,
        }
    }

    /// Converts a JSON scalar into a cell. Arrays and objects are rejected.
    pub fn from_json(value: &serde_json::Value) -> Option<CellValue> {
        use serde_json::Value;
        Some(match value {
            Value::Null => CellValue::Null,
            Value::Bool(b) => CellValue::Boolean(*b),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    CellValue::Integer(i)
                } else {
                    CellValue::float(n.as_f64()?)
                }
            }
            Value::String(s) => CellValue::Text(s.clone()),
            _ => return None,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::Value;
        match self {
            CellValue::Null => Value::Null,
            CellValue::Boolean(b) => Value::Bool(*b),
            CellValue::Integer(i) => Value::from(*i),
            CellValue::Float(f) => serde_json::Number::from_f64(*f)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            CellValue::Text(s) => Value::String(s.clone()),
            CellValue::Date(d) => Value::String(format_date(*d)),
        }
    }

    /// Total order used by `sort`: booleans, then numbers, dates, text.
    /// `Null` is handled by the caller.
    pub fn sort_cmp(&self, other: &CellValue) -> Ordering {
        fn rank(v: &CellValue) -> u8 {
            match v {
                CellValue::Boolean(_) => 0,
                CellValue::Integer(_) | CellValue::Float(_) => 1,
                CellValue::Date(_) => 2,
                CellValue::Text(_) => 3,
                CellValue::Null => 4,
            }
        }
        match (self, other) {
            (CellValue::Boolean(a), CellValue::Boolean(b)) => a.cmp(b),
            (CellValue::Integer(a), CellValue::Integer(b)) => a.cmp(b),
            (CellValue::Integer(_) | CellValue::Float(_), CellValue::Integer(_) | CellValue::Float(_)) => {
                let a = self.as_number().unwrap_or(0.0);
                let b = other.as_number().unwrap_or(0.0);
                a.total_cmp(&b)
            }
            (CellValue::Date(a), CellValue::Date(b)) => a.cmp(b),
            (CellValue::Text(a), CellValue::Text(b)) => a.as_bytes().cmp(b.as_bytes()),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl From<&str> for CellValue {
    fn from(s: &str) -> Self {
        CellValue::Text(s.to_string())
    }
}

impl From<i64> for CellValue {
    fn from(v: i64) -> Self {
        CellValue::Integer(v)
    }
}

impl From<bool> for CellValue {
    fn from(v: bool) -> Self {
        CellValue::Boolean(v)
    }
}

/// Shortest round-trip decimal, always carrying a `.` or exponent so the
/// value reads back as a float.
pub fn format_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s == "-0.0" {
        return "0.0".to_string();
    }
    s
}

pub fn format_date(d: NaiveDate) -> String {
    format!("{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
}

/// Parses `-?digits` as an integer or a plain decimal/exponent float.
/// No thousands separators, no surrounding whitespace.
pub fn parse_plain_number(s: &str) -> Option<CellValue> {
    if s.is_empty() || s.trim() != s {
        return None;
    }
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    if body.is_empty() || !body.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    if body.bytes().all(|b| b.is_ascii_digit()) {
        if let Ok(i) = s.parse::<i64>() {
            return Some(CellValue::Integer(i));
        }
    }
    if !body
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'-' | b'+'))
    {
        return None;
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() => Some(CellValue::Float(f)),
        _ => None,
    }
}
