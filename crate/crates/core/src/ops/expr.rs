// SPDX-License-Identifier: Apache-2.0

//! Row-level condition and arithmetic mini-languages.
//!
//! Conditions: `<col> contains '<literal>'` or `<col> <cmp> <operand>` with
//! `cmp` one of `== != < <= > >=` and the operand a number, a quoted
//! literal, or `true`/`false`. A cell that cannot be compared makes the
//! condition false; it is never an error.
//!
//! Math: `+ - * /`, parentheses, numeric literals, column references and
//! the accessors `len(col)`, `year(col)`, `month(col)`, `day(col)`. Column
//! names that are not plain identifiers must be quoted with `"`, `` ` `` or
//! `[...]` outside accessor calls.

use std::cmp::Ordering;
use std::sync::LazyLock;

use chrono::Datelike;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::CellValue;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{text}`: {message}")]
pub struct ExprError {
    pub text: String,
    pub message: String,
}

fn err(text: &str, message: impl Into<String>) -> ExprError {
    ExprError {
        text: text.to_string(),
        message: message.into(),
    }
}

fn unquote_column(s: &str) -> String {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('`', '`'), ('[', ']'), ('\'', '\'')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return s[open.len_utf8()..s.len() - close.len_utf8()].to_string();
        }
    }
    s.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Lt,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Ge,
    ];

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "==" | "=" => Comparator::Eq,
            "!=" => Comparator::Ne,
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Comparator::Eq => ord == Ordering::Equal,
            Comparator::Ne => ord != Ordering::Equal,
            Comparator::Lt => ord == Ordering::Less,
            Comparator::Le => ord != Ordering::Greater,
            Comparator::Gt => ord == Ordering::Greater,
            Comparator::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Number(f64),
    Text(String),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConditionExpr {
    Contains {
        column: String,
        literal: String,
    },
    Compare {
        column: String,
        cmp: Comparator,
        operand: Operand,
    },
}

static CONTAINS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?is)^\s*(.+?)\s+contains\s+(['"])(.*)(['"])\s*$"#).unwrap());
static COMPARE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)^\s*(.+?)\s*(==|!=|<=|>=|=|<|>)\s*(.+?)\s*$").unwrap());

fn unescape_literal(s: &str) -> String {
    s.replace("\\'", "'").replace("\\\"", "\"")
}

impl ConditionExpr {
    pub fn parse(text: &str) -> Result<ConditionExpr, ExprError> {
        if let Some(c) = CONTAINS.captures(text) {
            if c[2] != c[4] {
                return Err(err(text, "mismatched quotes"));
            }
            let column = unquote_column(&c[1]);
            if column.is_empty() {
                return Err(err(text, "missing column"));
            }
            return Ok(ConditionExpr::Contains {
                column,
                literal: unescape_literal(&c[3]),
            });
        }
        if let Some(c) = COMPARE.captures(text) {
            let column = unquote_column(&c[1]);
            if column.is_empty() {
                return Err(err(text, "missing column"));
            }
            let cmp = Comparator::parse(&c[2]).ok_or_else(|| err(text, "unknown comparator"))?;
            let rhs = c[3].trim();
            let operand = if rhs.len() >= 2
                && ((rhs.starts_with('\'') && rhs.ends_with('\'')) || (rhs.starts_with('"') && rhs.ends_with('"')))
            {
                Operand::Text(unescape_literal(&rhs[1..rhs.len() - 1]))
            } else if rhs.eq_ignore_ascii_case("true") {
                Operand::Bool(true)
            } else if rhs.eq_ignore_ascii_case("false") {
                Operand::Bool(false)
            } else if let Some(n) = CellValue::text(rhs).as_number() {
                Operand::Number(n)
            } else {
                return Err(err(text, format!("operand `{rhs}` is not a number, quoted literal or boolean")));
            };
            return Ok(ConditionExpr::Compare { column, cmp, operand });
        }
        Err(err(text, "expected `<col> contains '<literal>'` or `<col> <cmp> <value>`"))
    }

    pub fn column(&self) -> &str {
        match self {
            ConditionExpr::Contains { column, .. } | ConditionExpr::Compare { column, .. } => column,
        }
    }

    pub fn eval(&self, cell: &CellValue) -> bool {
        if cell.is_null() {
            return false;
        }
        match self {
            ConditionExpr::Contains { literal, .. } => cell.to_text().contains(literal.as_str()),
            ConditionExpr::Compare { cmp, operand, .. } => match operand {
                Operand::Number(n) => match cell {
                    CellValue::Integer(_) | CellValue::Float(_) | CellValue::Text(_) => cell
                        .as_number()
                        .is_some_and(|v| cmp.holds(v.total_cmp(n))),
                    _ => false,
                },
                Operand::Text(lit) => cmp.holds(cell.to_text().as_bytes().cmp(lit.as_bytes())),
                Operand::Bool(b) => match cell {
                    CellValue::Boolean(v) => cmp.holds(v.cmp(b)),
                    _ => false,
                },
            },
        }
    }
}

/// A conjunction of conditions; an empty list never matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conjunction(pub Vec<ConditionExpr>);

impl Conjunction {
    pub fn parse_json(value: &serde_json::Value) -> Result<Conjunction, ExprError> {
        match value {
            serde_json::Value::String(s) => Ok(Conjunction(vec![ConditionExpr::parse(s)?])),
            serde_json::Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    let s = it
                        .as_str()
                        .ok_or_else(|| err(&it.to_string(), "condition must be a string"))?;
                    out.push(ConditionExpr::parse(s)?);
                }
                if out.is_empty() {
                    return Err(err("[]", "empty condition list"));
                }
                Ok(Conjunction(out))
            }
            other => Err(err(&other.to_string(), "condition must be a string or list of strings")),
        }
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(ConditionExpr::column)
    }

    /// `lookup` resolves a column name to the row's cell.
    pub fn eval<'a>(&self, lookup: impl Fn(&str) -> Option<&'a CellValue>) -> bool {
        !self.0.is_empty()
            && self
                .0
                .iter()
                .all(|c| lookup(c.column()).is_some_and(|cell| c.eval(cell)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Accessor {
    Len,
    Year,
    Month,
    Day,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MathExpr {
    Number(f64),
    Integer(i64),
    Column(String),
    Call(Accessor, String),
    Neg(Box<MathExpr>),
    Binary(BinOp, Box<MathExpr>, Box<MathExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn to_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Float(f) => f,
        }
    }

    fn float(v: f64) -> Option<Num> {
        v.is_finite().then_some(Num::Float(v))
    }
}

struct MathParser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> MathParser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
    }

    fn fail(&self, message: impl Into<String>) -> ExprError {
        err(self.src, format!("{} at offset {}", message.into(), self.pos))
    }

    fn expr(&mut self) -> Result<MathExpr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                '+' => BinOp::Add,
                '-' => BinOp::Sub,
                _ => break,
            };
            self.bump(c);
            let rhs = self.term()?;
            lhs = MathExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<MathExpr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.peek() {
            let op = match c {
                '*' => BinOp::Mul,
                '/' => BinOp::Div,
                _ => break,
            };
            self.bump(c);
            let rhs = self.unary()?;
            lhs = MathExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<MathExpr, ExprError> {
        if self.peek() == Some('-') {
            self.bump('-');
            return Ok(MathExpr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn quoted(&mut self, close: char) -> Result<String, ExprError> {
        let rest = self.rest();
        let end = rest.find(close).ok_or_else(|| self.fail("unterminated quoted column"))?;
        let name = rest[..end].to_string();
        self.pos += end + close.len_utf8();
        Ok(name)
    }

    fn primary(&mut self) -> Result<MathExpr, ExprError> {
        let c = self.peek().ok_or_else(|| self.fail("unexpected end of expression"))?;
        match c {
            '(' => {
                self.bump(c);
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.fail("expected `)`"));
                }
                self.bump(')');
                Ok(e)
            }
            '"' | '`' => {
                self.bump(c);
                Ok(MathExpr::Column(self.quoted(c)?))
            }
            '[' => {
                self.bump(c);
                Ok(MathExpr::Column(self.quoted(']')?))
            }
            c if c.is_ascii_digit() || c == '.' => {
                let rest = self.rest();
                let len = rest
                    .find(|ch: char| !(ch.is_ascii_digit() || ch == '.'))
                    .unwrap_or(rest.len());
                let lit = &rest[..len];
                self.pos += len;
                if let Ok(i) = lit.parse::<i64>() {
                    Ok(MathExpr::Integer(i))
                } else {
                    lit.parse::<f64>()
                        .map(MathExpr::Number)
                        .map_err(|_| self.fail(format!("bad number `{lit}`")))
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let rest = self.rest();
                let len = rest
                    .find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                    .unwrap_or(rest.len());
                let ident = &rest[..len];
                self.pos += len;
                let accessor = match ident.to_ascii_lowercase().as_str() {
                    "len" => Some(Accessor::Len),
                    "year" => Some(Accessor::Year),
                    "month" => Some(Accessor::Month),
                    "day" => Some(Accessor::Day),
                    _ => None,
                };
                if let (Some(acc), Some('(')) = (accessor, self.peek()) {
                    self.bump('(');
                    let rest = self.rest();
                    let end = rest.rfind(')').ok_or_else(|| self.fail("expected `)`"))?;
                    // The argument runs to the matching close paren at depth 0.
                    let mut depth = 0usize;
                    let mut close = None;
                    for (i, ch) in rest.char_indices() {
                        match ch {
                            '(' => depth += 1,
                            ')' if depth == 0 => {
                                close = Some(i);
                                break;
                            }
                            ')' => depth -= 1,
                            _ => {}
                        }
                    }
                    let close = close.unwrap_or(end);
                    let name = unquote_column(&rest[..close]);
                    if name.is_empty() {
                        return Err(self.fail("empty accessor argument"));
                    }
                    self.pos += close + 1;
                    Ok(MathExpr::Call(acc, name))
                } else {
                    Ok(MathExpr::Column(ident.to_string()))
                }
            }
            other => Err(self.fail(format!("unexpected `{other}`"))),
        }
    }
}

impl MathExpr {
    pub fn parse(text: &str) -> Result<MathExpr, ExprError> {
        let mut p = MathParser { src: text, pos: 0 };
        let e = p.expr()?;
        if p.peek().is_some() {
            return Err(p.fail("trailing input"));
        }
        Ok(e)
    }

    pub fn columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns(&self, out: &mut Vec<String>) {
        match self {
            MathExpr::Column(c) | MathExpr::Call(_, c) => {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
            MathExpr::Neg(e) => e.collect_columns(out),
            MathExpr::Binary(_, a, b) => {
                a.collect_columns(out);
                b.collect_columns(out);
            }
            MathExpr::Number(_) | MathExpr::Integer(_) => {}
        }
    }

    /// Evaluates against one row. Any `Null` operand, kind mismatch,
    /// overflow or division by zero yields `Null`.
    pub fn eval<'a>(&self, lookup: &impl Fn(&str) -> Option<&'a CellValue>) -> CellValue {
        match self.eval_num(lookup) {
            Some(Num::Int(i)) => CellValue::Integer(i),
            Some(Num::Float(f)) => CellValue::float(f),
            None => CellValue::Null,
        }
    }

    fn eval_num<'a>(&self, lookup: &impl Fn(&str) -> Option<&'a CellValue>) -> Option<Num> {
        match self {
            MathExpr::Integer(i) => Some(Num::Int(*i)),
            MathExpr::Number(f) => Num::float(*f),
            MathExpr::Column(c) => match lookup(c)? {
                CellValue::Integer(i) => Some(Num::Int(*i)),
                CellValue::Float(f) => Some(Num::Float(*f)),
                t @ CellValue::Text(_) => match crate::table::parse_plain_number(t.as_text()?)? {
                    CellValue::Integer(i) => Some(Num::Int(i)),
                    CellValue::Float(f) => Some(Num::Float(f)),
                    _ => None,
                },
                _ => None,
            },
            MathExpr::Call(acc, c) => {
                let cell = lookup(c)?;
                match (acc, cell) {
                    (_, CellValue::Null) => None,
                    (Accessor::Len, v) => Some(Num::Int(v.to_text().chars().count() as i64)),
                    (Accessor::Year, CellValue::Date(d)) => Some(Num::Int(d.year() as i64)),
                    (Accessor::Month, CellValue::Date(d)) => Some(Num::Int(d.month() as i64)),
                    (Accessor::Day, CellValue::Date(d)) => Some(Num::Int(d.day() as i64)),
                    _ => None,
                }
            }
            MathExpr::Neg(e) => match e.eval_num(lookup)? {
                Num::Int(i) => i.checked_neg().map(Num::Int),
                Num::Float(f) => Num::float(-f),
            },
            MathExpr::Binary(op, a, b) => {
                let x = a.eval_num(lookup)?;
                let y = b.eval_num(lookup)?;
                match (op, x, y) {
                    (BinOp::Add, Num::Int(p), Num::Int(q)) => p.checked_add(q).map(Num::Int),
                    (BinOp::Sub, Num::Int(p), Num::Int(q)) => p.checked_sub(q).map(Num::Int),
                    (BinOp::Mul, Num::Int(p), Num::Int(q)) => p.checked_mul(q).map(Num::Int),
                    (BinOp::Div, _, _) => {
                        let d = y.to_f64();
                        if d == 0.0 {
                            None
                        } else {
                            Num::float(x.to_f64() / d)
                        }
                    }
                    (BinOp::Add, _, _) => Num::float(x.to_f64() + y.to_f64()),
                    (BinOp::Sub, _, _) => Num::float(x.to_f64() - y.to_f64()),
                    (BinOp::Mul, _, _) => Num::float(x.to_f64() * y.to_f64()),
                }
            }
        }
    }
}
