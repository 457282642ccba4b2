// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference implementations of every operator, written from
//! the operator contracts rather than from the engine code, plus the
//! exhaustive small-instance runner that compares the two.
//!
//! Each operator gets one or more families: a column layout, a domain of
//! candidate rows, and a set of parameterizations. Every table with up to
//! `exhaustive_rows` rows over the domain is tried, then a few seeded random
//! tables of up to five rows.

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tablecanon::ops::{apply_op, CustomRegistry, OpContext, OpParams};
use tablecanon::plan::{Operator, PlanStep};
use tablecanon::table::{CellValue, Column, ColumnRole, Table};

use super::{date, int, sequences, t};

// ---------------------------------------------------------------------------
// Grid: the comparison shape

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub names: Vec<String>,
    pub roles: Vec<ColumnRole>,
    pub rows: Vec<Vec<CellValue>>,
}

impl Grid {
    pub fn of(table: &Table) -> Grid {
        Grid {
            names: table.columns.iter().map(|c| c.name.clone()).collect(),
            roles: table.columns.iter().map(|c| c.role).collect(),
            rows: table.rows.clone(),
        }
    }

    fn idx(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn column(&self, name: &str) -> Option<Vec<CellValue>> {
        let i = self.idx(name)?;
        Some(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    /// Replaces an existing column's cells (role kept) or appends a new one.
    fn with(mut self, name: &str, values: Vec<CellValue>, role: ColumnRole) -> Grid {
        match self.idx(name) {
            Some(i) => {
                for (r, v) in self.rows.iter_mut().zip(values) {
                    r[i] = v;
                }
            }
            None => {
                self.names.push(name.to_string());
                self.roles.push(role);
                for (r, v) in self.rows.iter_mut().zip(values) {
                    r.push(v);
                }
            }
        }
        self
    }

    fn derived(self, name: &str, values: Vec<CellValue>) -> Grid {
        self.with(name, values, ColumnRole::Canonical)
    }

    fn map_column(self, name: &str, f: impl Fn(&CellValue) -> CellValue) -> Option<Grid> {
        let values = self.column(name)?.iter().map(f).collect();
        Some(self.derived(name, values))
    }

    fn keep_rows(&self, keep: &[usize]) -> Grid {
        Grid {
            names: self.names.clone(),
            roles: self.roles.clone(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Reference primitives

/// Canonical text of a cell.
pub fn render(c: &CellValue) -> String {
    match c {
        CellValue::Null => String::new(),
        CellValue::Boolean(b) => if *b { "true" } else { "false" }.to_string(),
        CellValue::Integer(i) => format!("{i}"),
        CellValue::Float(f) => {
            if *f == 0.0 {
                "0.0".to_string()
            } else {
                format!("{f:?}")
            }
        }
        CellValue::Text(s) => s.clone(),
        CellValue::Date(d) => format!("{:04}-{:02}-{:02}", d.year(), d.month(), d.day()),
    }
}

#[derive(Debug, Clone, Copy)]
enum Num {
    I(i64),
    F(f64),
}

impl Num {
    fn f(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::F(f) => f,
        }
    }
}

/// Strict decimal literal: sign, digits, optional fraction and exponent.
fn plain_number(s: &str) -> Option<Num> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let int_digits = i - int_start;
    let mut frac_digits = 0;
    let mut is_float = false;
    if i < b.len() && b[i] == b'.' {
        is_float = true;
        i += 1;
        let fs = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        frac_digits = i - fs;
    }
    if int_digits + frac_digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        is_float = true;
        i += 1;
        if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
            i += 1;
        }
        let es = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == es {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    if !is_float {
        if let Ok(v) = s.parse::<i64>() {
            return Some(Num::I(v));
        }
    }
    s.parse::<f64>().ok().filter(|f| f.is_finite()).map(Num::F)
}

fn numeric(c: &CellValue) -> Option<Num> {
    match c {
        CellValue::Integer(i) => Some(Num::I(*i)),
        CellValue::Float(f) => Some(Num::F(*f)),
        CellValue::Text(s) => plain_number(s),
        _ => None,
    }
}

fn float_cell(f: f64) -> CellValue {
    if f.is_finite() {
        CellValue::Float(f)
    } else {
        CellValue::Null
    }
}

fn num_cell(n: Option<Num>) -> CellValue {
    match n {
        Some(Num::I(i)) => CellValue::Integer(i),
        Some(Num::F(f)) => float_cell(f),
        None => CellValue::Null,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

const CMPS: [(Cmp, &str); 6] = [
    (Cmp::Eq, "=="),
    (Cmp::Ne, "!="),
    (Cmp::Lt, "<"),
    (Cmp::Le, "<="),
    (Cmp::Gt, ">"),
    (Cmp::Ge, ">="),
];

fn holds(cmp: Cmp, o: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match cmp {
        Cmp::Eq => o == Equal,
        Cmp::Ne => o != Equal,
        Cmp::Lt => o == Less,
        Cmp::Le => o != Greater,
        Cmp::Gt => o == Greater,
        Cmp::Ge => o != Less,
    }
}

#[derive(Debug, Clone)]
enum Cond {
    Contains(String, String),
    Number(String, Cmp, f64),
    Text(String, Cmp, String),
    Bool(String, Cmp, bool),
}

impl Cond {
    fn source(&self) -> String {
        match self {
            Cond::Contains(c, l) => format!("{c} contains '{l}'"),
            Cond::Number(c, cmp, n) => format!("{c} {} {n}", cmp_symbol(*cmp)),
            Cond::Text(c, cmp, l) => format!("{c} {} '{l}'", cmp_symbol(*cmp)),
            Cond::Bool(c, cmp, b) => format!("{c} {} {b}", cmp_symbol(*cmp)),
        }
    }

    fn column(&self) -> &str {
        match self {
            Cond::Contains(c, _) | Cond::Number(c, _, _) | Cond::Text(c, _, _) | Cond::Bool(c, _, _) => c,
        }
    }

    /// Truth of the condition for one cell. Null never matches; numeric
    /// comparisons need a numeric or numeric-text cell.
    fn eval(&self, cell: &CellValue) -> bool {
        if matches!(cell, CellValue::Null) {
            return false;
        }
        match self {
            Cond::Contains(_, lit) => render(cell).contains(lit.as_str()),
            Cond::Number(_, cmp, n) => match cell {
                CellValue::Integer(_) | CellValue::Float(_) | CellValue::Text(_) => {
                    numeric(cell).is_some_and(|v| holds(*cmp, v.f().total_cmp(n)))
                }
                _ => false,
            },
            Cond::Text(_, cmp, lit) => holds(*cmp, render(cell).as_bytes().cmp(lit.as_bytes())),
            Cond::Bool(_, cmp, b) => match cell {
                CellValue::Boolean(v) => holds(*cmp, v.cmp(b)),
                _ => false,
            },
        }
    }
}

fn cmp_symbol(cmp: Cmp) -> &'static str {
    CMPS.iter().find(|(c, _)| *c == cmp).map(|(_, s)| *s).unwrap()
}

fn row_holds(g: &Grid, row: &[CellValue], conds: &[Cond]) -> bool {
    !conds.is_empty()
        && conds
            .iter()
            .all(|c| g.idx(c.column()).is_some_and(|i| c.eval(&row[i])))
}

/// Kind rank for ordering mixed columns: booleans, numbers, dates, text.
fn sort_rank(c: &CellValue) -> u8 {
    match c {
        CellValue::Boolean(_) => 0,
        CellValue::Integer(_) | CellValue::Float(_) => 1,
        CellValue::Date(_) => 2,
        CellValue::Text(_) => 3,
        CellValue::Null => 4,
    }
}

/// Key comparison with nulls last in both directions.
fn key_cmp(a: &CellValue, b: &CellValue, asc: bool) -> std::cmp::Ordering {
    let (an, bn) = (matches!(a, CellValue::Null), matches!(b, CellValue::Null));
    if an || bn {
        return an.cmp(&bn);
    }
    let natural = match (a, b) {
        (CellValue::Boolean(x), CellValue::Boolean(y)) => x.cmp(y),
        (CellValue::Integer(x), CellValue::Integer(y)) => x.cmp(y),
        (CellValue::Date(x), CellValue::Date(y)) => x.cmp(y),
        (CellValue::Text(x), CellValue::Text(y)) => x.as_bytes().cmp(y.as_bytes()),
        _ if sort_rank(a) == 1 && sort_rank(b) == 1 => numeric(a).unwrap().f().total_cmp(&numeric(b).unwrap().f()),
        _ => sort_rank(a).cmp(&sort_rank(b)),
    };
    if asc {
        natural
    } else {
        natural.reverse()
    }
}

fn roman_value(s: &str) -> Option<i64> {
    const TABLE: [(i64, &str); 13] = [
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let encode = |mut n: i64| {
        let mut out = String::new();
        for (v, sym) in TABLE {
            while n >= v {
                out.push_str(sym);
                n -= v;
            }
        }
        out
    };
    // Brute force: the numeral is canonical iff some n in 1..4000 encodes to it.
    (1..4000).find(|&n| encode(n) == s)
}

fn trim_unicode(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut a = 0;
    let mut b = chars.len();
    while a < b && chars[a].is_whitespace() {
        a += 1;
    }
    while b > a && chars[b - 1].is_whitespace() {
        b -= 1;
    }
    chars[a..b].iter().collect()
}

fn sanitize(value: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    for ch in value.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else if !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    if words.is_empty() {
        "empty".to_string()
    } else {
        words.join("_")
    }
}

// ---------------------------------------------------------------------------
// Families and runner

type OracleFn = Box<dyn Fn(&Grid) -> Option<Grid>>;

pub struct Variant {
    pub label: String,
    pub step: PlanStep,
    /// `None` means the operator must fail.
    pub oracle: OracleFn,
}

pub struct Family {
    pub names: Vec<&'static str>,
    pub domain: Vec<Vec<CellValue>>,
    pub exhaustive_rows: usize,
    pub random_tables: usize,
    pub variants: Vec<Variant>,
}

fn variant(label: impl Into<String>, step: PlanStep, oracle: impl Fn(&Grid) -> Option<Grid> + 'static) -> Variant {
    Variant {
        label: label.into(),
        step,
        oracle: Box::new(oracle),
    }
}

fn step(op: Operator) -> PlanStep {
    PlanStep::new("s", op)
}

fn single(values: &[CellValue]) -> Vec<Vec<CellValue>> {
    values.iter().map(|v| vec![v.clone()]).collect()
}

fn pairs(a: &[CellValue], b: &[CellValue]) -> Vec<Vec<CellValue>> {
    a.iter().flat_map(|x| b.iter().map(move |y| vec![x.clone(), y.clone()])).collect()
}

pub struct SuiteResult {
    pub op: Operator,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases >= 3
    }
}

fn engine(table: &Table, step: &PlanStep, registry: &CustomRegistry) -> Option<Grid> {
    let params = OpParams::from_step(step).ok()?;
    let ctx = OpContext {
        registry: Some(registry),
        fallback: None,
        step: Some(step),
    };
    apply_op(table, &params, &ctx).ok().map(|a| Grid::of(&a.table))
}

fn build_table(names: &[&str], rows: Vec<Vec<CellValue>>) -> Table {
    Table::new("t", names.iter().map(|n| Column::new(*n)).collect(), rows).expect("family rows fit the layout")
}

/// Runs every family of `op` and reports mismatches.
pub fn run_operator(op: Operator) -> SuiteResult {
    let registry = CustomRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ab1e ^ op as u64);
    let mut cases = 0;
    let mut failures = Vec::new();
    for fam in families(op) {
        let mut tables: Vec<Vec<Vec<CellValue>>> = sequences(&fam.domain, fam.exhaustive_rows);
        for _ in 0..fam.random_tables {
            let n = rng.random_range(1..=5);
            tables.push((0..n).map(|_| fam.domain[rng.random_range(0..fam.domain.len())].clone()).collect());
        }
        for rows in tables {
            let table = build_table(&fam.names, rows);
            let input = Grid::of(&table);
            for v in &fam.variants {
                cases += 1;
                let got = engine(&table, &v.step, &registry);
                let want = (v.oracle)(&input);
                if got != want && failures.len() < 8 {
                    failures.push(format!(
                        "{op} [{}] on {:?}\n  engine: {:?}\n  oracle: {:?}",
                        v.label, input.rows, got, want
                    ));
                }
            }
        }
    }
    SuiteResult { op, cases, failures }
}

// ---------------------------------------------------------------------------
// Per-operator families

pub fn families(op: Operator) -> Vec<Family> {
    match op {
        Operator::AddRowId => add_row_id(),
        Operator::Rename => rename(),
        Operator::Select => select(),
        Operator::ParseDateText => parse_date_text(),
        Operator::ParseNumber => parse_number(),
        Operator::ExtractRegex => extract_regex(),
        Operator::DeriveConditional => derive_conditional(),
        Operator::DeriveMath => derive_math(),
        Operator::MapValues => map_values(),
        Operator::ReplaceValue => replace_value(),
        Operator::ReplaceString => replace_string(),
        Operator::CastColumn => cast_column(),
        Operator::FillnaStatic => fillna_static(),
        Operator::FillnaDynamic => fillna_dynamic(),
        Operator::CombineColumns => combine_columns(),
        Operator::TrimWhitespace => trim_whitespace(),
        Operator::FilterRows => filter_rows(),
        Operator::Sort => sort(),
        Operator::DeduplicateRows => deduplicate_rows(),
        Operator::KeepRawSnapshot => keep_raw_snapshot(),
        Operator::BinNumeric => bin_numeric(),
        Operator::OneHot => one_hot(),
        Operator::Custom => custom(),
    }
}

fn add_row_id() -> Vec<Family> {
    let ids = |name: &'static str| {
        move |g: &Grid| {
            let n = g.rows.len() as i64;
            Some(g.clone().with(name, (0..n).map(CellValue::Integer).collect(), ColumnRole::Helper))
        }
    };
    vec![
        Family {
            names: vec!["a"],
            domain: single(&[t("x"), CellValue::Null, int(1)]),
            exhaustive_rows: 4,
            random_tables: 10,
            variants: vec![
                variant("default name", step(Operator::AddRowId).writes(["_row_id"]), ids("_row_id")),
                variant("named", step(Operator::AddRowId).writes(["rid"]).param("name", json!("rid")), ids("rid")),
            ],
        },
        Family {
            names: vec!["_row_id"],
            domain: single(&[t("x")]),
            exhaustive_rows: 2,
            random_tables: 0,
            variants: vec![variant("collision", step(Operator::AddRowId).writes(["_row_id"]), |_| None)],
        },
    ]
}

fn rename() -> Vec<Family> {
    let targets = [None, Some("a"), Some("b"), Some("c"), Some("x"), Some("y")];
    let mut variants = Vec::new();
    for ta in targets {
        for tb in targets {
            for tc in targets {
                let mut map = serde_json::Map::new();
                for (old, new) in [("a", ta), ("b", tb), ("c", tc)] {
                    if let Some(n) = new {
                        map.insert(old.to_string(), json!(n));
                    }
                }
                let mapping: Vec<(String, String)> = map
                    .iter()
                    .map(|(k, v)| (k.clone(), v.as_str().unwrap().to_string()))
                    .collect();
                let st = step(Operator::Rename)
                    .reads(mapping.iter().map(|(o, _)| o.clone()))
                    .writes(mapping.iter().map(|(_, n)| n.clone()))
                    .param("mapping", Value::Object(map));
                variants.push(variant(format!("{mapping:?}"), st, move |g: &Grid| {
                    let mut out = g.clone();
                    for n in out.names.iter_mut() {
                        if let Some((_, new)) = mapping.iter().find(|(o, _)| o == n) {
                            *n = new.clone();
                        }
                    }
                    let mut seen = std::collections::HashSet::new();
                    out.names.iter().all(|n| seen.insert(n.clone())).then_some(out)
                }));
            }
        }
    }
    variants.push(variant(
        "unknown source",
        step(Operator::Rename).reads(["z"]).writes(["q"]).param("mapping", json!({"z": "q"})),
        |_| None,
    ));
    vec![Family {
        names: vec!["a", "b", "c"],
        domain: vec![vec![t("1"), t("2"), t("3")], vec![CellValue::Null, int(5), t("")]],
        exhaustive_rows: 1,
        random_tables: 2,
        variants,
    }]
}

fn select() -> Vec<Family> {
    let names = ["a", "b", "c", "z"];
    let mut variants = Vec::new();
    for sel in sequences(&names, 3).into_iter().filter(|s| !s.is_empty()) {
        let cols: Vec<String> = sel.iter().map(|s| s.to_string()).collect();
        let st = step(Operator::Select).reads(cols.clone()).param("columns", json!(cols));
        variants.push(variant(format!("{cols:?}"), st, move |g: &Grid| {
            let mut seen = std::collections::HashSet::new();
            if !cols.iter().all(|c| seen.insert(c.clone())) {
                return None;
            }
            let idx: Vec<usize> = cols.iter().map(|c| g.idx(c)).collect::<Option<_>>()?;
            Some(Grid {
                names: idx.iter().map(|&i| g.names[i].clone()).collect(),
                roles: idx.iter().map(|&i| g.roles[i]).collect(),
                rows: g.rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect(),
            })
        }));
    }
    vec![Family {
        names: vec!["a", "b", "c"],
        domain: vec![vec![t("1"), t("2"), t("3")], vec![CellValue::Null, int(5), t("")]],
        exhaustive_rows: 2,
        random_tables: 0,
        variants,
    }]
}

/// Known answers for the non-slash date strings in the domain.
fn known_date(s: &str, explicit: bool) -> Option<NaiveDate> {
    let d = |y, m, dd| NaiveDate::from_ymd_opt(y, m, dd);
    match s {
        "Jan 5, 2018" | "5 January 2018" | "2018-01-05" => d(2018, 1, 5),
        "11th October 2020" => d(2020, 10, 11),
        "05.01.2018" if explicit => d(2018, 1, 5),
        _ => None,
    }
}

fn slash_parts(s: &str) -> Option<(u32, u32, i32)> {
    let parts: Vec<&str> = s.trim().split('/').collect();
    if parts.len() != 3
        || !(1..=2).contains(&parts[0].len())
        || !(1..=2).contains(&parts[1].len())
        || parts[2].len() != 4
        || !parts.iter().all(|p| p.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    Some((parts[0].parse().ok()?, parts[1].parse().ok()?, parts[2].parse().ok()?))
}

fn parse_date_text() -> Vec<Family> {
    let oracle = |explicit: bool| {
        move |g: &Grid| {
            let col = g.column("d")?;
            let day_first = col.iter().any(|c| slash_parts(&render(c)).is_some_and(|(a, _, _)| a > 12));
            let values = col
                .iter()
                .map(|c| match c {
                    CellValue::Null => CellValue::Null,
                    CellValue::Date(d) => CellValue::Date(*d),
                    other => {
                        let s = render(other);
                        let parsed = match slash_parts(&s) {
                            Some((a, b, y)) => {
                                let (m, d) = if day_first { (b, a) } else { (a, b) };
                                NaiveDate::from_ymd_opt(y, m, d)
                            }
                            None => known_date(&s, explicit),
                        };
                        parsed.map_or(CellValue::Null, CellValue::Date)
                    }
                })
                .collect();
            Some(g.clone().derived("iso", values))
        }
    };
    vec![Family {
        names: vec!["d"],
        domain: single(&[
            CellValue::Null,
            t("Jan 5, 2018"),
            t("5 January 2018"),
            t("11th October 2020"),
            t("2018-01-05"),
            t("1/5/2018"),
            t("13/5/2018"),
            t("not a date"),
            int(7),
            date(2019, 3, 4),
            t(""),
            t("05.01.2018"),
        ]),
        exhaustive_rows: 3,
        random_tables: 30,
        variants: vec![
            variant("builtin", step(Operator::ParseDateText).reads(["d"]).writes(["iso"]), oracle(false)),
            variant(
                "explicit format",
                step(Operator::ParseDateText).reads(["d"]).writes(["iso"]).param("formats", json!(["%d.%m.%Y"])),
                oracle(true),
            ),
        ],
    }]
}

/// Leftmost match of `[0-9,]+(\.[0-9]+)?` as a byte range.
fn scan_number(s: &str) -> Option<(usize, usize)> {
    let b = s.as_bytes();
    let is_part = |c: u8| c.is_ascii_digit() || c == b',';
    let start = b.iter().position(|&c| is_part(c))?;
    let mut end = start;
    while end < b.len() && is_part(b[end]) {
        end += 1;
    }
    if end + 1 < b.len() && b[end] == b'.' && b[end + 1].is_ascii_digit() {
        end += 1;
        while end < b.len() && b[end].is_ascii_digit() {
            end += 1;
        }
    }
    Some((start, end))
}

fn ref_number(c: &CellValue) -> (CellValue, CellValue) {
    if matches!(c, CellValue::Null) {
        return (CellValue::Null, CellValue::Null);
    }
    let s = render(c);
    let Some((a, b)) = scan_number(&s) else {
        return (CellValue::Null, CellValue::Null);
    };
    let digits: String = s[a..b].chars().filter(|&ch| ch != ',').collect();
    let value = if digits.contains('.') {
        digits.parse::<f64>().map_or(CellValue::Null, float_cell)
    } else {
        digits.parse::<i64>().map_or(CellValue::Null, CellValue::Integer)
    };
    let rest = s[b..].trim();
    (value, if rest.is_empty() { CellValue::Null } else { t(rest) })
}

fn parse_number() -> Vec<Family> {
    vec![Family {
        names: vec!["p"],
        domain: single(&[
            t("240,928"),
            t("5 km"),
            t(""),
            t("12.5%"),
            t("abc"),
            t("1,000.25 m"),
            CellValue::Null,
            int(42),
            t("-3 x"),
            t(","),
            t("7."),
            CellValue::Float(2.5),
        ]),
        exhaustive_rows: 3,
        random_tables: 30,
        variants: vec![
            variant(
                "value only",
                step(Operator::ParseNumber).reads(["p"]).writes(["n"]).param("target", json!("n")),
                |g: &Grid| {
                    let vals = g.column("p")?.iter().map(|c| ref_number(c).0).collect();
                    Some(g.clone().derived("n", vals))
                },
            ),
            variant(
                "value and unit",
                step(Operator::ParseNumber)
                    .reads(["p"])
                    .writes(["n", "u"])
                    .param("target", json!("n"))
                    .param("unit_target", json!("u")),
                |g: &Grid| {
                    let (vals, units): (Vec<_>, Vec<_>) = g.column("p")?.iter().map(ref_number).unzip();
                    Some(g.clone().derived("n", vals).derived("u", units))
                },
            ),
        ],
    }]
}

fn extract_regex() -> Vec<Family> {
    let years = |c: &CellValue| -> Option<(String, String)> {
        if matches!(c, CellValue::Null) {
            return None;
        }
        let s = render(c);
        let b = s.as_bytes();
        let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
        (0..b.len())
            .find(|&i| i + 9 <= b.len() && digits(i..i + 4) && b[i + 4] == b'-' && digits(i + 5..i + 9))
            .map(|i| (s[i..i + 4].to_string(), s[i + 5..i + 9].to_string()))
    };
    let country = |c: &CellValue| -> Option<String> {
        if matches!(c, CellValue::Null) {
            return None;
        }
        let s = render(c);
        let b = s.as_bytes();
        (0..b.len())
            .find(|&i| i + 5 <= b.len() && b[i] == b'(' && b[i + 1..i + 4].iter().all(u8::is_ascii_uppercase) && b[i + 4] == b')')
            .map(|i| s[i + 1..i + 4].to_string())
    };
    vec![
        Family {
            names: vec!["r"],
            domain: single(&[
                t("1990-2005"),
                t("x 2001-2002 y"),
                t("199-2005"),
                t("12345-67890"),
                CellValue::Null,
                t(""),
                t("abcd"),
                int(2000),
            ]),
            exhaustive_rows: 3,
            random_tables: 20,
            variants: vec![variant(
                "year range",
                step(Operator::ExtractRegex)
                    .reads(["r"])
                    .writes(["start_year", "end_year"])
                    .param("pattern", json!("([0-9]{4})-([0-9]{4})"))
                    .param("targets", json!({"1": "start_year", "2": "end_year"})),
                move |g: &Grid| {
                    let m: Vec<_> = g.column("r")?.iter().map(years).collect();
                    let start = m.iter().map(|x| x.as_ref().map_or(CellValue::Null, |(a, _)| t(a))).collect();
                    let end = m.iter().map(|x| x.as_ref().map_or(CellValue::Null, |(_, b)| t(b))).collect();
                    Some(g.clone().derived("start_year", start).derived("end_year", end))
                },
            )],
        },
        Family {
            names: vec!["r"],
            domain: single(&[
                t("John Smith (USA)"),
                t("(us)"),
                t("(ABCD)"),
                t("(GBR) and (FRA)"),
                CellValue::Null,
                t("USA"),
            ]),
            exhaustive_rows: 3,
            random_tables: 10,
            variants: vec![variant(
                "country code",
                step(Operator::ExtractRegex)
                    .reads(["r"])
                    .writes(["country"])
                    .param("pattern", json!(r"\(([A-Z]{3})\)"))
                    .param("targets", json!({"1": "country"})),
                move |g: &Grid| {
                    let v = g.column("r")?.iter().map(|c| country(c).map_or(CellValue::Null, |s| t(&s))).collect();
                    Some(g.clone().derived("country", v))
                },
            )],
        },
    ]
}

fn conditional_variant(label: String, rules: Vec<(Cond, CellValue)>, default: Option<CellValue>) -> Variant {
    let rules_json: Vec<Value> = rules
        .iter()
        .map(|(c, v)| json!({"condition": c.source(), "value": v.to_json()}))
        .collect();
    let mut st = step(Operator::DeriveConditional)
        .reads(["v"])
        .writes(["out"])
        .param("rules", json!(rules_json))
        .param("target", json!("out"));
    if let Some(d) = &default {
        st = st.param("default", d.to_json());
    }
    let default = default.unwrap_or(CellValue::Null);
    variant(label, st, move |g: &Grid| {
        let vals = g
            .rows
            .iter()
            .map(|row| {
                rules
                    .iter()
                    .find(|(c, _)| row_holds(g, row, std::slice::from_ref(c)))
                    .map_or(default.clone(), |(_, v)| v.clone())
            })
            .collect();
        Some(g.clone().derived("out", vals))
    })
}

fn derive_conditional() -> Vec<Family> {
    let mut variants = Vec::new();
    for (cmp, sym) in CMPS {
        for cond in [
            Cond::Number("v".into(), cmp, 5.0),
            Cond::Text("v".into(), cmp, "Gold medal in 100m".into()),
            Cond::Bool("v".into(), cmp, true),
        ] {
            variants.push(conditional_variant(
                format!("{sym} {}", cond.source()),
                vec![(cond, t("hit"))],
                Some(t("miss")),
            ));
        }
    }
    variants.push(conditional_variant(
        "contains".into(),
        vec![(Cond::Contains("v".into(), "Gold".into()), CellValue::Boolean(true))],
        Some(CellValue::Boolean(false)),
    ));
    variants.push(conditional_variant(
        "contains empty".into(),
        vec![(Cond::Contains("v".into(), String::new()), int(1))],
        None,
    ));
    variants.push(conditional_variant(
        "first match wins".into(),
        vec![
            (Cond::Contains("v".into(), "Gold".into()), int(1)),
            (Cond::Number("v".into(), Cmp::Gt, 4.0), int(2)),
            (Cond::Contains("v".into(), "o".into()), int(3)),
        ],
        Some(int(0)),
    ));
    variants.push(variant(
        "malformed condition",
        step(Operator::DeriveConditional)
            .reads(["v"])
            .writes(["out"])
            .param("rules", json!([{"condition": "v ~~ 3", "value": 1}]))
            .param("target", json!("out")),
        |_| None,
    ));
    vec![Family {
        names: vec!["v"],
        domain: single(&[
            CellValue::Null,
            CellValue::Boolean(true),
            CellValue::Boolean(false),
            int(3),
            int(5),
            int(7),
            CellValue::Float(5.0),
            t("7"),
            t("Gold medal in 100m"),
            t("x"),
            t(""),
            date(2020, 1, 1),
        ]),
        exhaustive_rows: 1,
        random_tables: 15,
        variants,
    }]
}

fn math_bin(x: Option<Num>, y: Option<Num>, op: char) -> CellValue {
    let (Some(x), Some(y)) = (x, y) else { return CellValue::Null };
    match (op, x, y) {
        ('/', _, _) => {
            if y.f() == 0.0 {
                CellValue::Null
            } else {
                float_cell(x.f() / y.f())
            }
        }
        ('+', Num::I(a), Num::I(b)) => a.checked_add(b).map_or(CellValue::Null, CellValue::Integer),
        ('-', Num::I(a), Num::I(b)) => a.checked_sub(b).map_or(CellValue::Null, CellValue::Integer),
        ('*', Num::I(a), Num::I(b)) => a.checked_mul(b).map_or(CellValue::Null, CellValue::Integer),
        ('+', _, _) => float_cell(x.f() + y.f()),
        ('-', _, _) => float_cell(x.f() - y.f()),
        ('*', _, _) => float_cell(x.f() * y.f()),
        _ => unreachable!(),
    }
}

fn as_num(c: &CellValue) -> Option<Num> {
    numeric(c)
}

fn cell_num(c: &CellValue) -> Option<Num> {
    match c {
        CellValue::Integer(i) => Some(Num::I(*i)),
        CellValue::Float(f) => Some(Num::F(*f)),
        _ => None,
    }
}

fn derive_math() -> Vec<Family> {
    let math = |expr: &'static str, f: fn(&CellValue, &CellValue) -> CellValue| {
        variant(
            expr,
            step(Operator::DeriveMath)
                .reads(["a", "b"])
                .writes(["m"])
                .param("expr", json!(expr))
                .param("target", json!("m")),
            move |g: &Grid| {
                let (ia, ib) = (g.idx("a")?, g.idx("b")?);
                let vals = g.rows.iter().map(|r| f(&r[ia], &r[ib])).collect();
                Some(g.clone().derived("m", vals))
            },
        )
    };
    let domain = [
        CellValue::Null,
        int(2),
        int(0),
        CellValue::Float(1.5),
        t("3"),
        t("x"),
        CellValue::Boolean(true),
        date(2020, 10, 11),
    ];
    vec![Family {
        names: vec!["a", "b"],
        domain: pairs(&domain, &domain),
        exhaustive_rows: 1,
        random_tables: 30,
        variants: vec![
            math("a + b", |a, b| math_bin(as_num(a), as_num(b), '+')),
            math("a - b", |a, b| math_bin(as_num(a), as_num(b), '-')),
            math("a * b", |a, b| math_bin(as_num(a), as_num(b), '*')),
            math("a / b", |a, b| math_bin(as_num(a), as_num(b), '/')),
            math("a * 2 + 1", |a, _| {
                let prod = math_bin(as_num(a), Some(Num::I(2)), '*');
                math_bin(cell_num(&prod), Some(Num::I(1)), '+')
            }),
            math("len(a)", |a, _| match a {
                CellValue::Null => CellValue::Null,
                other => int(render(other).chars().count() as i64),
            }),
            math("year(a)", |a, _| match a {
                CellValue::Date(d) => int(d.year() as i64),
                _ => CellValue::Null,
            }),
            math("month(a)", |a, _| match a {
                CellValue::Date(d) => int(d.month() as i64),
                _ => CellValue::Null,
            }),
            math("day(b)", |_, b| match b {
                CellValue::Date(d) => int(d.day() as i64),
                _ => CellValue::Null,
            }),
        ],
    }]
}

fn map_values() -> Vec<Family> {
    let mapping = || vec![("Yes", CellValue::Boolean(true)), ("No", CellValue::Boolean(false)), ("1", t("one"))];
    let oracle = |target: &'static str, strict: bool| {
        move |g: &Grid| {
            let mut vals = Vec::new();
            for c in g.column("m")? {
                if matches!(c, CellValue::Null) {
                    vals.push(c);
                    continue;
                }
                match mapping().into_iter().find(|(k, _)| *k == render(&c)) {
                    Some((_, v)) => vals.push(v),
                    None if strict => return None,
                    None => vals.push(c),
                }
            }
            Some(g.clone().derived(target, vals))
        }
    };
    let params = json!({"Yes": true, "No": false, "1": "one"});
    vec![Family {
        names: vec!["m"],
        domain: single(&[t("Yes"), t("No"), t("Maybe"), CellValue::Null, t(""), int(1), t("yes")]),
        exhaustive_rows: 3,
        random_tables: 20,
        variants: vec![
            variant(
                "lenient",
                step(Operator::MapValues).reads(["m"]).writes(["flag"]).param("mapping", params.clone()).param("target", json!("flag")),
                oracle("flag", false),
            ),
            variant(
                "strict",
                step(Operator::MapValues)
                    .reads(["m"])
                    .writes(["flag"])
                    .param("mapping", params.clone())
                    .param("target", json!("flag"))
                    .param("strict", json!(true)),
                oracle("flag", true),
            ),
            variant(
                "in place",
                step(Operator::MapValues).reads(["m"]).writes(["m"]).param("mapping", params),
                oracle("m", false),
            ),
        ],
    }]
}

fn replace_value() -> Vec<Family> {
    let oracle = |from: &'static [&'static str], to: CellValue, target: &'static str| {
        move |g: &Grid| {
            let vals = g
                .column("r")?
                .into_iter()
                .map(|c| if !matches!(c, CellValue::Null) && from.contains(&render(&c).as_str()) { to.clone() } else { c })
                .collect();
            Some(g.clone().derived(target, vals))
        }
    };
    vec![Family {
        names: vec!["r"],
        domain: single(&[t("n/a"), t("-"), t("x"), CellValue::Null, t("N/A"), int(0), t("")]),
        exhaustive_rows: 3,
        random_tables: 20,
        variants: vec![
            variant(
                "markers to null",
                step(Operator::ReplaceValue).reads(["r"]).writes(["r"]).param("from", json!(["n/a", "-"])).param("to", Value::Null),
                oracle(&["n/a", "-"], CellValue::Null, "r"),
            ),
            variant(
                "zero to text",
                step(Operator::ReplaceValue)
                    .reads(["r"])
                    .writes(["r2"])
                    .param("from", json!("0"))
                    .param("to", json!("zero"))
                    .param("target", json!("r2")),
                oracle(&["0"], t("zero"), "r2"),
            ),
        ],
    }]
}

fn replace_string() -> Vec<Family> {
    let text_map = |target: &'static str, f: fn(&str) -> String| {
        move |g: &Grid| {
            let vals = g
                .column("s")?
                .into_iter()
                .map(|c| match c {
                    CellValue::Text(s) => CellValue::Text(f(&s)),
                    other => other,
                })
                .collect();
            Some(g.clone().derived(target, vals))
        }
    };
    let collapse_ws = |s: &str| {
        let mut out = String::new();
        let mut in_run = false;
        for ch in s.chars() {
            if ch.is_whitespace() {
                if !in_run {
                    out.push(' ');
                }
                in_run = true;
            } else {
                out.push(ch);
                in_run = false;
            }
        }
        out
    };
    vec![Family {
        names: vec!["s"],
        domain: single(&[t("1,000"), t("a  b"), t("  "), t(""), CellValue::Null, int(1000), t("x,y,z"), t("a\tb")]),
        exhaustive_rows: 3,
        random_tables: 20,
        variants: vec![
            variant(
                "plain",
                step(Operator::ReplaceString)
                    .reads(["s"])
                    .writes(["s2"])
                    .param("pattern", json!(","))
                    .param("replacement", json!(""))
                    .param("target", json!("s2")),
                text_map("s2", |s| s.chars().filter(|&c| c != ',').collect()),
            ),
            variant(
                "regex whitespace",
                step(Operator::ReplaceString)
                    .reads(["s"])
                    .writes(["s"])
                    .param("pattern", json!(r"\s+"))
                    .param("replacement", json!(" "))
                    .param("regex", json!(true)),
                text_map("s", collapse_ws),
            ),
            variant(
                "regex digits",
                step(Operator::ReplaceString)
                    .reads(["s"])
                    .writes(["s"])
                    .param("pattern", json!("[0-9]"))
                    .param("replacement", json!("#"))
                    .param("regex", json!(true)),
                text_map("s", |s| s.chars().map(|c| if c.is_ascii_digit() { '#' } else { c }).collect()),
            ),
        ],
    }]
}

/// Reference cast; `None` means the value does not convert.
fn ref_cast(c: &CellValue, to: &str) -> Option<CellValue> {
    use CellValue as V;
    if matches!(c, V::Null) {
        return Some(V::Null);
    }
    let integral = |f: f64| (f.fract() == 0.0 && f.abs() < 9.0e15).then(|| V::Integer(f as i64));
    match to {
        "text" => Some(t(&render(c))),
        "integer" => match c {
            V::Integer(_) => Some(c.clone()),
            V::Float(f) => integral(*f),
            V::Boolean(b) => Some(int(*b as i64)),
            V::Text(s) => match plain_number(s)? {
                Num::I(i) => Some(int(i)),
                Num::F(f) => integral(f),
            },
            _ => None,
        },
        "float" => match c {
            V::Boolean(b) => Some(V::Float(if *b { 1.0 } else { 0.0 })),
            V::Integer(_) | V::Float(_) | V::Text(_) => Some(float_cell(numeric(c)?.f())),
            _ => None,
        },
        "boolean" => match c {
            V::Boolean(_) => Some(c.clone()),
            V::Integer(0) => Some(V::Boolean(false)),
            V::Integer(1) => Some(V::Boolean(true)),
            V::Text(s) => match s.to_lowercase().as_str() {
                "true" | "1" => Some(V::Boolean(true)),
                "false" | "0" => Some(V::Boolean(false)),
                _ => None,
            },
            _ => None,
        },
        "date" => match c {
            V::Date(_) => Some(c.clone()),
            V::Text(s) => known_date(s, false).map(V::Date),
            _ => None,
        },
        _ => unreachable!(),
    }
}

fn cast_column() -> Vec<Family> {
    let mut variants = Vec::new();
    for to in ["integer", "float", "boolean", "text", "date"] {
        for strict in [false, true] {
            variants.push(variant(
                format!("{to} strict={strict}"),
                step(Operator::CastColumn)
                    .reads(["c"])
                    .writes(["k"])
                    .param("to", json!(to))
                    .param("target", json!("k"))
                    .param("strict", json!(strict)),
                move |g: &Grid| {
                    let mut vals = Vec::new();
                    for c in g.column("c")? {
                        match ref_cast(&c, to) {
                            Some(v) => vals.push(v),
                            None if strict => return None,
                            None => vals.push(CellValue::Null),
                        }
                    }
                    Some(g.clone().derived("k", vals))
                },
            ));
        }
    }
    variants.push(variant(
        "unknown kind",
        step(Operator::CastColumn).reads(["c"]).writes(["k"]).param("to", json!("decimal128")),
        |_| None,
    ));
    vec![Family {
        names: vec!["c"],
        domain: single(&[
            CellValue::Null,
            t("12"),
            t("12.0"),
            t("12.5"),
            t("abc"),
            t("true"),
            t("0"),
            int(3),
            CellValue::Float(2.0),
            CellValue::Float(2.5),
            CellValue::Boolean(true),
            t("2018-01-05"),
            date(2021, 2, 3),
            t("-4"),
            t("FALSE"),
        ]),
        exhaustive_rows: 2,
        random_tables: 20,
        variants,
    }]
}

fn is_missing(c: &CellValue) -> bool {
    matches!(c, CellValue::Null) || matches!(c, CellValue::Text(s) if s.is_empty())
}

fn fillna_static() -> Vec<Family> {
    let fill = |cols: &'static [&'static str], value: CellValue| {
        move |g: &Grid| {
            let mut out = g.clone();
            for c in cols {
                out = out.map_column(c, |v| if is_missing(v) { value.clone() } else { v.clone() })?;
            }
            Some(out)
        }
    };
    let domain = [CellValue::Null, t(""), t("x"), int(1)];
    vec![Family {
        names: vec!["f", "g"],
        domain: pairs(&domain, &domain),
        exhaustive_rows: 2,
        random_tables: 40,
        variants: vec![
            variant(
                "one column",
                step(Operator::FillnaStatic).reads(["f"]).writes(["f"]).param("columns", json!(["f"])).param("value", json!(0)),
                fill(&["f"], int(0)),
            ),
            variant(
                "two columns",
                step(Operator::FillnaStatic)
                    .reads(["f", "g"])
                    .writes(["f", "g"])
                    .param("columns", json!(["f", "g"]))
                    .param("value", json!("none")),
                fill(&["f", "g"], t("none")),
            ),
        ],
    }]
}

fn ref_fill(values: Vec<CellValue>, rule: &str) -> Option<Vec<CellValue>> {
    let mut v = values;
    match rule {
        "forward_fill" => {
            for i in 1..v.len() {
                if is_missing(&v[i]) {
                    // Nearest non-missing value above, if any.
                    if let Some(j) = (0..i).rev().find(|&j| !is_missing(&v[j])) {
                        v[i] = v[j].clone();
                    }
                }
            }
        }
        "backward_fill" => {
            let n = v.len();
            for i in (0..n).rev() {
                if is_missing(&v[i]) {
                    if let Some(j) = (i + 1..n).find(|&j| !is_missing(&v[j])) {
                        v[i] = v[j].clone();
                    }
                }
            }
        }
        "column_mean" => {
            let present: Vec<&CellValue> = v.iter().filter(|c| !is_missing(c)).collect();
            let nums: Vec<f64> = present.iter().filter_map(|c| cell_num(c).map(Num::f)).collect();
            if nums.len() != present.len() {
                return None;
            }
            if !nums.is_empty() {
                let mean = float_cell(nums.iter().sum::<f64>() / nums.len() as f64);
                for c in v.iter_mut().filter(|c| is_missing(c)) {
                    *c = mean.clone();
                }
            }
        }
        "column_mode" => {
            let present: Vec<CellValue> = v.iter().filter(|c| !is_missing(c)).cloned().collect();
            let count = |x: &CellValue| present.iter().filter(|y| *y == x).count();
            let best = present.iter().map(count).max();
            if let Some(best) = best {
                let mode = present.iter().find(|x| count(x) == best).unwrap().clone();
                for c in v.iter_mut().filter(|c| is_missing(c)) {
                    *c = mode.clone();
                }
            }
        }
        _ => return None,
    }
    Some(v)
}

fn fillna_dynamic() -> Vec<Family> {
    let rule_variant = |rule: &'static str| {
        variant(
            rule,
            step(Operator::FillnaDynamic).reads(["f"]).writes(["f"]).param("columns", json!(["f"])).param("rule", json!(rule)),
            move |g: &Grid| {
                let vals = ref_fill(g.column("f")?, rule)?;
                Some(g.clone().derived("f", vals))
            },
        )
    };
    vec![
        Family {
            names: vec!["f"],
            domain: single(&[CellValue::Null, t(""), int(1), int(4), t("x")]),
            exhaustive_rows: 4,
            random_tables: 20,
            variants: vec![
                rule_variant("forward_fill"),
                rule_variant("backward_fill"),
                rule_variant("column_mode"),
                rule_variant("median"),
            ],
        },
        Family {
            names: vec!["f"],
            domain: single(&[CellValue::Null, int(1), int(4), CellValue::Float(2.5), t(""), t("x"), t("3")]),
            exhaustive_rows: 3,
            random_tables: 20,
            variants: vec![rule_variant("column_mean")],
        },
    ]
}

fn combine_columns() -> Vec<Family> {
    let combine = |sources: &'static [&'static str], sep: &'static str, target: &'static str| {
        variant(
            format!("{sources:?} sep={sep:?}"),
            step(Operator::CombineColumns)
                .reads(sources.iter().copied())
                .writes([target])
                .param("sources", json!(sources))
                .param("separator", json!(sep))
                .param("target", json!(target)),
            move |g: &Grid| {
                let idx: Vec<usize> = sources.iter().map(|s| g.idx(s)).collect::<Option<_>>()?;
                let vals = g
                    .rows
                    .iter()
                    .map(|r| t(&idx.iter().map(|&i| render(&r[i])).collect::<Vec<_>>().join(sep)))
                    .collect();
                Some(g.clone().derived(target, vals))
            },
        )
    };
    let domain = [CellValue::Null, t("x"), t(""), int(1), date(2000, 2, 29)];
    vec![Family {
        names: vec!["a", "b"],
        domain: pairs(&domain, &domain),
        exhaustive_rows: 2,
        random_tables: 30,
        variants: vec![combine(&["a", "b"], " ", "ab"), combine(&["a", "b"], "-", "ab"), combine(&["b", "a"], "", "ba")],
    }]
}

fn trim_whitespace() -> Vec<Family> {
    vec![Family {
        names: vec!["w"],
        domain: single(&[t(" a "), t("\u{a0}b\u{3000}"), t("a b"), t(""), CellValue::Null, int(1), t("\t\n"), t("x\u{200b}")]),
        exhaustive_rows: 3,
        random_tables: 20,
        variants: vec![variant(
            "trim",
            step(Operator::TrimWhitespace).reads(["w"]).writes(["w"]).param("columns", json!(["w"])),
            |g: &Grid| {
                g.clone().map_column("w", |c| match c {
                    CellValue::Text(s) => t(&trim_unicode(s)),
                    other => other.clone(),
                })
            },
        )],
    }]
}

fn filter_rows() -> Vec<Family> {
    let filter = |label: &'static str, conds: Vec<Cond>| {
        let sources: Vec<String> = conds.iter().map(Cond::source).collect();
        let mut reads: Vec<String> = conds.iter().map(|c| c.column().to_string()).collect();
        reads.dedup();
        variant(
            label,
            step(Operator::FilterRows).reads(reads).param("condition", json!(sources)),
            move |g: &Grid| {
                let keep: Vec<usize> = (0..g.rows.len()).filter(|&i| row_holds(g, &g.rows[i], &conds)).collect();
                Some(g.keep_rows(&keep))
            },
        )
    };
    vec![Family {
        names: vec!["a", "b"],
        domain: pairs(
            &[CellValue::Null, int(1), int(3), t("5"), t("x"), CellValue::Boolean(true)],
            &[t("x"), t("y"), CellValue::Null],
        ),
        exhaustive_rows: 3,
        random_tables: 30,
        variants: vec![
            filter("a > 2", vec![Cond::Number("a".into(), Cmp::Gt, 2.0)]),
            filter(
                "a > 2 and b contains x",
                vec![Cond::Number("a".into(), Cmp::Gt, 2.0), Cond::Contains("b".into(), "x".into())],
            ),
            filter("b == 'y'", vec![Cond::Text("b".into(), Cmp::Eq, "y".into())]),
        ],
    }]
}

fn sort() -> Vec<Family> {
    let sorter = |label: &'static str, keys: Vec<(&'static str, bool)>| {
        let by: Vec<&str> = keys.iter().map(|(c, _)| *c).collect();
        let asc: Vec<bool> = keys.iter().map(|(_, a)| *a).collect();
        variant(
            label,
            step(Operator::Sort).reads(by.clone()).param("by", json!(by)).param("ascending", json!(asc)),
            move |g: &Grid| {
                let idx: Vec<(usize, bool)> = keys.iter().map(|(c, a)| g.idx(c).map(|i| (i, *a))).collect::<Option<_>>()?;
                // Stable insertion sort: a row moves only past strictly greater rows.
                let mut order: Vec<usize> = Vec::new();
                for r in 0..g.rows.len() {
                    let pos = order
                        .iter()
                        .position(|&o| {
                            idx.iter()
                                .map(|&(i, a)| key_cmp(&g.rows[r][i], &g.rows[o][i], a))
                                .find(|x| x.is_ne())
                                .is_some_and(|x| x.is_lt())
                        })
                        .unwrap_or(order.len());
                    order.insert(pos, r);
                }
                Some(g.keep_rows(&order))
            },
        )
    };
    vec![Family {
        names: vec!["a", "b"],
        domain: pairs(
            &[
                CellValue::Null,
                int(1),
                int(2),
                CellValue::Float(1.5),
                t("b"),
                t("a"),
                CellValue::Boolean(false),
                date(2001, 1, 1),
            ],
            &[int(1), int(2)],
        ),
        exhaustive_rows: 3,
        random_tables: 40,
        variants: vec![
            sorter("a asc", vec![("a", true)]),
            sorter("a desc", vec![("a", false)]),
            sorter("a asc, b desc", vec![("a", true), ("b", false)]),
        ],
    }]
}

fn deduplicate_rows() -> Vec<Family> {
    let dedup = |label: &'static str, subset: Option<Vec<&'static str>>| {
        let mut st = step(Operator::DeduplicateRows);
        if let Some(s) = &subset {
            st = st.reads(s.clone()).param("subset", json!(s));
        }
        variant(label, st, move |g: &Grid| {
            let cols: Vec<usize> = match &subset {
                Some(s) => s.iter().map(|c| g.idx(c)).collect::<Option<_>>()?,
                None => (0..g.names.len()).collect(),
            };
            let key = |r: usize| cols.iter().map(|&c| g.rows[r][c].clone()).collect::<Vec<_>>();
            let keep: Vec<usize> = (0..g.rows.len()).filter(|&r| (0..r).all(|p| key(p) != key(r))).collect();
            Some(g.keep_rows(&keep))
        })
    };
    vec![Family {
        names: vec!["a", "b"],
        domain: pairs(&[t("x"), t("y"), CellValue::Null, int(1), t("1")], &[int(1), int(2)]),
        exhaustive_rows: 3,
        random_tables: 30,
        variants: vec![dedup("all columns", None), dedup("subset a", Some(vec!["a"]))],
    }]
}

fn keep_raw_snapshot() -> Vec<Family> {
    let snap = |source: &'static str| {
        let target = format!("{source}_raw");
        variant(
            format!("snapshot {source}"),
            step(Operator::KeepRawSnapshot).reads([source]).writes([target.clone()]),
            move |g: &Grid| {
                let i = g.idx(source)?;
                if g.idx(&target).is_some() {
                    return None;
                }
                let mut out = g.clone();
                out.names.insert(i + 1, target.clone());
                out.roles.insert(i + 1, ColumnRole::RawSnapshot);
                for r in out.rows.iter_mut() {
                    let v = r[i].clone();
                    r.insert(i + 1, v);
                }
                Some(out)
            },
        )
    };
    let domain = [t("x"), CellValue::Null, int(1)];
    vec![
        Family {
            names: vec!["a", "b"],
            domain: pairs(&domain, &domain),
            exhaustive_rows: 2,
            random_tables: 10,
            variants: vec![snap("a"), snap("b")],
        },
        Family {
            names: vec!["a", "a_raw"],
            domain: vec![vec![t("x"), t("x")]],
            exhaustive_rows: 2,
            random_tables: 0,
            variants: vec![snap("a")],
        },
    ]
}

fn bin_numeric() -> Vec<Family> {
    let bins = |label: &'static str, edges: &'static [f64], labels: Option<&'static [&'static str]>| {
        let mut st = step(Operator::BinNumeric).reads(["x"]).writes(["bin"]).param("edges", json!(edges)).param("target", json!("bin"));
        if let Some(l) = labels {
            st = st.param("labels", json!(l));
        }
        variant(label, st, move |g: &Grid| {
            let vals = g
                .column("x")?
                .iter()
                .map(|c| {
                    let Some(x) = numeric(c).map(Num::f) else { return CellValue::Null };
                    let last = edges.len() - 1;
                    let bin = (0..last).find(|&i| edges[i] <= x && (x < edges[i + 1] || (i + 1 == last && x == edges[last])));
                    match (bin, labels) {
                        (None, _) => CellValue::Null,
                        (Some(i), Some(l)) => t(l[i]),
                        (Some(i), None) => int(i as i64),
                    }
                })
                .collect();
            Some(g.clone().derived("bin", vals))
        })
    };
    vec![Family {
        names: vec!["x"],
        domain: single(&[
            int(-1),
            int(0),
            int(5),
            CellValue::Float(9.999),
            int(10),
            int(15),
            int(20),
            CellValue::Float(20.5),
            CellValue::Null,
            t("10"),
            t("x"),
            CellValue::Boolean(true),
        ]),
        exhaustive_rows: 2,
        random_tables: 20,
        variants: vec![
            bins("edges 0,10,20", &[0.0, 10.0, 20.0], None),
            bins("labelled", &[0.0, 10.0, 20.0], Some(&["low", "high"])),
            bins("single bin", &[0.0, 10.0], None),
            variant(
                "decreasing edges",
                step(Operator::BinNumeric).reads(["x"]).writes(["bin"]).param("edges", json!([10, 0])).param("target", json!("bin")),
                |_| None,
            ),
        ],
    }]
}

fn one_hot() -> Vec<Family> {
    let encode = |max: Option<usize>| {
        let mut st = step(Operator::OneHot).reads(["src"]).writes(["src__*"]);
        if let Some(m) = max {
            st = st.param("max_categories", json!(m));
        }
        variant(format!("max={max:?}"), st, move |g: &Grid| {
            let col = g.column("src")?;
            let mut cats: Vec<String> = Vec::new();
            for c in col.iter().filter(|c| !matches!(c, CellValue::Null)) {
                if !cats.contains(&render(c)) {
                    cats.push(render(c));
                }
            }
            if cats.len() > max.unwrap_or(64) {
                return None;
            }
            let mut out = g.clone();
            let mut used: Vec<String> = Vec::new();
            for cat in &cats {
                let base = format!("src__{}", sanitize(cat));
                let mut name = base.clone();
                let mut k = 2;
                while used.contains(&name) {
                    name = format!("{base}_{k}");
                    k += 1;
                }
                used.push(name.clone());
                let vals = col.iter().map(|c| CellValue::Boolean(!matches!(c, CellValue::Null) && &render(c) == cat)).collect();
                out = out.with(&name, vals, ColumnRole::Derived);
            }
            Some(out)
        })
    };
    vec![Family {
        names: vec!["src"],
        domain: single(&[t("a"), t("b"), t("A b"), t("a-b"), CellValue::Null, int(1)]),
        exhaustive_rows: 4,
        random_tables: 20,
        variants: vec![encode(None), encode(Some(2))],
    }]
}

fn custom() -> Vec<Family> {
    vec![Family {
        names: vec!["r"],
        domain: single(&[t("III"), t("XIV"), t("iv"), t("IIII"), t(""), CellValue::Null, t(" X "), t("MCMXC"), int(3)]),
        exhaustive_rows: 2,
        random_tables: 20,
        variants: vec![
            variant(
                "roman_to_int",
                step(Operator::Custom).reads(["r"]).writes(["n"]).param("name", json!("roman_to_int")),
                |g: &Grid| {
                    let vals = g
                        .column("r")?
                        .iter()
                        .map(|c| match c {
                            CellValue::Text(s) => roman_value(s.trim()).map_or(CellValue::Null, int),
                            _ => CellValue::Null,
                        })
                        .collect();
                    Some(g.clone().derived("n", vals))
                },
            ),
            variant(
                "identity",
                step(Operator::Custom).reads(["r"]).param("name", json!("identity")),
                |g: &Grid| Some(g.clone()),
            ),
            variant("unregistered", step(Operator::Custom).reads(["r"]).param("name", json!("nope")), |_| None),
        ],
    }]
}
