// SPDX-License-Identifier: Apache-2.0

//! Registered deterministic functions for the `custom` operator.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde_json::Value;

use crate::plan::PlanStep;
use crate::table::{CellValue, Column, Table};

/// What a custom function sees: the step's read-restricted view plus its
/// declared columns and free-form `args`.
pub struct CustomCall<'a> {
    pub view: &'a Table,
    pub args: &'a Value,
    pub reads: &'a [String],
    pub writes: &'a [String],
}

impl CustomCall<'_> {
    /// `args.<key>` as a string, else the single declared column in `fallback`.
    pub fn column_arg(&self, key: &str, fallback: &[String]) -> Result<String, String> {
        if let Some(s) = self.args.get(key).and_then(Value::as_str) {
            return Ok(s.to_string());
        }
        match fallback {
            [one] => Ok(one.clone()),
            _ => Err(format!("`{key}` is ambiguous; pass it in args")),
        }
    }
}

pub type CustomFn = Arc<dyn Fn(&CustomCall<'_>) -> Result<Table, String> + Send + Sync>;

/// Generates and runs code for custom steps nobody registered. Output is
/// checked by the executor like any other step.
pub trait CodegenFallback: Send + Sync {
    fn run(&self, step: &PlanStep, view: &Table) -> Result<Table, String>;
}

/// Immutable after construction; clone freely.
#[derive(Clone)]
pub struct CustomRegistry {
    fns: BTreeMap<String, CustomFn>,
}

impl fmt::Debug for CustomRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.fns.keys()).finish()
    }
}

impl Default for CustomRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl CustomRegistry {
    pub fn empty() -> Self {
        CustomRegistry { fns: BTreeMap::new() }
    }

    /// `roman_to_int` and `identity`.
    pub fn builtin() -> Self {
        Self::empty()
            .with("identity", |call| Ok(call.view.clone()))
            .with("roman_to_int", roman_to_int_op)
    }

    pub fn with<F>(mut self, name: &str, f: F) -> Self
    where
        F: Fn(&CustomCall<'_>) -> Result<Table, String> + Send + Sync + 'static,
    {
        self.fns.insert(name.to_string(), Arc::new(f));
        self
    }

    pub fn get(&self, name: &str) -> Option<&CustomFn> {
        self.fns.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fns.keys().map(String::as_str)
    }
}

static ROMAN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^M{0,3}(CM|CD|D?C{0,3})(XC|XL|L?X{0,3})(IX|IV|V?I{0,3})$").expect("static pattern")
});

/// Value of a canonical uppercase Roman numeral.
pub fn roman_to_int(s: &str) -> Option<i64> {
    if s.is_empty() || !ROMAN.is_match(s) {
        return None;
    }
    let digit = |c: char| match c {
        'I' => 1,
        'V' => 5,
        'X' => 10,
        'L' => 50,
        'C' => 100,
        'D' => 500,
        'M' => 1000,
        _ => 0,
    };
    let chars: Vec<i64> = s.chars().map(digit).collect();
    let mut total = 0;
    for (i, &v) in chars.iter().enumerate() {
        if chars.get(i + 1).is_some_and(|&next| next > v) {
            total -= v;
        } else {
            total += v;
        }
    }
    Some(total)
}

fn roman_to_int_op(call: &CustomCall<'_>) -> Result<Table, String> {
    let source = call.column_arg("source", call.reads)?;
    let target = call.column_arg("target", call.writes)?;
    let values = call
        .view
        .column_values(&source)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|c| match c.as_text().map(str::trim).and_then(roman_to_int) {
            Some(n) => CellValue::Integer(n),
            None => CellValue::Null,
        })
        .collect();
    let mut out = call.view.clone();
    out.set_column(Column::new(target), values).map_err(|e| e.to_string())?;
    Ok(out)
}
