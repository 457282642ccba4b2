// SPDX-License-Identifier: Apache-2.0

//! Shared helpers for the integration suites: reference implementations,
//! random fixtures and small table builders.

#![allow(dead_code)]

pub mod gen;
pub mod llm;
pub mod oracle;
pub mod policy;

use tablecanon::table::{CellValue, Column, Table};

pub fn t(s: &str) -> CellValue {
    CellValue::text(s)
}

pub fn int(i: i64) -> CellValue {
    CellValue::Integer(i)
}

pub fn date(y: i32, m: u32, d: u32) -> CellValue {
    CellValue::date(y, m, d).expect("valid date")
}

/// Builds a table from column names and rows of cells.
pub fn table(names: &[&str], rows: Vec<Vec<CellValue>>) -> Table {
    Table::new("t", names.iter().map(|n| Column::new(*n)).collect(), rows).expect("valid fixture table")
}

/// Every sequence over `domain` of length `0..=max_len`, shortest first.
pub fn sequences<T: Clone>(domain: &[T], max_len: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<T>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(frontier.len() * domain.len());
        for prefix in &frontier {
            for d in domain {
                let mut v = prefix.clone();
                v.push(d.clone());
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
