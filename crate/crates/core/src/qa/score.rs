// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::format::format_answer;

/// How answers are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Multiset overlap of whitespace tokens after formatting.
    #[default]
    Token,
    /// Multiset overlap of whole list elements after formatting.
    ExactElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub predicted: Value,
    pub gold: Value,
    pub predicted_formatted: String,
    pub gold_formatted: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Flattens a scalar or list answer to text. List elements are joined with
/// single spaces; nested lists are flattened in order.
pub fn answer_text(value: &Value) -> String {
    elements(value).join(" ")
}

fn elements(value: &Value) -> Vec<String> {
    match value {
        Value::Null => Vec::new(),
        Value::String(s) => vec![s.clone()],
        Value::Array(items) => items.iter().flat_map(elements).collect(),
        other => vec![other.to_string()],
    }
}

fn counts(items: impl IntoIterator<Item = String>) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

/// Precision, recall and F1 from overlap and the two bag sizes. Two empty
/// bags agree perfectly; one empty bag scores zero.
pub fn f1_from_counts(overlap: usize, predicted: usize, gold: usize) -> (f64, f64, f64) {
    if predicted == 0 && gold == 0 {
        return (1.0, 1.0, 1.0);
    }
    if predicted == 0 || gold == 0 || overlap == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = overlap as f64 / predicted as f64;
    let r = overlap as f64 / gold as f64;
    (p, r, 2.0 * p * r / (p + r))
}

fn bag(value: &Value, mode: MatchMode) -> Vec<String> {
    match mode {
        MatchMode::Token => format_answer(&answer_text(value)).split_whitespace().map(str::to_string).collect(),
        MatchMode::ExactElement => {
            elements(value).iter().map(|e| format_answer(e)).filter(|e| !e.is_empty()).collect()
        }
    }
}

/// Token-level F1 between a predicted and a gold answer.
pub fn compute_f1(id: &str, predicted: &Value, gold: &Value) -> EvalRecord {
    compute_f1_with(id, predicted, gold, MatchMode::Token)
}

pub fn compute_f1_with(id: &str, predicted: &Value, gold: &Value, mode: MatchMode) -> EvalRecord {
    let pred = bag(predicted, mode);
    let gold_bag = bag(gold, mode);
    let (np, ng) = (pred.len(), gold_bag.len());
    let gc = counts(gold_bag);
    let overlap: usize = counts(pred).iter().map(|(k, n)| (*n).min(gc.get(k).copied().unwrap_or(0))).sum();
    let (precision, recall, f1) = f1_from_counts(overlap, np, ng);
    EvalRecord {
        id: id.to_string(),
        predicted: predicted.clone(),
        gold: gold.clone(),
        predicted_formatted: format_answer(&answer_text(predicted)),
        gold_formatted: format_answer(&answer_text(gold)),
        precision,
        recall,
        f1,
    }
}

/// Arithmetic mean of the records' F1; `None` for no records.
pub fn mean_f1(records: &[EvalRecord]) -> Option<f64> {
    if records.is_empty() {
        None
    } else {
        Some(records.iter().map(|r| r.f1).sum::<f64>() / records.len() as f64)
    }
}
