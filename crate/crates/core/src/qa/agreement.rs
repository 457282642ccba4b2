// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An agreement coefficient. `degenerate` is set when chance agreement is
/// total (every rating in one category), where the usual ratio is 0/0; the
/// value then follows the convention 1.0 for perfect observed agreement and
/// 0.0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("label sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no items to compare")]
    Empty,
    #[error("item {item} has {found} ratings, expected {expected}")]
    RaterCount { item: usize, expected: usize, found: usize },
    #[error("at least two raters are required")]
    TooFewRaters,
}

fn finish(observed: f64, chance: f64) -> Agreement {
    if (1.0 - chance).abs() < 1e-12 {
        let value = if (observed - 1.0).abs() < 1e-12 { 1.0 } else { 0.0 };
        log::warn!("agreement is degenerate: all ratings fall in a single category");
        Agreement { value, degenerate: true }
    } else {
        Agreement { value: (observed - chance) / (1.0 - chance), degenerate: false }
    }
}

/// Cohen's kappa for two raters with marginal-product chance agreement.
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<Agreement, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut ma: HashMap<&T, usize> = HashMap::new();
    let mut mb: HashMap<&T, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    let chance = ma
        .iter()
        .map(|(k, &ca)| ca as f64 * mb.get(k).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (n * n);
    Ok(finish(observed, chance))
}

/// Fleiss' kappa over an items-by-raters label matrix. Every item must carry
/// the same number of ratings, at least two.
pub fn fleiss_kappa<T: Eq + Hash>(matrix: &[Vec<T>]) -> Result<Agreement, AgreementError> {
    let first = matrix.first().ok_or(AgreementError::Empty)?;
    let raters = first.len();
    if raters < 2 {
        return Err(AgreementError::TooFewRaters);
    }
    let mut totals: HashMap<&T, usize> = HashMap::new();
    let mut per_item = 0.0;
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != raters {
            return Err(AgreementError::RaterCount { item: i, expected: raters, found: row.len() });
        }
        let mut counts: HashMap<&T, usize> = HashMap::new();
        for label in row {
            *counts.entry(label).or_default() += 1;
            *totals.entry(label).or_default() += 1;
        }
        let sq: usize = counts.values().map(|c| c * c).sum();
        per_item += (sq - raters) as f64 / (raters * (raters - 1)) as f64;
    }
    let items = matrix.len() as f64;
    let observed = per_item / items;
    let all = items * raters as f64;
    let chance = totals.values().map(|&c| (c as f64 / all).powi(2)).sum();
    Ok(finish(observed, chance))
}

/// Mean per-item Jaccard index between two aligned lists of label sets.
/// An item where both sets are empty counts as full agreement.
pub fn jaccard_agreement<T: Eq + Hash + Ord>(a: &[BTreeSet<T>], b: &[BTreeSet<T>]) -> Result<f64, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let union: HashSet<&T> = x.iter().chain(y.iter()).collect();
            if union.is_empty() {
                1.0
            } else {
                x.intersection(y).count() as f64 / union.len() as f64
            }
        })
        .sum();
    Ok(total / a.len() as f64)
}
