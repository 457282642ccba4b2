// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionMeta {
    pub answer_type: String,
    pub question_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeShare {
    pub count: usize,
    pub percent: f64,
}

/// Summary of one table dimension. The mean is floored; the median averages
/// the two middle values for an even count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionStats {
    pub mean: u64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeReport {
    pub questions: usize,
    pub answer_types: BTreeMap<String, TypeShare>,
    pub question_types: BTreeMap<String, TypeShare>,
    pub tables: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<DimensionStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<DimensionStats>,
}

fn shares<'a>(labels: impl Iterator<Item = &'a str>, total: usize) -> BTreeMap<String, TypeShare> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.to_string()).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(k, count)| (k, TypeShare { count, percent: 100.0 * count as f64 / total as f64 }))
        .collect()
}

fn dimension(values: impl Iterator<Item = usize>) -> Option<DimensionStats> {
    let mut v: Vec<usize> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let n = v.len();
    let sum: u64 = v.iter().map(|&x| x as u64).sum();
    let median = if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 };
    Some(DimensionStats { mean: sum / n as u64, median, min: v[0], max: v[n - 1] })
}

/// Counts and shares per answer and question type, plus size statistics
/// over `(rows, columns)` table shapes.
pub fn challenge_stats(questions: &[QuestionMeta], tables: &[(usize, usize)]) -> ChallengeReport {
    let n = questions.len();
    ChallengeReport {
        questions: n,
        answer_types: shares(questions.iter().map(|q| q.answer_type.as_str()), n),
        question_types: shares(questions.iter().map(|q| q.question_type.as_str()), n),
        tables: tables.len(),
        rows: dimension(tables.iter().map(|t| t.0)),
        columns: dimension(tables.iter().map(|t| t.1)),
    }
}
