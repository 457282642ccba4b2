// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const MIN_PROBES: usize = 12;
pub const MAX_PROBES: usize = 20;

const PROBE_KEYS: [&str; 5] = ["qid", "text", "depends_on", "requires", "failure_reason"];

/// A synthetic question that the raw table cannot answer as-is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub qid: String,
    pub text: String,
    pub depends_on: Vec<String>,
    pub requires: Vec<String>,
    pub failure_reason: String,
}

/// A representational problem, with the probes it blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub issue_id: String,
    pub description: String,
    pub cols: Vec<String>,
    pub blocking_questions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeArtifact {
    pub probes: Vec<Probe>,
    pub issues: Vec<Issue>,
}

impl ProbeArtifact {
    /// Builds the artifact, deriving one issue per distinct failure reason.
    pub fn from_probes(probes: Vec<Probe>) -> Self {
        let issues = derive_issues(&probes);
        ProbeArtifact { probes, issues }
    }

    /// The `{"questions": [...], "issues": [...]}` object the planner reads.
    pub fn planner_json(&self) -> Value {
        serde_json::json!({ "questions": self.probes, "issues": self.issues })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("probe artifact serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("response is not a bare JSON array: {0}")]
    NotJson(String),
    #[error("expected between {MIN_PROBES} and {MAX_PROBES} questions, got {0}")]
    Count(usize),
    #[error("item {index}: {message}")]
    Item { index: usize, message: String },
}

fn string_list(v: &Value, key: &str) -> Result<Vec<String>, String> {
    let items = v.as_array().ok_or_else(|| format!("`{key}` must be a list"))?;
    items
        .iter()
        .map(|x| x.as_str().map(str::to_string).ok_or_else(|| format!("`{key}` must hold strings")))
        .collect()
}

fn probe_from(index: usize, v: &Value) -> Result<Probe, String> {
    let obj = v.as_object().ok_or("not an object")?;
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    let mut expected = PROBE_KEYS;
    expected.sort_unstable();
    if keys != expected {
        return Err(format!("keys must be exactly {PROBE_KEYS:?}, found {keys:?}"));
    }
    let text_of = |k: &str| obj[k].as_str().map(str::to_string).ok_or_else(|| format!("`{k}` must be a string"));
    let qid = text_of("qid")?;
    if qid != format!("Q{}", index + 1) {
        return Err(format!("qid `{qid}` breaks the Q1..Qn sequence (expected Q{})", index + 1));
    }
    let text = text_of("text")?;
    if text.trim().is_empty() {
        return Err("`text` is empty".to_string());
    }
    let depends_on = string_list(&obj["depends_on"], "depends_on")?;
    if depends_on.is_empty() {
        return Err("`depends_on` is empty; use [\"unknown\"]".to_string());
    }
    Ok(Probe {
        qid,
        text,
        depends_on,
        requires: string_list(&obj["requires"], "requires")?,
        failure_reason: text_of("failure_reason")?,
    })
}

/// Strict parse of an issue-stage reply. Anything other than a bare JSON
/// array of well-formed probes with contiguous ids is rejected, so the
/// caller can regenerate.
pub fn parse_probe_response(text: &str) -> Result<ProbeArtifact, ProbeError> {
    let trimmed = text.trim();
    if !(trimmed.starts_with('[') && trimmed.ends_with(']')) {
        return Err(ProbeError::NotJson("must start with `[` and end with `]`".to_string()));
    }
    let value: Value = serde_json::from_str(trimmed).map_err(|e| ProbeError::NotJson(e.to_string()))?;
    let items = value.as_array().ok_or_else(|| ProbeError::NotJson("not an array".to_string()))?;
    if !(MIN_PROBES..=MAX_PROBES).contains(&items.len()) {
        return Err(ProbeError::Count(items.len()));
    }
    let probes = items
        .iter()
        .enumerate()
        .map(|(i, v)| probe_from(i, v).map_err(|message| ProbeError::Item { index: i, message }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProbeArtifact::from_probes(probes))
}

/// Groups probes by failure reason (case- and space-insensitive) in first
/// appearance order. Columns are the union of the group's dependencies,
/// minus the `unknown` marker.
pub fn derive_issues(probes: &[Probe]) -> Vec<Issue> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (String, Vec<String>, Vec<String>)> = BTreeMap::new();
    for p in probes {
        let key = p.failure_reason.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (p.failure_reason.trim().to_string(), Vec::new(), Vec::new())
        });
        for c in &p.depends_on {
            if c != "unknown" && !entry.1.contains(c) {
                entry.1.push(c.clone());
            }
        }
        entry.2.push(p.qid.clone());
    }
    order
        .iter()
        .enumerate()
        .map(|(i, key)| {
            let (description, cols, qids) = groups.remove(key).expect("grouped key");
            Issue { issue_id: format!("I{}", i + 1), description, cols, blocking_questions: qids }
        })
        .collect()
}
