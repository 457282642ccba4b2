// SPDX-License-Identifier: Apache-2.0

//! The lint fixture corpus: plans under `fixtures/policy` with the exact
//! findings each must produce against `raw.csv`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use tablecanon::ops::{execute_plan, ExecPolicy};
use tablecanon::plan::{parse_plan, validate_plan_with, ValidateOptions};
use tablecanon::table::{ingest_csv, CsvOptions};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/policy")
}

pub struct CorpusResult {
    pub clean: usize,
    pub violating: usize,
    pub failures: Vec<String>,
}

/// Validates every fixture plan and compares `(step, rule, severity)`
/// triples exactly. Clean plans must also execute.
pub fn check_corpus() -> CorpusResult {
    let raw = ingest_csv(&std::fs::read(dir().join("raw.csv")).unwrap(), &CsvOptions::default()).unwrap();
    let expected: BTreeMap<String, Vec<(String, String, String)>> =
        serde_json::from_str(&std::fs::read_to_string(dir().join("expected.json")).unwrap()).unwrap();
    let opts = ValidateOptions { samples: Some(&raw), ..Default::default() };
    let mut res = CorpusResult { clean: 0, violating: 0, failures: Vec::new() };
    for (file, want) in &expected {
        let plan = match parse_plan(&std::fs::read_to_string(dir().join(file)).unwrap()) {
            Ok(p) => p,
            Err(e) => {
                res.failures.push(format!("{file}: {e}"));
                continue;
            }
        };
        let report = validate_plan_with(&plan, &raw.schema(), &opts);
        let got: Vec<(String, String, String)> = report
            .findings
            .iter()
            .map(|f| {
                let sev = serde_json::to_value(f.severity).unwrap().as_str().unwrap().to_string();
                (f.step_id.clone().unwrap_or_default(), f.rule.clone(), sev)
            })
            .collect();
        if &got != want {
            res.failures.push(format!("{file}: expected {want:?}, got {got:?}"));
        }
        if want.is_empty() {
            res.clean += 1;
            if let Err(e) = execute_plan(&plan, &raw, &ExecPolicy::default()) {
                res.failures.push(format!("{file}: clean plan failed to execute: {e}"));
            }
        } else {
            res.violating += 1;
        }
    }
    res
}
