// SPDX-License-Identifier: Apache-2.0

//! A scripted provider with fixed per-stage token usage, and small raw
//! tables it knows how to plan for.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};
use tablecanon::llm::{Completion, ProviderClient, ProviderError, Stage, StageConfig, TokenUsage};
use tablecanon::table::Table;

/// Usage reported for every successful call of a stage.
pub fn usage_of(stage: Stage) -> TokenUsage {
    match stage {
        Stage::Issue => TokenUsage { input_tokens: 1000, output_tokens: 300 },
        Stage::Plan => TokenUsage { input_tokens: 1500, output_tokens: 500 },
        Stage::Code => TokenUsage { input_tokens: 700, output_tokens: 90 },
        Stage::Qa => TokenUsage { input_tokens: 400, output_tokens: 20 },
    }
}

pub fn probe_reply() -> String {
    let items: Vec<Value> = (1..=12)
        .map(|i| {
            json!({
                "qid": format!("Q{i}"),
                "text": format!("What is the total Population of group {i}?"),
                "depends_on": ["Population"],
                "requires": ["numeric Population"],
                "failure_reason": "Population holds comma-grouped text",
            })
        })
        .collect();
    serde_json::to_string(&items).unwrap()
}

pub fn plan_reply() -> String {
    json!({
        "table_id": "ignored",
        "strategy": "numbers become numeric, raw text kept for recovery",
        "steps": [{
            "step_id": "s1", "op": "parse_number", "description": "grouped digits to a number",
            "reads": ["Population"], "writes": ["population_num"],
            "params": {"pattern": "[0-9][0-9,]*"}, "fixes_issues": ["I1"], "depends_on": []
        }],
        "final_output": {"primary_key": [], "columns": []}
    })
    .to_string()
}

pub fn qa_reply(prompt: &str) -> String {
    // Echoes how many question marks the prompt holds, so answers depend on
    // the prompt and replay mismatches show up.
    let n = prompt.matches('?').count();
    format!("<reasoning>\ncounted\n</reasoning>\n<sql_plan>\nSELECT 1\n</sql_plan>\n<answer>\n{n}\n</answer>")
}

/// Replies per stage with fixed usage. The first `fail_first` calls fail
/// transiently.
pub struct Scripted {
    pub fail_first: usize,
    calls: AtomicUsize,
    log: Mutex<Vec<(Stage, String)>>,
}

impl Scripted {
    pub fn new() -> Self {
        Self::failing(0)
    }

    pub fn failing(fail_first: usize) -> Self {
        Scripted { fail_first, calls: AtomicUsize::new(0), log: Mutex::new(Vec::new()) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<(Stage, String)> {
        self.log.lock().unwrap().clone()
    }
}

impl ProviderClient for Scripted {
    fn complete(&self, prompt: &str, cfg: &StageConfig) -> Result<Completion, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push((cfg.stage, prompt.to_string()));
        if n < self.fail_first {
            return Err(ProviderError::transient("429 busy"));
        }
        let text = match cfg.stage {
            Stage::Issue => probe_reply(),
            Stage::Plan => plan_reply(),
            Stage::Qa => qa_reply(prompt),
            Stage::Code => "```python\ndf = df\n```".to_string(),
        };
        Ok(Completion { text, usage: usage_of(cfg.stage) })
    }
}

/// A raw table with `rows` rows: a Name, a comma-grouped Population and a
/// row marker `r000`, `r001`, ...
pub fn city_table(id: &str, rows: usize) -> Table {
    let mut t = Table::from_text_rows(id, &["Name", "Population", "Marker"], &[]).unwrap();
    for i in 0..rows {
        t.rows.push(vec![
            tablecanon::table::CellValue::text(format!("{id} city {i}")),
            tablecanon::table::CellValue::text(format!("{},{:03}", 1 + i % 7, (i * 37) % 1000)),
            tablecanon::table::CellValue::text(format!("r{i:03}")),
        ]);
    }
    t.check().unwrap();
    t
}

/// Distinct row markers embedded in a prompt.
pub fn markers_in(prompt: &str) -> std::collections::BTreeSet<String> {
    let re = regex::Regex::new(r"\br(\d{3})\b").unwrap();
    re.captures_iter(prompt).map(|c| c[0].to_string()).collect()
}
