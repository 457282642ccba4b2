// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::Stage;
use super::provider::TokenUsage;

/// Token counts per table and stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    entries: BTreeMap<String, BTreeMap<Stage, TokenUsage>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub table_id: String,
    pub stage: Stage,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn account(&mut self, table_id: &str, stage: Stage, input: u64, output: u64) {
        *self.entries.entry(table_id.to_string()).or_default().entry(stage).or_default() +=
            TokenUsage { input_tokens: input, output_tokens: output };
    }

    pub fn add(&mut self, table_id: &str, stage: Stage, usage: TokenUsage) {
        self.account(table_id, stage, usage.input_tokens, usage.output_tokens);
    }

    pub fn get(&self, table_id: &str, stage: Stage) -> TokenUsage {
        self.entries.get(table_id).and_then(|m| m.get(&stage)).copied().unwrap_or_default()
    }

    /// Sum over tables and stages of input plus output tokens.
    pub fn total(&self) -> u64 {
        self.rows().iter().map(|r| r.input_tokens + r.output_tokens).sum()
    }

    /// Total restricted to the query-independent stages.
    pub fn preprocessing_total(&self) -> u64 {
        self.rows().iter().filter(|r| r.stage.is_preprocessing()).map(|r| r.input_tokens + r.output_tokens).sum()
    }

    pub fn stage_total(&self, stage: Stage) -> u64 {
        self.rows().iter().filter(|r| r.stage == stage).map(|r| r.input_tokens + r.output_tokens).sum()
    }

    pub fn merge(&mut self, other: &TokenLedger) {
        for r in other.rows() {
            self.account(&r.table_id, r.stage, r.input_tokens, r.output_tokens);
        }
    }

    /// Rows sorted by table id, then stage order.
    pub fn rows(&self) -> Vec<LedgerRow> {
        self.entries
            .iter()
            .flat_map(|(t, m)| {
                m.iter().map(move |(s, u)| LedgerRow {
                    table_id: t.clone(),
                    stage: *s,
                    input_tokens: u.input_tokens,
                    output_tokens: u.output_tokens,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["table_id", "stage", "input_tokens", "output_tokens"]).expect("in-memory write");
        for r in self.rows() {
            w.write_record([r.table_id.clone(), r.stage.to_string(), r.input_tokens.to_string(), r.output_tokens.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "rows": self.rows(),
            "preprocessing_total": self.preprocessing_total(),
            "total": self.total(),
        });
        serde_json::to_string_pretty(&v).expect("ledger serializes")
    }

    /// Reads the `rows` of a [`TokenLedger::to_json`] document.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Doc {
            rows: Vec<LedgerRow>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        let mut ledger = TokenLedger::new();
        for r in doc.rows {
            ledger.account(&r.table_id, r.stage, r.input_tokens, r.output_tokens);
        }
        Ok(ledger)
    }
}
