// SPDX-License-Identifier: Apache-2.0

//! Fallback for `custom` steps that no registered function handles: ask the
//! model for a pandas snippet and run it in a `python3` subprocess.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::{Arc, LazyLock, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;

use super::config::{Stage, StageConfig};
use super::ledger::TokenLedger;
use super::prompts::{build_stage_prompt, PromptExtras};
use super::provider::ProviderClient;
use super::retry::{run_stage_with_retry, Clock};
use crate::ops::CodegenFallback;
use crate::plan::PlanStep;
use crate::table::{ingest_csv, write_csv, CsvOptions, Table};

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z0-9_]*[ \t]*\n(.*?)```").unwrap());

/// The first fenced block, or the whole reply when there is none.
pub fn extract_code(reply: &str) -> String {
    FENCE.captures(reply).map_or_else(|| reply.trim().to_string(), |c| c[1].to_string())
}

const PRELUDE: &str = "import sys, re, json, math\nimport numpy as np\nimport pandas as pd\n\
df = pd.read_csv(sys.argv[1], dtype=str, keep_default_na=False)\n";
const POSTLUDE: &str = "\ndf.to_csv(sys.argv[2], index=False)\n";

#[derive(Debug, Clone)]
pub struct PythonRunner {
    pub python: PathBuf,
    pub timeout: Duration,
}

impl Default for PythonRunner {
    fn default() -> Self {
        PythonRunner { python: PathBuf::from("python3"), timeout: Duration::from_secs(60) }
    }
}

impl PythonRunner {
    /// Runs `code` against `df` loaded from the view (all columns as text)
    /// and reads `df` back.
    pub fn run(&self, code: &str, view: &Table) -> Result<Table, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let input = dir.path().join("in.csv");
        let output = dir.path().join("out.csv");
        let script = dir.path().join("step.py");
        std::fs::write(&input, write_csv(view)).map_err(|e| e.to_string())?;
        std::fs::write(&script, format!("{PRELUDE}{code}{POSTLUDE}")).map_err(|e| e.to_string())?;
        let mut child = Command::new(&self.python)
            .arg(&script)
            .arg(&input)
            .arg(&output)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start {}: {e}", self.python.display()))?;
        let started = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait().map_err(|e| e.to_string())? {
                break status;
            }
            if started.elapsed() > self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(format!("generated code timed out after {:?}", self.timeout));
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        if !status.success() {
            let mut stderr = String::new();
            if let Some(mut e) = child.stderr.take() {
                let _ = e.read_to_string(&mut stderr);
            }
            return Err(format!("generated code failed ({status}): {}", stderr.trim()));
        }
        let bytes = std::fs::read(&output).map_err(|e| e.to_string())?;
        let options = CsvOptions { table_id: view.table_id.clone(), ..CsvOptions::default() };
        let mut table = ingest_csv(&bytes, &options).map_err(|e| e.to_string())?;
        table.title = view.title.clone();
        Ok(table)
    }
}

/// [`CodegenFallback`] backed by the code stage.
pub struct LlmCodegen {
    pub provider: Arc<dyn ProviderClient>,
    pub clock: Arc<dyn Clock>,
    pub config: StageConfig,
    pub ledger: Arc<Mutex<TokenLedger>>,
    pub runner: PythonRunner,
}

impl CodegenFallback for LlmCodegen {
    fn run(&self, step: &PlanStep, view: &Table) -> Result<Table, String> {
        let prompt = build_stage_prompt(Stage::Code, view, &PromptExtras { step: Some(step), ..Default::default() })
            .map_err(|e| e.to_string())?;
        let result = run_stage_with_retry(self.provider.as_ref(), &prompt, &self.config, self.clock.as_ref());
        let usage = match &result {
            Ok(out) => out.usage,
            Err(e) => e.usage(),
        };
        self.ledger.lock().expect("ledger").add(&view.table_id, Stage::Code, usage);
        let out = result.map_err(|e| e.to_string())?;
        self.runner.run(&extract_code(&out.completion.text), view)
    }
}
