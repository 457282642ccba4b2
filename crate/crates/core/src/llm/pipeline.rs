// SPDX-License-Identifier: Apache-2.0

//! Per-table preprocessing (probe, plan, execute, audit) with caching, and
//! question answering over the cached canonical table.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::{
    ArtifactCache, CacheEntry, CacheError, AUDIT_FILE, CANONICAL_FILE, PLAN_FILE, PROBES_FILE, SCHEMA_FILE, TRACE_FILE,
};
use super::codegen::{LlmCodegen, PythonRunner};
use super::config::{Stage, StageConfigs};
use super::ledger::TokenLedger;
use super::probe::{parse_probe_response, ProbeArtifact, ProbeError};
use super::prompts::{build_stage_prompt, PromptError, PromptExtras};
use super::provider::{ProviderClient, TokenUsage};
use super::retry::{run_stage_with_retry, Clock, RetryError, SystemClock};
use crate::ops::{ExecError, ExecPolicy, Execution};
use crate::plan::{parse_plan, validate_plan_with, PolicyReport, TransformationPlan, ValidateOptions};
use crate::qa::{format_answer, parse_qa_response, QaParseError, QaResponse};
use crate::structure::{make_lossless, LossAudit};
use crate::table::{read_typed_csv, SchemaDescriptor, Table, TableError, DEFAULT_MAX_ROWS};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub configs: StageConfigs,
    pub policy: ExecPolicy,
    /// Rows serialized into prompts.
    pub max_rows: usize,
    /// Extra attempts when a reply fails validation.
    pub max_regenerations: u32,
    pub codegen_fallback: bool,
    pub python: PythonRunner,
    /// Worker threads for [`Pipeline::preprocess_all`]; 0 means one per CPU.
    pub workers: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            configs: StageConfigs::default(),
            policy: ExecPolicy::default(),
            max_rows: DEFAULT_MAX_ROWS,
            max_regenerations: 2,
            codegen_fallback: false,
            python: PythonRunner::default(),
            workers: 0,
        }
    }
}

/// A raw table plus optional prompt context.
#[derive(Debug, Clone)]
pub struct TableInput {
    pub raw: Table,
    pub title: Option<String>,
    pub column_descriptions: Option<String>,
}

impl TableInput {
    pub fn new(raw: Table) -> Self {
        TableInput { raw, title: None, column_descriptions: None }
    }
}

/// How much of a table's work the cache already held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    /// Every artifact was present and verified.
    Hit,
    /// The plan was cached; only execution and audit ran.
    PlanCached,
    /// Probes were cached; planning onward ran.
    ProbesCached,
    Miss,
}

#[derive(Debug, Clone)]
pub struct PreprocessOutcome {
    pub entry: CacheEntry,
    pub status: CacheStatus,
    /// Provider requests issued, retries included.
    pub provider_calls: u32,
    pub usage: TokenUsage,
    pub plan: TransformationPlan,
    pub canonical_csv: String,
    pub trace_json: String,
    pub audit: LossAudit,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{stage} stage for table `{table_id}`: {source}")]
    Provider { table_id: String, stage: Stage, source: RetryError },
    #[error("probe reply rejected after {attempts} attempts: {last}")]
    Probes { attempts: u32, last: ProbeError },
    #[error("plan reply rejected after {attempts} attempts: {message}")]
    Plan { attempts: u32, message: String, report: Option<PolicyReport> },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("cached artifact {file} is invalid: {message}")]
    Artifact { file: &'static str, message: String },
    #[error("no cached canonical table for `{0}`; run transform first")]
    MissingCache(String),
    #[error(transparent)]
    Answer(#[from] QaParseError),
    #[error(transparent)]
    Table(#[from] TableError),
}

impl PipelineError {
    pub fn is_provider(&self) -> bool {
        matches!(self, PipelineError::Provider { .. } | PipelineError::Probes { .. } | PipelineError::Plan { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QaOutcome {
    pub table_id: String,
    pub response: QaResponse,
    pub formatted_answer: String,
    pub usage: TokenUsage,
}

pub struct Pipeline {
    provider: Arc<dyn ProviderClient>,
    clock: Arc<dyn Clock>,
    cache: ArtifactCache,
    options: PipelineOptions,
    ledger: Arc<Mutex<TokenLedger>>,
}

fn schema_json(table: &Table) -> String {
    serde_json::to_string_pretty(&table.typed_schema()).expect("schema serializes")
}

/// Accepts a bare plan object, or one wrapped in a code fence or prose.
fn parse_plan_reply(text: &str) -> Result<TransformationPlan, String> {
    match parse_plan(text.trim()) {
        Ok(p) => Ok(p),
        Err(strict) => {
            let (Some(a), Some(b)) = (text.find('{'), text.rfind('}')) else { return Err(strict.to_string()) };
            let plan = parse_plan(&text[a..=b]).map_err(|_| strict.to_string())?;
            log::warn!("plan reply carried text around the JSON object; it was ignored");
            Ok(plan)
        }
    }
}

struct StageRun<'a> {
    pipeline: &'a Pipeline,
    table_id: &'a str,
    calls: u32,
    usage: TokenUsage,
}

impl StageRun<'_> {
    fn call(&mut self, stage: Stage, prompt: &str) -> Result<String, PipelineError> {
        let cfg = self.pipeline.options.configs.get(stage);
        let result = run_stage_with_retry(self.pipeline.provider.as_ref(), prompt, cfg, self.pipeline.clock.as_ref());
        let (usage, attempts) = match &result {
            Ok(out) => (out.usage, out.attempts),
            Err(RetryError::Permanent { attempt, usage, .. }) => (*usage, *attempt),
            Err(RetryError::Exhausted { attempts, usage, .. }) => (*usage, *attempts),
        };
        self.calls += attempts;
        self.usage += usage;
        self.pipeline.ledger.lock().expect("ledger").add(self.table_id, stage, usage);
        result
            .map(|o| o.completion.text)
            .map_err(|source| PipelineError::Provider { table_id: self.table_id.to_string(), stage, source })
    }
}

impl Pipeline {
    pub fn new(provider: Arc<dyn ProviderClient>, cache: ArtifactCache, options: PipelineOptions) -> Self {
        Pipeline {
            provider,
            clock: Arc::new(SystemClock),
            cache,
            options,
            ledger: Arc::new(Mutex::new(TokenLedger::new())),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_ledger(mut self, ledger: TokenLedger) -> Self {
        self.ledger = Arc::new(Mutex::new(ledger));
        self
    }

    pub fn cache(&self) -> &ArtifactCache {
        &self.cache
    }

    pub fn ledger(&self) -> TokenLedger {
        self.ledger.lock().expect("ledger").clone()
    }

    fn policy(&self) -> ExecPolicy {
        let mut policy = self.options.policy.clone();
        if self.options.codegen_fallback && policy.fallback.is_none() {
            policy.fallback = Some(Arc::new(LlmCodegen {
                provider: self.provider.clone(),
                clock: self.clock.clone(),
                config: self.options.configs.code.clone(),
                ledger: self.ledger.clone(),
                runner: self.options.python.clone(),
            }));
        }
        policy
    }

    fn extras<'a>(&self, input: &'a TableInput) -> PromptExtras<'a> {
        PromptExtras {
            title: input.title.as_deref(),
            column_descriptions: input.column_descriptions.as_deref(),
            max_rows: Some(self.options.max_rows),
            ..Default::default()
        }
    }

    fn probe(&self, run: &mut StageRun<'_>, input: &TableInput) -> Result<ProbeArtifact, PipelineError> {
        let prompt = build_stage_prompt(Stage::Issue, &input.raw, &self.extras(input))?;
        let attempts = self.options.max_regenerations + 1;
        let mut last = None;
        for _ in 0..attempts {
            let reply = run.call(Stage::Issue, &prompt)?;
            match parse_probe_response(&reply) {
                Ok(a) => return Ok(a),
                Err(e) => {
                    log::warn!("table `{}`: probe reply rejected: {e}", input.raw.table_id);
                    last = Some(e);
                }
            }
        }
        Err(PipelineError::Probes { attempts, last: last.expect("at least one attempt") })
    }

    fn plan(&self, run: &mut StageRun<'_>, input: &TableInput, probes: &ProbeArtifact) -> Result<TransformationPlan, PipelineError> {
        let extras = PromptExtras { probes: Some(probes), ..self.extras(input) };
        let prompt = build_stage_prompt(Stage::Plan, &input.raw, &extras)?;
        let attempts = self.options.max_regenerations + 1;
        let (mut message, mut report) = (String::new(), None);
        for _ in 0..attempts {
            let reply = run.call(Stage::Plan, &prompt)?;
            match parse_plan_reply(&reply) {
                Ok(mut plan) => {
                    plan.table_id = input.raw.table_id.clone();
                    let r = validate_plan_with(
                        &plan,
                        &input.raw.schema(),
                        &ValidateOptions { allow_row_change: self.options.policy.allow_row_change, samples: Some(&input.raw) },
                    );
                    if !r.has_errors() {
                        return Ok(plan);
                    }
                    message = format!("{} blocking finding(s)", r.errors().count());
                    report = Some(r);
                }
                Err(e) => message = e,
            }
            log::warn!("table `{}`: plan reply rejected: {message}", input.raw.table_id);
        }
        Err(PipelineError::Plan { attempts, message, report })
    }

    fn execute(&self, plan: &TransformationPlan, raw: &Table) -> Result<(Execution, LossAudit), PipelineError> {
        Ok(make_lossless(plan, raw, &self.policy())?)
    }

    fn load_plan(&self, entry: &CacheEntry) -> Result<Option<TransformationPlan>, PipelineError> {
        match self.cache.read(entry, PLAN_FILE)? {
            None => Ok(None),
            Some(text) => parse_plan(&text)
                .map(Some)
                .map_err(|e| PipelineError::Artifact { file: PLAN_FILE, message: e.to_string() }),
        }
    }

    fn load_probes(&self, entry: &CacheEntry) -> Result<Option<ProbeArtifact>, PipelineError> {
        match self.cache.read(entry, PROBES_FILE)? {
            None => Ok(None),
            Some(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| PipelineError::Artifact { file: PROBES_FILE, message: e.to_string() }),
        }
    }

    /// Probes, plans, executes and audits one table, reusing whatever the
    /// cache already holds. Stages run in order; a cached artifact skips its
    /// stage and everything before it.
    pub fn preprocess(&self, input: &TableInput) -> Result<PreprocessOutcome, PipelineError> {
        let raw = &input.raw;
        let entry = self.cache.entry_for(raw);
        let title = input.title.clone().unwrap_or_else(|| raw.title.clone());

        let cached_plan = self.load_plan(&entry)?;
        if let Some(plan) = &cached_plan {
            let canonical = self.cache.read(&entry, CANONICAL_FILE)?;
            let trace = self.cache.read(&entry, TRACE_FILE)?;
            let audit = self.cache.read(&entry, AUDIT_FILE)?;
            let schema = self.cache.read(&entry, SCHEMA_FILE)?;
            if let (Some(canonical_csv), Some(trace_json), Some(audit), Some(_)) = (canonical, trace, audit, schema) {
                let audit: LossAudit = serde_json::from_str(&audit)
                    .map_err(|e| PipelineError::Artifact { file: AUDIT_FILE, message: e.to_string() })?;
                return Ok(PreprocessOutcome {
                    entry,
                    status: CacheStatus::Hit,
                    provider_calls: 0,
                    usage: TokenUsage::default(),
                    plan: plan.clone(),
                    canonical_csv,
                    trace_json,
                    audit,
                });
            }
        }

        let mut run = StageRun { pipeline: self, table_id: &raw.table_id, calls: 0, usage: TokenUsage::default() };
        let mut files: Vec<(&str, String)> = Vec::new();
        let (plan, status) = match cached_plan {
            Some(plan) => (plan, CacheStatus::PlanCached),
            None => {
                let (probes, status) = match self.load_probes(&entry)? {
                    Some(p) => (p, CacheStatus::ProbesCached),
                    None => {
                        let p = self.probe(&mut run, input)?;
                        files.push((PROBES_FILE, p.to_json()));
                        (p, CacheStatus::Miss)
                    }
                };
                let plan = self.plan(&mut run, input, &probes)?;
                files.push((PLAN_FILE, plan.to_json()));
                (plan, status)
            }
        };
        // Persist what the model produced before execution can fail, so a
        // retry does not pay for it again.
        if !files.is_empty() {
            let refs: Vec<(&str, &str)> = files.iter().map(|(n, c)| (*n, c.as_str())).collect();
            self.cache.write(&entry, &title, &refs)?;
        }

        let (exec, audit) = self.execute(&plan, raw)?;
        let canonical_csv = exec.canonical_csv();
        let trace_json = exec.trace_json();
        let audit_json = audit.to_json();
        let schema_json = schema_json(&exec.table);
        self.cache.write(
            &entry,
            &title,
            &[(CANONICAL_FILE, &canonical_csv), (SCHEMA_FILE, &schema_json), (TRACE_FILE, &trace_json), (AUDIT_FILE, &audit_json)],
        )?;
        Ok(PreprocessOutcome {
            entry,
            status,
            provider_calls: run.calls,
            usage: run.usage,
            plan,
            canonical_csv,
            trace_json,
            audit,
        })
    }

    /// Runs only the probe stage. Nothing is cached.
    pub fn probe_table(&self, input: &TableInput) -> Result<ProbeArtifact, PipelineError> {
        let mut run = StageRun { pipeline: self, table_id: &input.raw.table_id, calls: 0, usage: TokenUsage::default() };
        self.probe(&mut run, input)
    }

    /// Runs only the plan stage over given probes. Nothing is cached.
    pub fn plan_table(&self, input: &TableInput, probes: &ProbeArtifact) -> Result<TransformationPlan, PipelineError> {
        let mut run = StageRun { pipeline: self, table_id: &input.raw.table_id, calls: 0, usage: TokenUsage::default() };
        self.plan(&mut run, input, probes)
    }

    /// Executes a caller-supplied plan and caches it like a generated one.
    /// No provider is involved.
    pub fn transform_with_plan(&self, input: &TableInput, plan: &TransformationPlan) -> Result<PreprocessOutcome, PipelineError> {
        let raw = &input.raw;
        let entry = self.cache.entry_for(raw);
        let title = input.title.clone().unwrap_or_else(|| raw.title.clone());
        let (exec, audit) = self.execute(plan, raw)?;
        let plan_json = plan.to_json();
        let canonical_csv = exec.canonical_csv();
        let trace_json = exec.trace_json();
        let audit_json = audit.to_json();
        let schema_json = schema_json(&exec.table);
        self.cache.write(
            &entry,
            &title,
            &[
                (PLAN_FILE, &plan_json),
                (CANONICAL_FILE, &canonical_csv),
                (SCHEMA_FILE, &schema_json),
                (TRACE_FILE, &trace_json),
                (AUDIT_FILE, &audit_json),
            ],
        )?;
        Ok(PreprocessOutcome {
            entry,
            status: CacheStatus::Miss,
            provider_calls: 0,
            usage: TokenUsage::default(),
            plan: plan.clone(),
            canonical_csv,
            trace_json,
            audit,
        })
    }

    /// Preprocesses tables on a bounded worker pool. Results keep input
    /// order; each table's stages still run sequentially.
    pub fn preprocess_all(&self, inputs: &[TableInput]) -> Vec<Result<PreprocessOutcome, PipelineError>> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.options.workers).build();
        match pool {
            Ok(pool) => pool.install(|| inputs.par_iter().map(|i| self.preprocess(i)).collect()),
            Err(e) => {
                log::warn!("worker pool unavailable ({e}); running sequentially");
                inputs.iter().map(|i| self.preprocess(i)).collect()
            }
        }
    }

    /// Loads the cached canonical table for `table_id` from `canonical.csv`,
    /// `schema.json` and `plan.json`. Probe artifacts are never consulted.
    pub fn load_canonical(&self, table_id: &str) -> Result<(Table, TransformationPlan, String), PipelineError> {
        let missing = || PipelineError::MissingCache(table_id.to_string());
        let entry = self.cache.lookup(table_id)?.ok_or_else(missing)?;
        let csv = self.cache.read(&entry, CANONICAL_FILE)?.ok_or_else(missing)?;
        let schema = self.cache.read(&entry, SCHEMA_FILE)?.ok_or_else(missing)?;
        let schema: SchemaDescriptor = serde_json::from_str(&schema)
            .map_err(|e| PipelineError::Artifact { file: SCHEMA_FILE, message: e.to_string() })?;
        let plan = self.load_plan(&entry)?.ok_or_else(missing)?;
        let title = self.cache.manifest(&entry)?.title;
        let table = read_typed_csv(csv.as_bytes(), &schema, table_id)?;
        Ok((table.with_title(title.clone()), plan, title))
    }

    /// Answers `question` over the cached canonical table of `table_id`.
    pub fn answer_question(&self, table_id: &str, question: &str) -> Result<QaOutcome, PipelineError> {
        let (table, _, title) = self.load_canonical(table_id)?;
        let extras = PromptExtras {
            title: Some(title.as_str()).filter(|t| !t.is_empty()),
            question: Some(question),
            max_rows: Some(self.options.max_rows),
            ..Default::default()
        };
        let prompt = build_stage_prompt(Stage::Qa, &table, &extras)?;
        let mut run = StageRun { pipeline: self, table_id, calls: 0, usage: TokenUsage::default() };
        let reply = run.call(Stage::Qa, &prompt)?;
        let response = parse_qa_response(&reply)?;
        let formatted_answer = format_answer(&response.answer);
        Ok(QaOutcome { table_id: table_id.to_string(), response, formatted_answer, usage: run.usage })
    }
}
