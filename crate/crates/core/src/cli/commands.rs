// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};

use tablecanon::llm::cache::sanitize_table_id;
#[cfg(feature = "live")]
use tablecanon::llm::provider::LiveProvider;
use tablecanon::llm::{
    ArtifactCache, MockProvider, Pipeline, PipelineError, PipelineOptions, PreprocessOutcome,
    ProbeArtifact, ProviderClient, RecordingProvider, ReplayProvider, Stage, StageConfigs, TableInput, TokenLedger,
};
use tablecanon::ops::{ExecError, ExecPolicy};
use tablecanon::plan::{parse_plan, validate_plan_with, ValidateOptions};
use tablecanon::qa::{
    answer_text, cohen_kappa, compute_f1_with, fleiss_kappa, jaccard_agreement, mean_f1, EvalRecord, MatchMode,
};
use tablecanon::structure::{make_lossless, recover_raw};
use tablecanon::table::{export_sql, serialize_markdown, write_csv, SqlOptions, Table};

use super::io::{read_jsonl, read_table, table_files, write_file};
use super::{exit, CacheCommand, Cli, Command, Format, GlobalArgs, ProviderKind};

const LEDGER_FILE: &str = "ledger.json";

/// A failed command: exit status plus message (or JSON) for stderr.
struct Failure {
    code: i32,
    message: String,
}

type CmdResult = Result<i32, Failure>;

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn general(message: String) -> Failure {
    fail(exit::FAILURE, message)
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Exec(ExecError::Validation(report)) => fail(exit::VALIDATION, report.to_json()),
        PipelineError::Plan { report: Some(report), .. } => fail(exit::VALIDATION, report.to_json()),
        PipelineError::MissingCache(id) => {
            fail(exit::MISSING_PREREQ, format!("no cached canonical table for `{id}`; run `tablecanon transform` first"))
        }
        e if e.is_provider() => fail(exit::PROVIDER, e.to_string()),
        e => fail(exit::FAILURE, e.to_string()),
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json output"));
}

const DEFAULT_QA_REPLY: &str = "<reasoning>\nNo model configured.\n</reasoning>\n<answer>\nunknown\n</answer>";
const DEFAULT_PLAN_REPLY: &str =
    r#"{"table_id": "table", "strategy": "keep the table as is", "steps": [], "final_output": {"primary_key": [], "columns": []}}"#;

fn default_probe_reply() -> String {
    let items: Vec<Value> = (1..=12)
        .map(|i| {
            json!({"qid": format!("Q{i}"), "text": format!("Placeholder question {i}?"), "depends_on": ["unknown"],
                   "requires": [], "failure_reason": "no model configured"})
        })
        .collect();
    serde_json::to_string(&items).expect("json")
}

fn mock_provider(path: Option<&Path>) -> Result<MockProvider, Failure> {
    let mut replies: HashMap<Stage, String> = HashMap::from([
        (Stage::Issue, default_probe_reply()),
        (Stage::Plan, DEFAULT_PLAN_REPLY.to_string()),
        (Stage::Qa, DEFAULT_QA_REPLY.to_string()),
    ]);
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| fail(exit::MISSING_PREREQ, format!("cannot read {}: {e}", path.display())))?;
        let given: HashMap<String, String> =
            serde_json::from_str(&text).map_err(|e| general(format!("{}: expected {{stage: reply}}: {e}", path.display())))?;
        for (k, v) in given {
            let stage = Stage::parse(&k).ok_or_else(|| general(format!("{}: unknown stage `{k}`", path.display())))?;
            replies.insert(stage, v);
        }
    }
    Ok(MockProvider::fixed(replies))
}

fn provider(g: &GlobalArgs) -> Result<Arc<dyn ProviderClient>, Failure> {
    match g.provider {
        ProviderKind::Mock => Ok(Arc::new(mock_provider(g.mock_responses.as_deref())?)),
        ProviderKind::Replay => {
            let path = g
                .transcript
                .as_ref()
                .ok_or_else(|| fail(exit::MISSING_PREREQ, "--provider replay needs --transcript"))?;
            ReplayProvider::from_file(path)
                .map(|p| Arc::new(p) as Arc<dyn ProviderClient>)
                .map_err(|e| fail(exit::MISSING_PREREQ, e.to_string()))
        }
        ProviderKind::Live => live_provider(g),
    }
}

#[cfg(feature = "live")]
fn live_provider(g: &GlobalArgs) -> Result<Arc<dyn ProviderClient>, Failure> {
    let live = LiveProvider::from_env().map_err(|e| fail(exit::MISSING_PREREQ, e.to_string()))?;
    Ok(match &g.transcript {
        Some(path) => Arc::new(RecordingProvider::new(live, path.clone())),
        None => Arc::new(live),
    })
}

#[cfg(not(feature = "live"))]
fn live_provider(_: &GlobalArgs) -> Result<Arc<dyn ProviderClient>, Failure> {
    Err(fail(exit::MISSING_PREREQ, "this build has no live provider; rebuild with the `live` feature"))
}

fn configs(g: &GlobalArgs) -> Result<StageConfigs, Failure> {
    match &g.config {
        Some(path) => StageConfigs::load(path).map_err(|e| general(e.to_string())),
        None => Ok(StageConfigs::default()),
    }
}

fn load_ledger(g: &GlobalArgs) -> Result<TokenLedger, Failure> {
    let path = g.cache_dir.join(LEDGER_FILE);
    match std::fs::read_to_string(&path) {
        Ok(text) => TokenLedger::from_json(&text).map_err(|e| general(format!("{}: {e}", path.display()))),
        Err(_) => Ok(TokenLedger::new()),
    }
}

fn save_ledger(g: &GlobalArgs, ledger: &TokenLedger) -> Result<(), Failure> {
    tablecanon::llm::cache::write_atomic(&g.cache_dir.join(LEDGER_FILE), ledger.to_json().as_bytes())
        .map_err(|e| general(e.to_string()))
}

fn pipeline(g: &GlobalArgs) -> Result<Pipeline, Failure> {
    let options = PipelineOptions {
        configs: configs(g)?,
        policy: ExecPolicy { allow_row_change: g.allow_row_change, ..ExecPolicy::default() },
        max_rows: g.max_rows,
        codegen_fallback: g.enable_codegen_fallback,
        workers: g.workers,
        ..PipelineOptions::default()
    };
    Ok(Pipeline::new(provider(g)?, ArtifactCache::new(&g.cache_dir), options).with_ledger(load_ledger(g)?))
}

/// Runs `body` with a pipeline and persists its ledger afterwards, even
/// when the command fails.
fn with_pipeline(g: &GlobalArgs, body: impl FnOnce(&Pipeline) -> CmdResult) -> CmdResult {
    let p = pipeline(g)?;
    let result = body(&p);
    let before = load_ledger(g)?;
    let after = p.ledger();
    if after != before {
        save_ledger(g, &after)?;
    }
    result
}

fn load_table(path: &Path, id: Option<&str>) -> Result<Table, Failure> {
    read_table(path, id).map_err(|e| fail(exit::MISSING_PREREQ, e))
}

fn cmd_ingest(table: &Path, id: Option<&str>, format: Format) -> CmdResult {
    let t = load_table(table, id)?;
    match format {
        Format::Json => print_json(&json!({
            "table_id": t.table_id,
            "title": t.title,
            "rows": t.num_rows(),
            "columns": t.num_columns(),
            "schema": t.schema(),
        })),
        Format::Csv => print!("{}", write_csv(&t)),
        Format::Markdown => print!("{}", serialize_markdown(&t, usize::MAX)),
    }
    Ok(exit::OK)
}

fn run_inner(cli: &Cli) -> CmdResult {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest { table, table_id, format } => cmd_ingest(table, table_id.as_deref(), *format),
        Command::Probe { table, table_id } => {
            let raw = load_table(table, table_id.as_deref())?;
            with_pipeline(g, |p| {
                let probes = p.probe_table(&TableInput::new(raw)).map_err(pipeline_failure)?;
                println!("{}", probes.to_json());
                Ok(exit::OK)
            })
        }
        Command::Plan { table, table_id, probes } => {
            let raw = load_table(table, table_id.as_deref())?;
            let given = match probes {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| fail(exit::MISSING_PREREQ, format!("cannot read {}: {e}", path.display())))?;
                    Some(serde_json::from_str::<ProbeArtifact>(&text).map_err(|e| general(format!("{}: {e}", path.display())))?)
                }
                None => None,
            };
            with_pipeline(g, |p| {
                let input = TableInput::new(raw);
                let probes = match given {
                    Some(a) => a,
                    None => p.probe_table(&input).map_err(pipeline_failure)?,
                };
                let plan = p.plan_table(&input, &probes).map_err(pipeline_failure)?;
                println!("{}", plan.to_json());
                Ok(exit::OK)
            })
        }
        Command::Validate { plan, table, table_id } => {
            let raw = load_table(table, table_id.as_deref())?;
            let text = std::fs::read_to_string(plan)
                .map_err(|e| fail(exit::MISSING_PREREQ, format!("cannot read {}: {e}", plan.display())))?;
            let plan = parse_plan(&text).map_err(|e| fail(exit::VALIDATION, e.to_string()))?;
            let report = validate_plan_with(
                &plan,
                &raw.schema(),
                &ValidateOptions { allow_row_change: g.allow_row_change, samples: Some(&raw) },
            );
            println!("{}", report.to_json());
            Ok(if report.has_errors() { exit::VALIDATION } else { exit::OK })
        }
        Command::Transform { table, plan, auto, all, table_id, out_dir } => {
            if let Some(dir) = all {
                return cmd_transform_all(g, dir, out_dir.as_deref());
            }
            let table = table.as_ref().ok_or_else(|| general("transform needs a table file or --all <dir>".to_string()))?;
            let raw = load_table(table, table_id.as_deref())?;
            let plan = match (plan, auto) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| fail(exit::MISSING_PREREQ, format!("cannot read {}: {e}", path.display())))?;
                    Some(parse_plan(&text).map_err(|e| fail(exit::VALIDATION, e.to_string()))?)
                }
                (None, true) => None,
                (None, false) => return Err(general("transform needs --plan <file> or --auto".to_string())),
            };
            let out = out_dir.clone().unwrap_or_else(|| Path::new("out").join(sanitize_table_id(&raw.table_id)));
            with_pipeline(g, |p| {
                let input = TableInput::new(raw);
                let outcome = match &plan {
                    Some(plan) => p.transform_with_plan(&input, plan),
                    None => p.preprocess(&input),
                }
                .map_err(pipeline_failure)?;
                let summary = write_outputs(&outcome, &out)?;
                print_json(&summary);
                Ok(if outcome.audit.lossless { exit::OK } else { exit::FAILURE })
            })
        }
        Command::VerifyLossless { table, plan, table_id } => {
            let raw = load_table(table, table_id.as_deref())?;
            let text = std::fs::read_to_string(plan)
                .map_err(|e| fail(exit::MISSING_PREREQ, format!("cannot read {}: {e}", plan.display())))?;
            let plan = parse_plan(&text).map_err(|e| fail(exit::VALIDATION, e.to_string()))?;
            let policy = ExecPolicy { allow_row_change: g.allow_row_change, ..ExecPolicy::default() };
            let (exec, audit) = make_lossless(&plan, &raw, &policy).map_err(|e| match e {
                ExecError::Validation(r) => fail(exit::VALIDATION, r.to_json()),
                e => general(e.to_string()),
            })?;
            let recovered = recover_raw(&exec.table, &audit).ok();
            let rebuilt = recovered.as_ref().is_some_and(|r| same_text(r, &raw));
            print_json(&json!({
                "table_id": raw.table_id,
                "lossless": audit.lossless,
                "recovered_exactly": rebuilt,
                "audit": serde_json::to_value(&audit).expect("json"),
            }));
            Ok(if audit.lossless && rebuilt { exit::OK } else { exit::FAILURE })
        }
        Command::ExportSql { table_id, table_name } => with_pipeline(g, |p| {
            let (table, _, _) = p.load_canonical(table_id).map_err(pipeline_failure)?;
            let options = SqlOptions { table_name: table_name.clone().unwrap_or_else(|| table_id.clone()) };
            print!("{}", export_sql(&table, &options).map_err(|e| general(e.to_string()))?);
            Ok(exit::OK)
        }),
        Command::Qa { table_id, question } => with_pipeline(g, |p| {
            let out = p.answer_question(table_id, question).map_err(pipeline_failure)?;
            for w in &out.response.warnings {
                log::warn!("{w}");
            }
            print_json(&json!({
                "table_id": out.table_id,
                "answer": out.response.answer,
                "formatted_answer": out.formatted_answer,
                "sql_plan": out.response.sql_plan,
            }));
            Ok(exit::OK)
        }),
        Command::Eval { predictions, gold, exact_element, annotations, records } => {
            let mode = if *exact_element { MatchMode::ExactElement } else { MatchMode::Token };
            cmd_eval(predictions, gold, mode, annotations.as_deref(), records.as_deref())
        }
        Command::Config => {
            print_json(&serde_json::to_value(configs(g)?).expect("json"));
            Ok(exit::OK)
        }
        Command::Cache(CacheCommand::List) => {
            let cache = ArtifactCache::new(&g.cache_dir);
            for id in cache.table_ids().map_err(|e| general(e.to_string()))? {
                println!("{id}");
            }
            Ok(exit::OK)
        }
        Command::Cache(CacheCommand::Clear { table_id }) => {
            let cache = ArtifactCache::new(&g.cache_dir);
            match table_id {
                Some(id) => {
                    if !cache.remove(id).map_err(|e| general(e.to_string()))? {
                        return Err(fail(exit::MISSING_PREREQ, format!("`{id}` is not cached")));
                    }
                }
                None => cache.clear().map_err(|e| general(e.to_string()))?,
            }
            Ok(exit::OK)
        }
        Command::Ledger { format } => {
            let ledger = load_ledger(g)?;
            match format {
                Format::Csv => print!("{}", ledger.to_csv()),
                _ => println!("{}", ledger.to_json()),
            }
            Ok(exit::OK)
        }
    }
}

fn same_text(a: &Table, b: &Table) -> bool {
    a.column_names() == b.column_names()
        && a.num_rows() == b.num_rows()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| x.iter().zip(y).all(|(c, d)| c.to_text() == d.to_text()))
}

fn write_outputs(outcome: &PreprocessOutcome, out: &Path) -> Result<Value, Failure> {
    write_file(&out.join("canonical.csv"), &outcome.canonical_csv).map_err(general)?;
    write_file(&out.join("trace.json"), &outcome.trace_json).map_err(general)?;
    write_file(&out.join("audit.json"), &outcome.audit.to_json()).map_err(general)?;
    Ok(json!({
        "table_id": outcome.entry.table_id,
        "cache": outcome.status,
        "provider_calls": outcome.provider_calls,
        "lossless": outcome.audit.lossless,
        "snapshots": outcome.audit.snapshots_needed,
        "out_dir": out.display().to_string(),
    }))
}

fn cmd_transform_all(g: &GlobalArgs, dir: &Path, out_root: Option<&Path>) -> CmdResult {
    let files = table_files(dir).map_err(|e| fail(exit::MISSING_PREREQ, e))?;
    let inputs = files.iter().map(|f| load_table(f, None).map(TableInput::new)).collect::<Result<Vec<_>, _>>()?;
    let out_root = out_root.map(Path::to_path_buf).unwrap_or_else(|| Path::new("out").to_path_buf());
    with_pipeline(g, |p| {
        let mut code = exit::OK;
        let mut summaries = Vec::new();
        for (input, result) in inputs.iter().zip(p.preprocess_all(&inputs)) {
            match result {
                Ok(outcome) => {
                    let out = out_root.join(sanitize_table_id(&input.raw.table_id));
                    summaries.push(write_outputs(&outcome, &out)?);
                    if !outcome.audit.lossless {
                        code = code.max(exit::FAILURE);
                    }
                }
                Err(e) => {
                    let f = pipeline_failure(e);
                    eprintln!("{}: {}", input.raw.table_id, f.message);
                    summaries.push(json!({"table_id": input.raw.table_id, "error": f.message, "exit": f.code}));
                    code = code.max(f.code);
                }
            }
        }
        print_json(&Value::Array(summaries));
        Ok(code)
    })
}

fn field<'a>(v: &'a Value, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| v.get(*k))
}

fn id_of(v: &Value) -> Option<String> {
    match v.get("id")? {
        Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

fn keyed(path: &Path, keys: &[&str]) -> Result<Vec<(String, Value, Value)>, Failure> {
    let rows = read_jsonl(path).map_err(|e| fail(exit::MISSING_PREREQ, e))?;
    if rows.is_empty() {
        return Err(general(format!("{} has no records", path.display())));
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let id = id_of(r).ok_or_else(|| general(format!("{} record {} has no id", path.display(), i + 1)))?;
            let v = field(r, keys)
                .cloned()
                .ok_or_else(|| general(format!("{} record `{id}` lacks any of {keys:?}", path.display())))?;
            Ok((id, v, r.get("question").cloned().unwrap_or(Value::Null)))
        })
        .collect()
}

fn label_set(v: &Value) -> BTreeSet<String> {
    match v {
        Value::Array(items) => items.iter().map(answer_text).collect(),
        Value::Null => BTreeSet::new(),
        other => BTreeSet::from([answer_text(other)]),
    }
}

fn agreement_report(path: &Path) -> Result<Value, Failure> {
    let rows = read_jsonl(path).map_err(|e| fail(exit::MISSING_PREREQ, e))?;
    let matrix: Vec<Vec<Value>> = rows
        .iter()
        .map(|r| r.get("labels").and_then(Value::as_array).cloned())
        .collect::<Option<_>>()
        .ok_or_else(|| general(format!("{}: every record needs a `labels` list", path.display())))?;
    let raters = matrix.first().map_or(0, Vec::len);
    let scalar: Vec<Vec<String>> = matrix.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
    let fleiss = fleiss_kappa(&scalar).map_err(|e| general(e.to_string()))?;
    let mut cohen = Vec::new();
    let mut jaccard = Vec::new();
    for a in 0..raters {
        for b in a + 1..raters {
            let la: Vec<&String> = scalar.iter().map(|r| &r[a]).collect();
            let lb: Vec<&String> = scalar.iter().map(|r| &r[b]).collect();
            cohen.push(cohen_kappa(&la, &lb).map_err(|e| general(e.to_string()))?.value);
            let sa: Vec<BTreeSet<String>> = matrix.iter().map(|r| label_set(&r[a])).collect();
            let sb: Vec<BTreeSet<String>> = matrix.iter().map(|r| label_set(&r[b])).collect();
            jaccard.push(jaccard_agreement(&sa, &sb).map_err(|e| general(e.to_string()))?);
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { Value::Null } else { json!(v.iter().sum::<f64>() / v.len() as f64) };
    Ok(json!({
        "items": matrix.len(),
        "raters": raters,
        "fleiss_kappa": fleiss.value,
        "fleiss_degenerate": fleiss.degenerate,
        "mean_pairwise_cohen_kappa": mean(&cohen),
        "mean_pairwise_jaccard": mean(&jaccard),
    }))
}

fn cmd_eval(predictions: &Path, gold: &Path, mode: MatchMode, annotations: Option<&Path>, records_out: Option<&Path>) -> CmdResult {
    let pred = keyed(predictions, &["predicted", "prediction", "answer"])?;
    let gold = keyed(gold, &["gold", "answer"])?;
    let gold_by_id: HashMap<&str, &Value> = gold.iter().map(|(id, v, _)| (id.as_str(), v)).collect();
    let pred_ids: BTreeSet<&str> = pred.iter().map(|(id, _, _)| id.as_str()).collect();
    let orphans_pred: Vec<&str> = pred_ids.iter().copied().filter(|id| !gold_by_id.contains_key(id)).collect();
    let orphans_gold: Vec<&str> = gold.iter().map(|(id, _, _)| id.as_str()).filter(|id| !pred_ids.contains(id)).collect();
    if !orphans_pred.is_empty() || !orphans_gold.is_empty() {
        return Err(general(format!(
            "ids do not line up; only in predictions: {orphans_pred:?}; only in gold: {orphans_gold:?}"
        )));
    }
    let records: Vec<EvalRecord> = pred.iter().map(|(id, p, _)| compute_f1_with(id, p, gold_by_id[id.as_str()], mode)).collect();
    if let Some(path) = records_out {
        let lines: String = records.iter().map(|r| serde_json::to_string(r).expect("json") + "\n").collect();
        write_file(path, &lines).map_err(general)?;
    }
    let n = records.len() as f64;
    let mut report = json!({
        "count": records.len(),
        "mode": mode,
        "mean_f1": mean_f1(&records),
        "mean_precision": records.iter().map(|r| r.precision).sum::<f64>() / n,
        "mean_recall": records.iter().map(|r| r.recall).sum::<f64>() / n,
    });
    if let Some(path) = annotations {
        report["agreement"] = agreement_report(path)?;
    }
    print_json(&report);
    Ok(exit::OK)
}

pub fn run(cli: Cli) -> i32 {
    match run_inner(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.message);
            f.code
        }
    }
}
