// SPDX-License-Identifier: Apache-2.0

//! Prompt templates for the four model stages and their slot filling.

use thiserror::Error;

use super::config::Stage;
use super::probe::ProbeArtifact;
use crate::plan::{vocabulary_block, PlanStep};
use crate::table::{serialize_markdown, Table, DEFAULT_MAX_ROWS};

pub const ISSUE_TEMPLATE: &str = include_str!("templates/issue.txt");
pub const PLAN_TEMPLATE: &str = include_str!("templates/plan.txt");
pub const CODE_TEMPLATE: &str = include_str!("templates/code.txt");
pub const QA_TEMPLATE: &str = include_str!("templates/qa.txt");

/// A worked example placed in the planner prompt's example slot.
pub const PLAN_EXAMPLES: &str = r#"EXAMPLE
Raw columns: "Name", "Born", "Prize money"
Sample row: "Ada Byron (UK)", "Dec 10, 1815", "$1,200 USD"

{
 "table_id": "example",
 "strategy": "Add a row id, parse the birth date and split the prize into amount and currency.",
 "steps": [
   {"step_id": "s1", "op": "add_row_id", "description": "Stable row identifier.", "reads": [], "writes": ["_row_id"], "params": {}, "fixes_issues": [], "depends_on": []},
   {"step_id": "s2", "op": "parse_date_text", "description": "Birth date as ISO date.", "reads": ["Born"], "writes": ["born_date"], "params": {"formats": ["%b %d, %Y"]}, "fixes_issues": ["I1"], "depends_on": []},
   {"step_id": "s3", "op": "extract_regex", "description": "Amount and currency.", "reads": ["Prize money"], "writes": ["prize_amount", "prize_currency"], "params": {"pattern": "\\$([0-9,]+) ([A-Z]+)"}, "fixes_issues": ["I2"], "depends_on": []},
   {"step_id": "s4", "op": "parse_number", "description": "Amount as a number.", "reads": ["prize_amount"], "writes": ["prize_amount"], "params": {}, "fixes_issues": ["I2"], "depends_on": ["s3"]}
 ],
 "final_output": {
   "primary_key": ["_row_id"],
   "columns": [
     {"name": "_row_id", "role": "helper"},
     {"name": "Name", "role": "canonical"},
     {"name": "born_date", "role": "derived"},
     {"name": "prize_amount", "role": "derived"},
     {"name": "prize_currency", "role": "derived"}
   ]
 }
}"#;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("the {stage} prompt needs {what}")]
    MissingExtra { stage: Stage, what: &'static str },
}

/// Stage-specific inputs besides the table itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct PromptExtras<'a> {
    /// Falls back to the table's own title.
    pub title: Option<&'a str>,
    /// Free-text column notes; generated from the schema when absent.
    pub column_descriptions: Option<&'a str>,
    pub probes: Option<&'a ProbeArtifact>,
    pub step: Option<&'a PlanStep>,
    pub question: Option<&'a str>,
    /// Rows serialized into the prompt; defaults to 50.
    pub max_rows: Option<usize>,
}

/// Replaces each slot once per occurrence in a single left-to-right pass, so
/// substituted text is never rescanned for slots.
pub fn fill_slots(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = slots
            .iter()
            .filter_map(|(k, v)| rest.find(k).map(|i| (i, *k, *v)))
            .min_by_key(|(i, k, _)| (*i, std::cmp::Reverse(k.len())));
        match next {
            Some((i, k, v)) => {
                out.push_str(&rest[..i]);
                out.push_str(v);
                rest = &rest[i + k.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// One `- name (kind, role)` line per column.
pub fn describe_columns(table: &Table) -> String {
    table
        .columns
        .iter()
        .map(|c| {
            let kind = c.declared_kind.map_or("text", |k| k.as_str());
            format!("- {} ({}, {})", c.name, kind, c.role.as_str())
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Python `repr` of a string.
fn py_str(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::new();
    out.push(quote);
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

fn py_list<S: AsRef<str>>(items: &[S]) -> String {
    format!("[{}]", items.iter().map(|s| py_str(s.as_ref())).collect::<Vec<_>>().join(", "))
}

/// Fixed-width text rendering of the first rows, right-aligned like a
/// dataframe's plain-text dump.
fn sample_dump(table: &Table, cols: &[String], rows: usize) -> String {
    let n = table.num_rows().min(rows);
    let idx: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let idx_w = idx.iter().map(String::len).max().unwrap_or(0);
    let mut columns: Vec<(String, Vec<String>)> = Vec::new();
    for c in cols {
        let values = (0..n).map(|r| table.cell(r, c).map(|v| v.to_text()).unwrap_or_default()).collect();
        columns.push((c.clone(), values));
    }
    let widths: Vec<usize> = columns
        .iter()
        .map(|(name, vals)| vals.iter().map(|v| v.chars().count()).chain([name.chars().count()]).max().unwrap_or(0))
        .collect();
    let mut out = " ".repeat(idx_w);
    for ((name, _), w) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {name:>w$}"));
    }
    for (r, i) in idx.iter().enumerate() {
        out.push('\n');
        out.push_str(&format!("{i:<idx_w$}"));
        for ((_, vals), w) in columns.iter().zip(&widths) {
            out.push_str(&format!("  {:>w$}", vals[r]));
        }
    }
    out
}

fn issue_prompt(table: &Table, extras: &PromptExtras<'_>, md: &str) -> String {
    let title = extras.title.unwrap_or(&table.title);
    let described = describe_columns(table);
    let descriptions = extras.column_descriptions.unwrap_or(&described);
    fill_slots(
        ISSUE_TEMPLATE,
        &[("{{table_title}}", title), ("{{column_description_text}}", descriptions), ("{{raw_markdown_table}}", md)],
    )
}

fn plan_prompt(table: &Table, extras: &PromptExtras<'_>, md: &str) -> Result<String, PromptError> {
    let probes = extras.probes.ok_or(PromptError::MissingExtra { stage: Stage::Plan, what: "the probe artifact" })?;
    let vocab = vocabulary_block();
    let body = fill_slots(PLAN_TEMPLATE, &[("{Transformation Operations List}", &vocab), ("{Examples}", PLAN_EXAMPLES)]);
    let described = describe_columns(table);
    let step1 = serde_json::to_string_pretty(&probes.planner_json()).expect("json");
    Ok(format!(
        "{body}\nTABLE_TITLE: {}\n\nCOLUMN_DESCRIPTIONS:\n{}\n\nRAW_TABLE_MD:\n{md}\nSTEP1_JSON:\n{step1}\n",
        extras.title.unwrap_or(&table.title),
        extras.column_descriptions.unwrap_or(&described),
    ))
}

/// The code prompt for one step, over the table state the step will see.
fn code_prompt(table: &Table, step: &PlanStep) -> String {
    let names: Vec<String> = table.columns.iter().map(|c| c.name.clone()).collect();
    let sample = if table.num_rows() > 0 {
        let mut relevant: Vec<String> = step.reads.iter().filter(|c| table.has_column(c)).cloned().collect();
        if relevant.is_empty() {
            relevant = names.iter().take(3).cloned().collect();
        }
        format!("\n**Sample Data (first 3 rows)**:\n{}\n", sample_dump(table, &relevant, 3))
    } else {
        String::new()
    };
    let params = serde_json::to_string_pretty(&step.params).expect("json");
    let rows = table.num_rows().to_string();
    let ncols = table.num_columns().to_string();
    let columns = py_list(&names);
    let reads = py_list(&step.reads);
    let writes = py_list(&step.writes);
    fill_slots(
        CODE_TEMPLATE,
        &[
            ("{columns}", &columns),
            ("{rows}", &rows),
            ("{ncols}", &ncols),
            ("{sample_data}", &sample),
            ("{description}", &step.description),
            ("{op}", &step.op),
            ("{params}", &params),
            ("{reads}", &reads),
            ("{writes}", &writes),
        ],
    )
}

fn qa_prompt(table: &Table, extras: &PromptExtras<'_>, md: &str) -> Result<String, PromptError> {
    let question = extras.question.ok_or(PromptError::MissingExtra { stage: Stage::Qa, what: "a question" })?;
    let name = extras.title.filter(|t| !t.is_empty()).unwrap_or(&table.table_id);
    let described = describe_columns(table);
    Ok(fill_slots(
        QA_TEMPLATE,
        &[
            ("{table_name}", name),
            ("{column_description}", extras.column_descriptions.unwrap_or(&described)),
            ("{transformed_table}", md),
            ("{question}", question),
        ],
    ))
}

/// Renders the prompt for `stage` over `table`.
///
/// Issue and plan prompts see the raw table, the QA prompt the canonical
/// one, the code prompt the projected view of a single step. Tables are
/// serialized as markdown with at most `max_rows` rows.
pub fn build_stage_prompt(stage: Stage, table: &Table, extras: &PromptExtras<'_>) -> Result<String, PromptError> {
    let md = serialize_markdown(table, extras.max_rows.unwrap_or(DEFAULT_MAX_ROWS));
    match stage {
        Stage::Issue => Ok(issue_prompt(table, extras, &md)),
        Stage::Plan => plan_prompt(table, extras, &md),
        Stage::Code => {
            let step = extras.step.ok_or(PromptError::MissingExtra { stage, what: "a plan step" })?;
            Ok(code_prompt(table, step))
        }
        Stage::Qa => qa_prompt(table, extras, &md),
    }
}
