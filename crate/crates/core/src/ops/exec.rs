// SPDX-License-Identifier: Apache-2.0

//! Plan executor. Column operators run against a view restricted to their
//! declared reads and the result is diffed against the view, so a step can
//! only touch what it declared.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::apply::{apply_op, OpContext, OpError};
use super::custom::{CodegenFallback, CustomRegistry};
use super::params::{write_pattern_matches, OpParams};
use crate::plan::{validate_plan_with, Operator, PlanError, PolicyReport, StepGraph, TransformationPlan, ValidateOptions};
use crate::table::{write_csv, CellValue, Column, ColumnRole, Table, TableError};

pub const ROW_ID_COLUMN: &str = "_row_id";
/// Helper column used when `_row_id` exists but does not hold raw positions.
pub const RAW_ROW_ID_COLUMN: &str = "_raw_row_id";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("plan has blocking findings")]
    Validation(PolicyReport),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("step `{step_id}`: {source}")]
    Step { step_id: String, source: OpError },
    #[error("step `{step_id}` broke write discipline: {message}")]
    WriteDiscipline { step_id: String, message: String },
    #[error("final output: {0}")]
    Output(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Per-step audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step_id: String,
    pub op: String,
    pub rows_in: usize,
    pub rows_out: usize,
    pub columns_added: Vec<String>,
    pub columns_removed: Vec<String>,
    pub columns_modified: Vec<String>,
    /// Some cell's information survives in no output column of this step.
    pub loss: bool,
    pub custom: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

/// Executor switches.
#[derive(Clone, Default)]
pub struct ExecPolicy {
    /// Suppresses the row-count warning; row-changing steps run either way.
    pub allow_row_change: bool,
    /// Raw columns copied to `<name>_raw` next to their source in the output.
    pub snapshot_columns: Vec<String>,
    /// Emit `_row_id` (original row position) when the output lacks it.
    pub ensure_row_id: bool,
    pub registry: CustomRegistry,
    pub fallback: Option<Arc<dyn CodegenFallback>>,
}

impl fmt::Debug for ExecPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExecPolicy")
            .field("allow_row_change", &self.allow_row_change)
            .field("snapshot_columns", &self.snapshot_columns)
            .field("ensure_row_id", &self.ensure_row_id)
            .field("registry", &self.registry)
            .field("fallback", &self.fallback.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    /// Canonical table. In-memory `row_ids` hold each row's raw position.
    pub table: Table,
    pub traces: Vec<StepTrace>,
    /// Non-blocking findings from validation.
    pub report: PolicyReport,
}

impl Execution {
    pub fn canonical_csv(&self) -> String {
        write_csv(&self.table)
    }

    pub fn trace_json(&self) -> String {
        serde_json::to_string_pretty(&self.traces).expect("traces always serialize")
    }
}

pub fn snapshot_name(column: &str) -> String {
    format!("{column}_raw")
}

/// Runs `plan` over `raw`.
pub fn execute_plan(plan: &TransformationPlan, raw: &Table, policy: &ExecPolicy) -> Result<Execution, ExecError> {
    let report = validate_plan_with(
        plan,
        &raw.schema(),
        &ValidateOptions {
            allow_row_change: policy.allow_row_change,
            samples: Some(raw),
        },
    );
    if report.has_errors() {
        return Err(ExecError::Validation(report));
    }
    let graph = StepGraph::new(plan);
    let order = graph.order().map_err(|stuck| {
        PlanError::Cycle(graph.find_cycle(&stuck).into_iter().map(|i| plan.steps[i].step_id.clone()).collect())
    })?;

    let mut table = raw.clone();
    table.row_ids = Some((0..raw.num_rows() as u64).collect());
    let ctx_base = OpContext {
        registry: Some(&policy.registry),
        fallback: policy.fallback.as_deref(),
        step: None,
    };
    let mut traces = Vec::with_capacity(order.len());
    for i in order {
        let step = &plan.steps[i];
        let op = step.operator().expect("validated");
        let params = OpParams::from_step(step).map_err(|e| ExecError::Step {
            step_id: step.step_id.clone(),
            source: e.into(),
        })?;
        let ctx = OpContext { step: Some(step), ..ctx_base };
        let (next, trace) = if op.is_structural() {
            run_structural(&table, step, op, &params, &ctx)?
        } else {
            run_columnar(&table, step, op, &params, &ctx)?
        };
        table = next;
        traces.push(trace);
    }

    let mut out = project_output(plan, &table)?;
    splice_snapshots(&mut out, raw, &policy.snapshot_columns)?;
    if policy.ensure_row_id {
        let ids: Vec<CellValue> = out
            .row_ids
            .iter()
            .flatten()
            .map(|&i| CellValue::Integer(i as i64))
            .collect();
        let name = match out.column_values(ROW_ID_COLUMN) {
            Err(_) => Some(ROW_ID_COLUMN),
            Ok(existing) if existing == ids => None,
            Ok(_) if out.has_column(RAW_ROW_ID_COLUMN) => None,
            Ok(_) => Some(RAW_ROW_ID_COLUMN),
        };
        if let Some(name) = name {
            out.insert_column(0, Column::new(name).with_role(ColumnRole::Helper), ids)?;
        }
    }
    let key = &plan.final_output.primary_key;
    if !key.is_empty() && key.iter().all(|k| out.has_column(k)) {
        let schema = crate::table::SchemaDescriptor {
            columns: Vec::new(),
            primary_key: key.clone(),
        };
        schema.check_primary_key(&out).map_err(|e| ExecError::Output(e.to_string()))?;
    }
    Ok(Execution { table: out, traces, report })
}

fn step_err(step_id: &str) -> impl Fn(OpError) -> ExecError + '_ {
    move |source| ExecError::Step {
        step_id: step_id.to_string(),
        source,
    }
}

fn run_structural(
    table: &Table,
    step: &crate::plan::PlanStep,
    op: Operator,
    params: &OpParams,
    ctx: &OpContext<'_>,
) -> Result<(Table, StepTrace), ExecError> {
    let applied = apply_op(table, params, ctx).map_err(step_err(&step.step_id))?;
    let out = applied.table;
    let before: Vec<&str> = table.column_names();
    let after: Vec<&str> = out.column_names();
    let added: Vec<String> = after.iter().filter(|c| !before.contains(c)).map(|c| c.to_string()).collect();
    let removed: Vec<String> = before.iter().filter(|c| !after.contains(c)).map(|c| c.to_string()).collect();
    let rows_in = table.num_rows();
    let rows_out = out.num_rows();
    if !op.changes_row_count() && rows_in != rows_out {
        return Err(ExecError::WriteDiscipline {
            step_id: step.step_id.clone(),
            message: format!("row count changed from {rows_in} to {rows_out}"),
        });
    }
    let loss = rows_out < rows_in || (op != Operator::Rename && !removed.is_empty());
    let trace = StepTrace {
        step_id: step.step_id.clone(),
        op: step.op.clone(),
        rows_in,
        rows_out,
        columns_added: added,
        columns_removed: removed,
        columns_modified: Vec::new(),
        loss,
        custom: false,
        details: applied.details,
    };
    Ok((out, trace))
}

fn run_columnar(
    table: &Table,
    step: &crate::plan::PlanStep,
    op: Operator,
    params: &OpParams,
    ctx: &OpContext<'_>,
) -> Result<(Table, StepTrace), ExecError> {
    let discipline = |message: String| ExecError::WriteDiscipline {
        step_id: step.step_id.clone(),
        message,
    };
    let view = table.project(&step.reads)?;
    let applied = apply_op(&view, params, ctx).map_err(step_err(&step.step_id))?;
    let out = applied.table;
    if out.num_rows() != view.num_rows() {
        return Err(discipline(format!("row count changed from {} to {}", view.num_rows(), out.num_rows())));
    }
    let declared = |c: &str| step.writes.iter().any(|w| write_pattern_matches(w, c));

    let mut added = Vec::new();
    let mut modified = Vec::new();
    for (ci, col) in out.columns.iter().enumerate() {
        let new_cells = || out.rows.iter().map(move |r| &r[ci]);
        match view.column_index(&col.name) {
            None => {
                if !declared(&col.name) {
                    return Err(discipline(format!("wrote undeclared column `{}`", col.name)));
                }
                added.push(ci);
            }
            Some(vi) => {
                let same = view.columns[vi].role == col.role && view.rows.iter().map(|r| &r[vi]).eq(new_cells());
                if !same {
                    if !declared(&col.name) {
                        return Err(discipline(format!("modified undeclared column `{}`", col.name)));
                    }
                    modified.push(ci);
                }
            }
        }
    }
    for c in &view.columns {
        if !out.has_column(&c.name) {
            return Err(discipline(format!("dropped column `{}`", c.name)));
        }
    }

    let mut next = table.clone();
    for &ci in &modified {
        let values = out.rows.iter().map(|r| r[ci].clone()).collect();
        next.set_column(out.columns[ci].clone(), values)?;
    }
    for &ci in &added {
        let col = out.columns[ci].clone();
        let values: Vec<CellValue> = out.rows.iter().map(|r| r[ci].clone()).collect();
        if next.has_column(&col.name) {
            return Err(discipline(format!("column `{}` already exists", col.name)));
        }
        match params {
            OpParams::KeepRawSnapshot { source, .. } => {
                let pos = next.require_column(source)? + 1;
                next.insert_column(pos, col, values)?;
            }
            _ => next.set_column(col, values)?,
        }
    }
    let name = |ci: &usize| out.columns[*ci].name.clone();
    let trace = StepTrace {
        step_id: step.step_id.clone(),
        op: step.op.clone(),
        rows_in: table.num_rows(),
        rows_out: next.num_rows(),
        columns_added: added.iter().map(name).collect(),
        columns_removed: Vec::new(),
        columns_modified: modified.iter().map(name).collect(),
        loss: !modified.is_empty(),
        custom: op == Operator::Custom,
        details: applied.details,
    };
    Ok((next, trace))
}

/// Projects and role-tags the working table per `final_output`. An empty
/// column list keeps everything.
fn project_output(plan: &TransformationPlan, table: &Table) -> Result<Table, ExecError> {
    let spec = &plan.final_output.columns;
    if spec.is_empty() {
        return Ok(table.clone());
    }
    let mut names: Vec<String> = Vec::new();
    let mut tags: Vec<&crate::plan::OutputColumn> = Vec::new();
    for oc in spec {
        if oc.name.ends_with('*') {
            for c in &table.columns {
                if write_pattern_matches(&oc.name, &c.name) && !names.contains(&c.name) {
                    names.push(c.name.clone());
                    tags.push(oc);
                }
            }
        } else if !names.contains(&oc.name) {
            table
                .require_column(&oc.name)
                .map_err(|_| ExecError::Output(format!("column `{}` was never produced", oc.name)))?;
            names.push(oc.name.clone());
            tags.push(oc);
        }
    }
    let mut out = table.project(&names)?;
    for (col, oc) in out.columns.iter_mut().zip(tags) {
        col.role = oc.role;
        if oc.kind.is_some() {
            col.declared_kind = oc.kind;
        }
    }
    out.check().map_err(|e| ExecError::Output(e.to_string()))?;
    Ok(out)
}

/// Adds `<c>_raw` copies of raw columns, aligned by row id, right after `c`
/// (or at the end when `c` is not in the output).
fn splice_snapshots(out: &mut Table, raw: &Table, columns: &[String]) -> Result<(), ExecError> {
    if columns.is_empty() {
        return Ok(());
    }
    let ids: Vec<u64> = match &out.row_ids {
        Some(ids) => ids.clone(),
        None => (0..out.num_rows() as u64).collect(),
    };
    for c in columns {
        let name = snapshot_name(c);
        if out.has_column(&name) {
            continue;
        }
        let source = raw.column_values(c)?;
        let values = ids.iter().map(|&i| source[i as usize].clone()).collect();
        let pos = out.column_index(c).map_or(out.num_columns(), |p| p + 1);
        out.insert_column(pos, Column::new(name).with_role(ColumnRole::RawSnapshot), values)?;
    }
    Ok(())
}
