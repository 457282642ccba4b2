// SPDX-License-Identifier: Apache-2.0

//! Static plan checks. Structural rules catch plans that cannot run; policy
//! rules encode what planners were told not to do.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use regex_syntax::hir::{Class, Hir, HirKind};
use serde::{Deserialize, Serialize};

use super::catalog::Operator;
use super::model::TransformationPlan;
use super::topo::StepGraph;
use crate::ops::params::{write_pattern_matches, OpParams};
use crate::table::{SchemaDescriptor, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: String,
    /// `None` for plan-level findings such as a missing output column.
    pub step_id: Option<String>,
    /// Declaration index; plan-level findings sort after every step.
    pub step_index: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PolicyReport {
    pub findings: Vec<Finding>,
}

impl PolicyReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn rules(&self) -> Vec<&str> {
        self.findings.iter().map(|f| f.rule.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Knobs for [`validate_plan_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions<'a> {
    /// Row-count-changing operators are accepted without a warning.
    pub allow_row_change: bool,
    /// Raw cells used to decide whether a comma-less numeric pattern matters.
    pub samples: Option<&'a Table>,
}

pub fn validate_plan(plan: &TransformationPlan, raw_schema: &SchemaDescriptor) -> PolicyReport {
    validate_plan_with(plan, raw_schema, &ValidateOptions::default())
}

struct Sink {
    findings: Vec<Finding>,
}

impl Sink {
    fn push(&mut self, plan: &TransformationPlan, idx: usize, rule: &str, severity: Severity, message: String) {
        self.findings.push(Finding {
            rule: rule.to_string(),
            step_id: plan.steps.get(idx).map(|s| s.step_id.clone()),
            step_index: idx,
            severity,
            message,
        });
    }
}

/// Columns known to exist at some point of the simulated schema. Entries
/// ending in `*` stand for data-dependent families such as one-hot outputs.
#[derive(Default)]
struct Available {
    names: Vec<String>,
}

impl Available {
    fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|w| write_pattern_matches(w, name))
    }

    fn contains_exact(&self, name: &str) -> bool {
        self.names.iter().any(|w| w == name)
    }

    fn add(&mut self, name: &str) {
        if !self.contains_exact(name) {
            self.names.push(name.to_string());
        }
    }

    fn remove(&mut self, name: &str) {
        self.names.retain(|n| n != name);
    }
}

pub fn validate_plan_with(
    plan: &TransformationPlan,
    raw_schema: &SchemaDescriptor,
    opts: &ValidateOptions<'_>,
) -> PolicyReport {
    let mut sink = Sink { findings: Vec::new() };
    let n = plan.steps.len();
    let plan_level = n;

    // Identity and dependency checks.
    let mut first_index: HashMap<&str, usize> = HashMap::new();
    for (i, s) in plan.steps.iter().enumerate() {
        if let Some(&j) = first_index.get(s.step_id.as_str()) {
            sink.push(plan, i, "STRUCT_DUPLICATE_STEP_ID", Severity::Error, format!("step id `{}` already used by step {j}", s.step_id));
        } else {
            first_index.insert(&s.step_id, i);
        }
    }
    for (i, s) in plan.steps.iter().enumerate() {
        for d in &s.depends_on {
            match first_index.get(d.as_str()) {
                None => sink.push(plan, i, "STRUCT_UNKNOWN_DEPENDENCY", Severity::Error, format!("depends on unknown step `{d}`")),
                Some(&j) if j >= i => sink.push(
                    plan,
                    i,
                    "STRUCT_FORWARD_DEPENDENCY",
                    Severity::Error,
                    format!("depends on `{d}`, which is declared at or after this step"),
                ),
                Some(_) => {}
            }
        }
    }
    let graph = StepGraph::new(plan);
    let order = match graph.order() {
        Ok(order) => order,
        Err(stuck) => {
            let cycle: Vec<&str> = graph.find_cycle(&stuck).into_iter().map(|i| plan.steps[i].step_id.as_str()).collect();
            sink.push(plan, plan_level, "STRUCT_CYCLE", Severity::Error, format!("dependency cycle: {}", cycle.join(" -> ")));
            (0..n).collect()
        }
    };
    let ancestors = graph.ancestors();

    // Simulate the schema along the execution order.
    let mut avail = Available::default();
    for c in &raw_schema.columns {
        avail.add(&c.name);
    }
    for &i in &order {
        let step = &plan.steps[i];
        let Some(op) = step.operator() else {
            if step.op == "explode_entities" {
                sink.push(plan, i, "POLICY_NO_EXPLODE", Severity::Error, "explode_entities is forbidden: row count must stay the same".into());
            }
            sink.push(plan, i, "STRUCT_UNKNOWN_OP", Severity::Error, format!("`{}` is not a vocabulary operator", step.op));
            for w in &step.writes {
                avail.add(w);
            }
            continue;
        };

        for r in &step.reads {
            if !avail.contains(r) {
                sink.push(plan, i, "STRUCT_UNKNOWN_READ", Severity::Error, format!("reads `{r}`, which does not exist at this point"));
            }
        }
        let reads: HashSet<&str> = step.reads.iter().map(String::as_str).collect();
        for w in &step.writes {
            if reads.contains(w.as_str()) {
                if !op.in_place_allowed() {
                    sink.push(plan, i, "STRUCT_INPLACE_NOT_ALLOWED", Severity::Error, format!("`{op}` may not write its input `{w}` in place"));
                }
            } else if op != Operator::Rename && avail.contains_exact(w) {
                sink.push(plan, i, "STRUCT_WRITE_COLLISION", Severity::Error, format!("writes `{w}`, which already exists and is not read"));
            }
        }

        match OpParams::from_step(step) {
            Err(e) => sink.push(plan, i, "STRUCT_PARAMS", Severity::Error, e.to_string()),
            Ok(p) => {
                let missing: Vec<String> = p.referenced_columns().into_iter().filter(|c| !reads.contains(c.as_str())).collect();
                if !missing.is_empty() {
                    sink.push(plan, i, "STRUCT_PARAM_COLUMNS", Severity::Error, format!("parameters use undeclared reads: {}", missing.join(", ")));
                }
                if let Some(produced) = p.produced_columns() {
                    let undeclared: Vec<String> = produced
                        .into_iter()
                        .filter(|c| !step.writes.iter().any(|w| write_pattern_matches(w, c)))
                        .collect();
                    if !undeclared.is_empty() {
                        sink.push(plan, i, "STRUCT_UNDECLARED_WRITE", Severity::Error, format!("parameters write undeclared columns: {}", undeclared.join(", ")));
                    }
                }
                policy_lints(plan, i, &p, opts, &mut sink);
                match &p {
                    OpParams::Rename { mapping } => {
                        for (old, _) in mapping {
                            avail.remove(old);
                        }
                    }
                    OpParams::Select { columns } => {
                        avail.names.retain(|n| columns.contains(n));
                    }
                    _ => {}
                }
            }
        }
        if op.changes_row_count() && !opts.allow_row_change {
            sink.push(plan, i, "POLICY_ROW_COUNT", Severity::Warning, format!("`{op}` changes the row count"));
        }
        if op == Operator::KeepRawSnapshot {
            sink.push(plan, i, "POLICY_RAW_SNAPSHOT", Severity::Warning, "snapshots are inserted automatically when the audit needs them".into());
        }
        for w in &step.writes {
            avail.add(w);
        }
    }

    // Parallel steps writing the same column race.
    for j in 0..n {
        for i in 0..j {
            if ancestors[j].contains(&i) || ancestors[i].contains(&j) {
                continue;
            }
            let wi: BTreeSet<&str> = plan.steps[i].writes.iter().map(String::as_str).collect();
            let shared: Vec<&str> = plan.steps[j].writes.iter().map(String::as_str).filter(|w| wi.contains(w)).collect();
            if !shared.is_empty() {
                sink.push(
                    plan,
                    j,
                    "STRUCT_DUPLICATE_WRITE",
                    Severity::Error,
                    format!("writes {} also written by independent step `{}`", shared.join(", "), plan.steps[i].step_id),
                );
            }
        }
    }

    // Promised output.
    let fo = &plan.final_output;
    for c in &fo.columns {
        if !avail.contains(&c.name) {
            sink.push(plan, plan_level, "STRUCT_FINAL_COLUMN_MISSING", Severity::Error, format!("final column `{}` is never produced", c.name));
        }
    }
    for k in &fo.primary_key {
        let listed = if fo.columns.is_empty() { avail.contains(k) } else { fo.columns.iter().any(|c| &c.name == k) };
        if !listed {
            sink.push(plan, plan_level, "STRUCT_PRIMARY_KEY", Severity::Error, format!("primary key column `{k}` is not in the output"));
        }
    }

    let mut findings = sink.findings;
    findings.sort_by(|a, b| (a.step_index, &a.rule).cmp(&(b.step_index, &b.rule)));
    PolicyReport { findings }
}

fn policy_lints(plan: &TransformationPlan, i: usize, p: &OpParams, opts: &ValidateOptions<'_>, sink: &mut Sink) {
    let (source, pattern) = match p {
        OpParams::ExtractRegex { source, pattern, .. } => (source, pattern),
        OpParams::ParseNumber { source, pattern, .. } => (source, pattern),
        _ => return,
    };
    let Some(shape) = digit_shape(pattern) else { return };
    if shape.comma_class {
        return;
    }
    let samples = opts.samples.and_then(|t| t.column_values(source).ok());
    let flagged = match samples {
        Some(cells) => !shape.digit_runs.is_empty() && cells.into_iter().any(|c| GROUPED.is_match(&c.to_text())),
        None => shape.digit_runs.iter().any(|unbounded| *unbounded),
    };
    if flagged {
        sink.push(
            plan,
            i,
            "POLICY_COMMA_NUMERIC",
            Severity::Warning,
            format!("numeric pattern `{pattern}` has no comma in its digit class; grouped numbers will be cut"),
        );
    }
}

static GROUPED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[0-9],[0-9]").expect("static pattern"));

struct DigitShape {
    /// One entry per repeated digit class without a comma; `true` if unbounded.
    digit_runs: Vec<bool>,
    /// Some class mixes digits and commas.
    comma_class: bool,
}

fn digit_shape(pattern: &str) -> Option<DigitShape> {
    let hir = regex_syntax::Parser::new().parse(pattern).ok()?;
    let mut shape = DigitShape { digit_runs: Vec::new(), comma_class: false };
    walk(&hir, &mut shape);
    Some(shape)
}

fn class_facts(class: &Class) -> (bool, bool) {
    let has = |c: char| match class {
        Class::Unicode(u) => u.ranges().iter().any(|r| r.start() <= c && c <= r.end()),
        Class::Bytes(b) => b.ranges().iter().any(|r| r.start() as u32 <= c as u32 && c as u32 <= r.end() as u32),
    };
    (('0'..='9').all(has), has(','))
}

fn walk(hir: &Hir, shape: &mut DigitShape) {
    match hir.kind() {
        HirKind::Class(c) => {
            let (digits, comma) = class_facts(c);
            if digits && comma {
                shape.comma_class = true;
            }
        }
        HirKind::Repetition(rep) => {
            if let HirKind::Class(c) = rep.sub.kind() {
                let (digits, comma) = class_facts(c);
                if digits && !comma && rep.max != Some(1) {
                    shape.digit_runs.push(rep.max.is_none());
                }
            }
            walk(&rep.sub, shape);
        }
        HirKind::Capture(cap) => walk(&cap.sub, shape),
        HirKind::Concat(items) | HirKind::Alternation(items) => items.iter().for_each(|h| walk(h, shape)),
        HirKind::Empty | HirKind::Literal(_) | HirKind::Look(_) => {}
    }
}
