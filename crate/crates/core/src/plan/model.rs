// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::catalog::Operator;
use super::PlanError;
use crate::table::{CellKind, ColumnRole, SchemaColumn, SchemaDescriptor};

/// One plan step, field-for-field as planners emit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub step_id: String,
    pub op: String,
    pub description: String,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
    pub params: BTreeMap<String, Value>,
    pub fixes_issues: Vec<String>,
    pub depends_on: Vec<String>,
}

impl PlanStep {
    /// Builds a step with empty description, issue list and dependencies.
    pub fn new(step_id: impl Into<String>, op: Operator) -> Self {
        PlanStep {
            step_id: step_id.into(),
            op: op.name().to_string(),
            description: String::new(),
            reads: Vec::new(),
            writes: Vec::new(),
            params: BTreeMap::new(),
            fixes_issues: Vec::new(),
            depends_on: Vec::new(),
        }
    }

    pub fn reads<I, S>(mut self, cols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.reads = cols.into_iter().map(Into::into).collect();
        self
    }

    pub fn writes<I, S>(mut self, cols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.writes = cols.into_iter().map(Into::into).collect();
        self
    }

    pub fn param(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn depends_on<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.depends_on = ids.into_iter().map(Into::into).collect();
        self
    }

    pub fn operator(&self) -> Option<Operator> {
        Operator::from_name(&self.op)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputColumn {
    pub name: String,
    pub role: ColumnRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CellKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FinalOutput {
    pub primary_key: Vec<String>,
    pub columns: Vec<OutputColumn>,
}

impl FinalOutput {
    pub fn schema(&self) -> SchemaDescriptor {
        SchemaDescriptor {
            columns: self
                .columns
                .iter()
                .map(|c| SchemaColumn {
                    name: c.name.clone(),
                    role: c.role,
                    kind: c.kind,
                })
                .collect(),
            primary_key: self.primary_key.clone(),
        }
    }
}

/// An ordered, dependency-annotated list of steps plus the promised output
/// schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformationPlan {
    pub table_id: String,
    pub strategy: String,
    pub steps: Vec<PlanStep>,
    pub final_output: FinalOutput,
}

impl TransformationPlan {
    pub fn empty(table_id: impl Into<String>) -> Self {
        TransformationPlan {
            table_id: table_id.into(),
            strategy: String::new(),
            steps: Vec::new(),
            final_output: FinalOutput::default(),
        }
    }

    pub fn step(&self, id: &str) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.step_id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans always serialize")
    }
}

/// One schema problem, addressed by a JSON path such as `steps[0].fixes_issues`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    pub path: String,
    pub message: String,
}

const TOP_KEYS: [&str; 4] = ["table_id", "strategy", "steps", "final_output"];
const STEP_KEYS: [&str; 8] = [
    "step_id",
    "op",
    "description",
    "reads",
    "writes",
    "params",
    "fixes_issues",
    "depends_on",
];

struct Checker {
    violations: Vec<SchemaViolation>,
}

impl Checker {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(SchemaViolation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn keys(&mut self, obj: &serde_json::Map<String, Value>, path: &str, required: &[&str], optional: &[&str]) {
        for k in required {
            if !obj.contains_key(*k) {
                self.push(join(path, k), "missing required key");
            }
        }
        for k in obj.keys() {
            if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
                self.push(join(path, k), "unknown key");
            }
        }
    }

    fn string(&mut self, obj: &serde_json::Map<String, Value>, path: &str, key: &str) -> String {
        match obj.get(key) {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.push(join(path, key), "expected a string");
                String::new()
            }
            None => String::new(),
        }
    }

    fn strings(&mut self, obj: &serde_json::Map<String, Value>, path: &str, key: &str) -> Vec<String> {
        match obj.get(key) {
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .filter_map(|(i, v)| match v {
                    Value::String(s) => Some(s.clone()),
                    _ => {
                        self.push(format!("{}[{i}]", join(path, key)), "expected a string");
                        None
                    }
                })
                .collect(),
            Some(_) => {
                self.push(join(path, key), "expected an array of strings");
                Vec::new()
            }
            None => Vec::new(),
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len();
    }
    text.len()
}

/// Parses plan JSON, rejecting unknown keys and reporting every schema
/// violation in one pass.
pub fn parse_plan(text: &str) -> Result<TransformationPlan, PlanError> {
    let value: Value = serde_json::from_str(text).map_err(|e| PlanError::Syntax {
        offset: byte_offset(text, e.line(), e.column()),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    plan_from_value(&value)
}

pub fn plan_from_value(value: &Value) -> Result<TransformationPlan, PlanError> {
    let mut ck = Checker { violations: Vec::new() };
    let Some(root) = value.as_object() else {
        return Err(PlanError::Schema(vec![SchemaViolation {
            path: "$".into(),
            message: "expected a JSON object".into(),
        }]));
    };
    ck.keys(root, "", &TOP_KEYS, &[]);
    let table_id = ck.string(root, "", "table_id");
    let strategy = ck.string(root, "", "strategy");

    let mut steps = Vec::new();
    match root.get("steps") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let path = format!("steps[{i}]");
                let Some(obj) = item.as_object() else {
                    ck.push(path, "expected an object");
                    continue;
                };
                ck.keys(obj, &path, &STEP_KEYS, &[]);
                let params = match obj.get("params") {
                    Some(Value::Object(m)) => m.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
                    Some(_) => {
                        ck.push(join(&path, "params"), "expected an object");
                        BTreeMap::new()
                    }
                    None => BTreeMap::new(),
                };
                steps.push(PlanStep {
                    step_id: ck.string(obj, &path, "step_id"),
                    op: ck.string(obj, &path, "op"),
                    description: ck.string(obj, &path, "description"),
                    reads: ck.strings(obj, &path, "reads"),
                    writes: ck.strings(obj, &path, "writes"),
                    params,
                    fixes_issues: ck.strings(obj, &path, "fixes_issues"),
                    depends_on: ck.strings(obj, &path, "depends_on"),
                });
            }
        }
        Some(_) => ck.push("steps", "expected an array"),
        None => {}
    }

    let mut final_output = FinalOutput::default();
    match root.get("final_output") {
        Some(Value::Object(fo)) => {
            ck.keys(fo, "final_output", &["primary_key", "columns"], &[]);
            final_output.primary_key = ck.strings(fo, "final_output", "primary_key");
            match fo.get("columns") {
                Some(Value::Array(cols)) => {
                    for (i, c) in cols.iter().enumerate() {
                        let path = format!("final_output.columns[{i}]");
                        let Some(obj) = c.as_object() else {
                            ck.push(path, "expected an object");
                            continue;
                        };
                        ck.keys(obj, &path, &["name", "role"], &["kind"]);
                        let name = ck.string(obj, &path, "name");
                        let role = match obj.get("role") {
                            Some(v) => match serde_json::from_value::<ColumnRole>(v.clone()) {
                                Ok(r) => r,
                                Err(_) => {
                                    ck.push(
                                        join(&path, "role"),
                                        "expected one of canonical, derived, helper, raw_snapshot",
                                    );
                                    ColumnRole::Canonical
                                }
                            },
                            None => ColumnRole::Canonical,
                        };
                        let kind = match obj.get("kind") {
                            None | Some(Value::Null) => None,
                            Some(Value::String(s)) => {
                                let k = CellKind::parse(s);
                                if k.is_none() {
                                    ck.push(join(&path, "kind"), format!("unknown kind `{s}`"));
                                }
                                k
                            }
                            Some(_) => {
                                ck.push(join(&path, "kind"), "expected a string");
                                None
                            }
                        };
                        final_output.columns.push(OutputColumn { name, role, kind });
                    }
                }
                Some(_) => ck.push("final_output.columns", "expected an array"),
                None => {}
            }
        }
        Some(_) => ck.push("final_output", "expected an object"),
        None => {}
    }

    if !ck.violations.is_empty() {
        return Err(PlanError::Schema(ck.violations));
    }
    Ok(TransformationPlan {
        table_id,
        strategy,
        steps,
        final_output,
    })
}
