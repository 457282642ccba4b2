// SPDX-License-Identifier: Apache-2.0

//! Transformation plans: the JSON wire format, dependency ordering and the
//! static checks run before anything executes.

mod catalog;
mod model;
mod topo;
mod validate;

use thiserror::Error;

pub use catalog::{vocabulary_block, Operator};
pub use model::{
    parse_plan, plan_from_value, FinalOutput, OutputColumn, PlanStep, SchemaViolation,
    TransformationPlan,
};
pub(crate) use topo::StepGraph;
pub use topo::topo_order;
pub use validate::{
    validate_plan, validate_plan_with, Finding, PolicyReport, Severity, ValidateOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid JSON at line {line}, column {column} (byte {offset}): {message}")]
    Syntax {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("plan does not match the schema: {}", format_violations(.0))]
    Schema(Vec<SchemaViolation>),
    #[error("step `{step_id}` depends on unknown step `{dependency}`")]
    UnknownDependency { step_id: String, dependency: String },
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

fn format_violations(v: &[SchemaViolation]) -> String {
    v.iter()
        .map(|x| format!("{}: {}", x.path, x.message))
        .collect::<Vec<_>>()
        .join("; ")
}
