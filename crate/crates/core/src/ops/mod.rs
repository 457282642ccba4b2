// SPDX-License-Identifier: Apache-2.0

//! The deterministic operator library and the plan executor.

mod apply;
pub mod custom;
mod exec;
pub mod expr;
pub mod params;

pub use apply::{
    apply_op, bin_index, cast_cell, one_hot_names, sanitize_category, sort_key_cmp, split_number,
    Applied, OpContext, OpError,
};
pub use custom::{roman_to_int, CodegenFallback, CustomCall, CustomRegistry};
pub use exec::{execute_plan, snapshot_name, ExecError, ExecPolicy, Execution, StepTrace, RAW_ROW_ID_COLUMN, ROW_ID_COLUMN};
pub use expr::{ConditionExpr, Conjunction, ExprError, MathExpr};
pub use params::{OpParams, ParamError};
