// SPDX-License-Identifier: Apache-2.0

//! Hierarchy flattening and the losslessness guarantee.

mod audit;
mod flatten;

pub use audit::{
    audit_losslessness, make_lossless, recover_raw, status_counts, AuditError, ColumnAudit,
    ColumnStatus, LossAudit, Mismatch, RecoveryRule, RowAlignment, TemplatePart,
};
pub use flatten::{
    flatten_hierarchy, level_column, unflatten, FlattenError, FlattenMeta, HeaderNode,
    HierarchicalTable, RowNode, HEADER_JOIN,
};
