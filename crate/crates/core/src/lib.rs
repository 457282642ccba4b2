// SPDX-License-Identifier: Apache-2.0

//! Query-independent table canonicalization.
//!
//! Raw, semi-structured tables are rewritten once, by a validated
//! transformation plan, into a single SQL-ready canonical table that keeps
//! every original value recoverable. The crate covers ingestion and
//! serialization ([`table`]), the plan format and its static checks
//! ([`plan`]), the deterministic operator library and executor ([`ops`]),
//! hierarchy flattening and the losslessness audit ([`structure`]), the
//! language-model stages that probe tables and propose plans ([`llm`]), and
//! downstream answer scoring ([`qa`]).

pub mod dates;
pub mod llm;
pub mod ops;
pub mod plan;
pub mod qa;
pub mod structure;
pub mod table;

pub use table::{CellKind, CellValue, Column, ColumnRole, SchemaDescriptor, Table, TableError};
