// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

/// The operator vocabulary a plan step may name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    AddRowId,
    Rename,
    Select,
    ParseDateText,
    ParseNumber,
    ExtractRegex,
    DeriveConditional,
    DeriveMath,
    MapValues,
    ReplaceValue,
    ReplaceString,
    CastColumn,
    FillnaStatic,
    FillnaDynamic,
    CombineColumns,
    TrimWhitespace,
    FilterRows,
    Sort,
    DeduplicateRows,
    KeepRawSnapshot,
    BinNumeric,
    OneHot,
    Custom,
}

impl Operator {
    pub const ALL: [Operator; 23] = [
        Operator::AddRowId,
        Operator::Rename,
        Operator::Select,
        Operator::ParseDateText,
        Operator::ParseNumber,
        Operator::ExtractRegex,
        Operator::DeriveConditional,
        Operator::DeriveMath,
        Operator::MapValues,
        Operator::ReplaceValue,
        Operator::ReplaceString,
        Operator::CastColumn,
        Operator::FillnaStatic,
        Operator::FillnaDynamic,
        Operator::CombineColumns,
        Operator::TrimWhitespace,
        Operator::FilterRows,
        Operator::Sort,
        Operator::DeduplicateRows,
        Operator::KeepRawSnapshot,
        Operator::BinNumeric,
        Operator::OneHot,
        Operator::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::AddRowId => "add_row_id",
            Operator::Rename => "rename",
            Operator::Select => "select",
            Operator::ParseDateText => "parse_date_text",
            Operator::ParseNumber => "parse_number",
            Operator::ExtractRegex => "extract_regex",
            Operator::DeriveConditional => "derive_conditional",
            Operator::DeriveMath => "derive_math",
            Operator::MapValues => "map_values",
            Operator::ReplaceValue => "replace_value",
            Operator::ReplaceString => "replace_string",
            Operator::CastColumn => "cast_column",
            Operator::FillnaStatic => "fillna_static",
            Operator::FillnaDynamic => "fillna_dynamic",
            Operator::CombineColumns => "combine_columns",
            Operator::TrimWhitespace => "trim_whitespace",
            Operator::FilterRows => "filter_rows",
            Operator::Sort => "sort",
            Operator::DeduplicateRows => "deduplicate_rows",
            Operator::KeepRawSnapshot => "keep_raw_snapshot",
            Operator::BinNumeric => "bin_numeric",
            Operator::OneHot => "one_hot",
            Operator::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        Operator::ALL.iter().copied().find(|op| op.name() == name)
    }

    /// Operators allowed to declare a column in both `reads` and `writes`.
    pub fn in_place_allowed(self) -> bool {
        matches!(
            self,
            Operator::TrimWhitespace
                | Operator::ReplaceValue
                | Operator::ReplaceString
                | Operator::FillnaStatic
                | Operator::FillnaDynamic
                | Operator::MapValues
                | Operator::Custom
        )
    }

    /// Operators whose output may have a different number of rows.
    pub fn changes_row_count(self) -> bool {
        matches!(self, Operator::FilterRows | Operator::DeduplicateRows)
    }

    /// Operators that act on the whole table rather than on a view of their
    /// declared reads.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            Operator::Rename
                | Operator::Select
                | Operator::Sort
                | Operator::FilterRows
                | Operator::DeduplicateRows
        )
    }

    /// Parameter signature shown to planners.
    pub fn signature(self) -> &'static str {
        match self {
            Operator::AddRowId => r#"{"name": "_row_id"} - adds 0-based sequential row ids"#,
            Operator::Rename => r#"{"mapping": {"old": "new"}}"#,
            Operator::Select => r#"{"columns": [..]} - keep these columns, in this order"#,
            Operator::ParseDateText => r#"{"source", "target", "formats"?: ["%d %B %Y"]} - writes ISO dates"#,
            Operator::ParseNumber => r#"{"source", "target", "unit_target"?, "pattern"?: "[0-9,]+(\\.[0-9]+)?"}"#,
            Operator::ExtractRegex => r#"{"source", "pattern", "targets": {"1": "col_a", "2": "col_b"}}"#,
            Operator::DeriveConditional => r#"{"rules": [{"condition": "col contains 'x'", "value": v}], "default"?, "target"}"#,
            Operator::DeriveMath => r#"{"expr": "year(col)" | "len(col)" | "col_a + col_b", "target"}"#,
            Operator::MapValues => r#"{"source", "target"?, "mapping": {"Yes": true}, "strict"?: false}"#,
            Operator::ReplaceValue => r#"{"source", "target"?, "from": "n/a" | ["-", "?"], "to": null}"#,
            Operator::ReplaceString => r#"{"source", "target"?, "pattern", "replacement", "regex"?: false}"#,
            Operator::CastColumn => r#"{"source", "target", "to": "integer|float|boolean|text|date", "strict"?: false}"#,
            Operator::FillnaStatic => r#"{"columns": [..], "value"}"#,
            Operator::FillnaDynamic => r#"{"columns": [..], "rule": "forward_fill|backward_fill|column_mean|column_mode"}"#,
            Operator::CombineColumns => r#"{"sources": [..], "target", "separator"?: " "}"#,
            Operator::TrimWhitespace => r#"{"columns": [..]}"#,
            Operator::FilterRows => r#"{"condition": "col > 5"}"#,
            Operator::Sort => r#"{"by": [..], "ascending"?: true | [bool]}"#,
            Operator::DeduplicateRows => r#"{"subset"?: [..]} - keeps the first occurrence"#,
            Operator::KeepRawSnapshot => r#"{"source"} - copies into <source>_raw"#,
            Operator::BinNumeric => r#"{"source", "target", "edges": [0, 10, 20], "labels"?: [..]}"#,
            Operator::OneHot => r#"{"source", "max_categories"?: 64} - writes <source>__<value> booleans"#,
            Operator::Custom => r#"{"name", "args"?} - registered deterministic function"#,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Renders the vocabulary block embedded in the planner prompt.
pub fn vocabulary_block() -> String {
    let mut out = String::from("TRANSFORMATION OPERATIONS (name: params)\n");
    for op in Operator::ALL {
        out.push_str("- ");
        out.push_str(op.name());
        out.push_str(": ");
        out.push_str(op.signature());
        out.push('\n');
    }
    out
}
