// SPDX-License-Identifier: Apache-2.0

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The labeled lines of a `<sql_plan>` block. Placeholders such as
/// `[filter condition if applicable]`, `none` or `N/A` count as absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlPlan {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(rename = "where", skip_serializing_if = "Option::is_none")]
    pub where_clause: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_by: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaResponse {
    pub reasoning: String,
    pub answer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql_plan: Option<SqlPlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QaParseError {
    #[error("response has no <answer> block")]
    MissingAnswer,
}

static OPEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<\s*(reasoning|answer|sql_plan)\s*>").unwrap());
static CLOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<\s*/\s*(reasoning|answer|sql_plan)\s*>").unwrap());
static PLAN_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(select|from|where|order\s+by|aggregation)\s*:\s*(.*?)\s*$").unwrap());

/// Finds every `<tag>...</tag>` block for `tag`. The body of a block runs to
/// the first closing tag after the opener, so a nested opener ends up inside
/// the body and is reported by the caller. An opener without a closer takes
/// the rest of the text.
fn blocks<'a>(text: &'a str, tag: &str) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(open) = OPEN.captures_at(text, pos) {
        let whole = open.get(0).unwrap();
        if !open[1].eq_ignore_ascii_case(tag) {
            pos = whole.end();
            continue;
        }
        let body_start = whole.end();
        let close = CLOSE
            .captures_iter(&text[body_start..])
            .find(|c| c[1].eq_ignore_ascii_case(tag))
            .map(|c| c.get(0).unwrap());
        match close {
            Some(c) => {
                out.push(&text[body_start..body_start + c.start()]);
                pos = body_start + c.end();
            }
            None => {
                out.push(&text[body_start..]);
                break;
            }
        }
    }
    out
}

fn strip_tags(body: &str, tag: &str) -> String {
    let open = OPEN.replace_all(body, |c: &regex::Captures<'_>| {
        if c[1].eq_ignore_ascii_case(tag) { String::new() } else { c[0].to_string() }
    });
    CLOSE
        .replace_all(&open, |c: &regex::Captures<'_>| {
            if c[1].eq_ignore_ascii_case(tag) { String::new() } else { c[0].to_string() }
        })
        .into_owned()
}

fn is_placeholder(value: &str) -> bool {
    let v = value.trim();
    v.is_empty()
        || (v.starts_with('[') && v.ends_with(']'))
        || ["none", "n/a", "na", "-", "null"].contains(&v.to_ascii_lowercase().as_str())
}

fn parse_sql_plan(body: &str) -> SqlPlan {
    let mut plan = SqlPlan::default();
    for line in body.lines() {
        let Some(c) = PLAN_LINE.captures(line) else { continue };
        let value = c[2].to_string();
        if is_placeholder(&value) {
            continue;
        }
        let key = c[1].to_ascii_lowercase();
        let slot = match key.split_whitespace().next().unwrap_or("") {
            "select" => &mut plan.select,
            "from" => &mut plan.from,
            "where" => &mut plan.where_clause,
            "order" => &mut plan.order_by,
            _ => &mut plan.aggregation,
        };
        slot.get_or_insert(value);
    }
    plan
}

/// Splits a model reply into reasoning, answer and SQL sketch.
///
/// Tags match case-insensitively. The first `<answer>` block wins; extra or
/// nested answer tags are dropped and noted in `warnings`.
pub fn parse_qa_response(text: &str) -> Result<QaResponse, QaParseError> {
    let mut warnings = Vec::new();
    let answers = blocks(text, "answer");
    let first = answers.first().ok_or(QaParseError::MissingAnswer)?;
    if answers.len() > 1 {
        warnings.push(format!("{} answer blocks found, using the first", answers.len()));
    }
    if OPEN.captures_iter(first).chain(CLOSE.captures_iter(first)).any(|c| c[1].eq_ignore_ascii_case("answer")) {
        warnings.push("nested answer tag removed from the answer".to_string());
    }
    let answer = strip_tags(first, "answer").trim().to_string();
    let reasoning = blocks(text, "reasoning").first().map(|b| b.trim().to_string()).unwrap_or_default();
    let sql_plan = blocks(text, "sql_plan").first().map(|b| parse_sql_plan(b));
    Ok(QaResponse { reasoning, answer, sql_plan, warnings })
}
