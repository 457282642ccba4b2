// SPDX-License-Identifier: Apache-2.0

//! Free-text date recognition and the matching formatters used to invert it.

use std::sync::LazyLock;

use chrono::{Datelike, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Serialize};

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

/// Month number for a full or abbreviated English month name.
pub fn month_from_name(name: &str) -> Option<u32> {
    let lower = name.to_ascii_lowercase();
    if lower == "sept" {
        return Some(9);
    }
    MONTHS
        .iter()
        .position(|m| *m == lower || (lower.len() == 3 && m.starts_with(&lower)))
        .map(|i| i as u32 + 1)
}

static ISO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})[-/](\d{1,2})[-/](\d{1,2})$").unwrap());
static MONTH_FIRST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^([a-z]+)\.?\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})$").unwrap()
});
static DAY_FIRST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^(\d{1,2})(?:st|nd|rd|th)?\s+(?:of\s+)?([a-z]+)\.?,?\s+(\d{4})$").unwrap()
});
static SLASH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,2})/(\d{1,2})/(\d{4})$").unwrap());

/// How an ambiguous `a/b/YYYY` date is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlashOrder {
    #[default]
    MonthFirst,
    DayFirst,
}

/// Column-global slash rule: day-first as soon as any cell has a leading
/// component above 12, month-first otherwise.
pub fn slash_order<'a>(cells: impl IntoIterator<Item = &'a str>) -> SlashOrder {
    for c in cells {
        if let Some(caps) = SLASH.captures(c.trim()) {
            let first: u32 = caps[1].parse().unwrap_or(0);
            if first > 12 {
                return SlashOrder::DayFirst;
            }
        }
    }
    SlashOrder::MonthFirst
}

fn ymd(y: &str, m: u32, d: &str) -> Option<NaiveDate> {
    NaiveDate::from_ymd_opt(y.parse().ok()?, m, d.parse().ok()?)
}

/// Recognizes one date: explicit strftime `formats` first, in order, then
/// the built-in patterns.
pub fn parse_date(text: &str, formats: &[String], slash: SlashOrder) -> Option<NaiveDate> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    for f in formats {
        if let Ok(d) = NaiveDate::parse_from_str(s, f) {
            return Some(d);
        }
    }
    parse_builtin(s, slash)
}

fn parse_builtin(s: &str, slash: SlashOrder) -> Option<NaiveDate> {
    if let Some(c) = ISO.captures(s) {
        return ymd(&c[1], c[2].parse().ok()?, &c[3]);
    }
    if let Some(c) = MONTH_FIRST.captures(s) {
        return ymd(&c[3], month_from_name(&c[1])?, &c[2]);
    }
    if let Some(c) = DAY_FIRST.captures(s) {
        return ymd(&c[3], month_from_name(&c[2])?, &c[1]);
    }
    if let Some(c) = SLASH.captures(s) {
        let (a, b): (u32, u32) = (c[1].parse().ok()?, c[2].parse().ok()?);
        let (m, d) = match slash {
            SlashOrder::MonthFirst => (a, b),
            SlashOrder::DayFirst => (b, a),
        };
        return NaiveDate::from_ymd_opt(c[3].parse().ok()?, m, d);
    }
    None
}

static EMBEDDED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"(?i)\b(?:",
        r"(?P<m1>[a-z]+)\.?\s+(?P<d1>\d{1,2})(?:st|nd|rd|th)?,?\s+(?P<y1>\d{4})",
        r"|(?P<d2>\d{1,2})(?:st|nd|rd|th)?\s+(?:of\s+)?(?P<m2>[a-z]+)\.?,?\s+(?P<y2>\d{4})",
        r"|(?P<a3>\d{1,2})/(?P<b3>\d{1,2})/(?P<y3>\d{4})",
        r")\b"
    ))
    .unwrap()
});

/// Rewrites every recognizable date inside `text` to `YYYY-MM-DD`.
/// Slash dates read month-first unless the first component exceeds 12.
pub fn rewrite_dates_iso(text: &str) -> String {
    EMBEDDED
        .replace_all(text, |c: &regex::Captures<'_>| {
            let whole = c.get(0).map_or("", |m| m.as_str()).to_string();
            let date = if let (Some(m), Some(d), Some(y)) = (c.name("m1"), c.name("d1"), c.name("y1")) {
                month_from_name(m.as_str()).and_then(|mo| ymd(y.as_str(), mo, d.as_str()))
            } else if let (Some(d), Some(m), Some(y)) = (c.name("d2"), c.name("m2"), c.name("y2")) {
                month_from_name(m.as_str()).and_then(|mo| ymd(y.as_str(), mo, d.as_str()))
            } else if let (Some(a), Some(b), Some(y)) = (c.name("a3"), c.name("b3"), c.name("y3")) {
                let a: u32 = a.as_str().parse().unwrap_or(0);
                let b: u32 = b.as_str().parse().unwrap_or(0);
                let (m, d) = if a > 12 { (b, a) } else { (a, b) };
                y.as_str()
                    .parse()
                    .ok()
                    .and_then(|y| NaiveDate::from_ymd_opt(y, m, d))
            } else {
                None
            };
            date.map(crate::table::format_date).unwrap_or(whole)
        })
        .into_owned()
}

/// A concrete textual layout for a date, used to rebuild source text from a
/// parsed date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum DateLayout {
    /// `2018-01-05`
    Iso,
    /// `2018/01/05`
    IsoSlash,
    /// `January 5, 2018` / `Jan 5, 2018`
    MonthDayYear { abbreviated: bool, comma: bool },
    /// `5 January 2018` / `5th January 2018`
    DayMonthYear { abbreviated: bool, ordinal: bool },
    /// `1/5/2018` or `05/01/2018`
    Slash { day_first: bool, padded: bool },
    Strftime { format: String },
}

fn ordinal_suffix(day: u32) -> &'static str {
    match (day % 10, day % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    }
}

fn month_name(m: u32, abbreviated: bool) -> String {
    let full = MONTHS[(m - 1) as usize];
    let name = if abbreviated { &full[..3] } else { full };
    let mut out = name[..1].to_ascii_uppercase();
    out.push_str(&name[1..]);
    out
}

impl DateLayout {
    pub fn format(&self, d: NaiveDate) -> String {
        let (y, m, day) = (d.year(), d.month(), d.day());
        match self {
            DateLayout::Iso => format!("{y:04}-{m:02}-{day:02}"),
            DateLayout::IsoSlash => format!("{y:04}/{m:02}/{day:02}"),
            DateLayout::MonthDayYear { abbreviated, comma } => format!(
                "{} {day}{} {y}",
                month_name(m, *abbreviated),
                if *comma { "," } else { "" }
            ),
            DateLayout::DayMonthYear { abbreviated, ordinal } => format!(
                "{day}{} {} {y}",
                if *ordinal { ordinal_suffix(day) } else { "" },
                month_name(m, *abbreviated)
            ),
            DateLayout::Slash { day_first, padded } => {
                let (a, b) = if *day_first { (day, m) } else { (m, day) };
                if *padded {
                    format!("{a:02}/{b:02}/{y}")
                } else {
                    format!("{a}/{b}/{y}")
                }
            }
            DateLayout::Strftime { format } => d.format(format).to_string(),
        }
    }

    /// Every built-in layout, in a fixed order.
    pub fn builtins() -> Vec<DateLayout> {
        let mut v = vec![DateLayout::Iso, DateLayout::IsoSlash];
        for abbreviated in [false, true] {
            for comma in [true, false] {
                v.push(DateLayout::MonthDayYear { abbreviated, comma });
            }
        }
        for abbreviated in [false, true] {
            for ordinal in [false, true] {
                v.push(DateLayout::DayMonthYear { abbreviated, ordinal });
            }
        }
        for day_first in [false, true] {
            for padded in [false, true] {
                v.push(DateLayout::Slash { day_first, padded });
            }
        }
        v
    }
}
