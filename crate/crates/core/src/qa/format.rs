// SPDX-License-Identifier: Apache-2.0

use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use crate::dates::rewrite_dates_iso;

const STRIPPED: [char; 3] = ['@', ';', '|'];

/// Upper bound on normalization passes. Every pass only shrinks or
/// canonicalizes text, so real inputs settle in one or two.
const MAX_PASSES: usize = 8;

static ROMAN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[IVX]+\b").unwrap());
static GROUPED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([+-]?)(\d{1,3}(?:,\d{3})+)(\.\d+)?$").unwrap());

const ROMAN_1_TO_20: [&str; 20] = [
    "I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI", "XII", "XIII", "XIV", "XV", "XVI", "XVII",
    "XVIII", "XIX", "XX",
];

/// Rewrites standalone uppercase numerals `I` through `XX` to digits.
pub fn rewrite_roman_numerals(text: &str) -> String {
    ROMAN
        .replace_all(text, |c: &regex::Captures<'_>| {
            let word = &c[0];
            match ROMAN_1_TO_20.iter().position(|r| *r == word) {
                Some(i) => (i + 1).to_string(),
                None => word.to_string(),
            }
        })
        .into_owned()
}

fn decomma_token(token: &str) -> String {
    match GROUPED.captures(token) {
        Some(c) => format!("{}{}{}", &c[1], c[2].replace(',', ""), c.get(3).map_or("", |m| m.as_str())),
        None => token.to_string(),
    }
}

fn one_pass(raw: &str) -> String {
    let nfc: String = raw.nfc().filter(|c| !STRIPPED.contains(c)).collect();
    let collapsed = nfc.split_whitespace().collect::<Vec<_>>().join(" ");
    let dated = rewrite_dates_iso(&collapsed);
    let roman = rewrite_roman_numerals(&dated);
    let lower = roman.to_lowercase();
    lower.split(' ').map(decomma_token).collect::<Vec<_>>().join(" ")
}

/// Surface normalization applied to answers before scoring.
///
/// One pass is: NFC, drop `@ ; |`, collapse whitespace, dates to ISO,
/// roman numerals I..XX to digits, lowercase, drop thousands separators in
/// numeric tokens. The pass repeats until nothing changes, so the result is
/// always a fixed point.
pub fn format_answer(raw: &str) -> String {
    let mut current = one_pass(raw);
    for _ in 1..MAX_PASSES {
        let next = one_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
    current
}
