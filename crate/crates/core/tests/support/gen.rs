// SPDX-License-Identifier: Apache-2.0

//! Seeded generators for raw tables and plans that fit them.
//!
//! Tables look like scraped web tables: grouped numbers, values with units,
//! dates in mixed layouts, year ranges, yes/no flags, labels with stray
//! whitespace, Roman numerals and blanks. Plans pick operators that apply to
//! the columns present at each point, so they pass validation.

use chrono::NaiveDate;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tablecanon::dates::DateLayout;
use tablecanon::plan::{FinalOutput, Operator, OutputColumn, PlanStep, TransformationPlan};
use tablecanon::table::{CellValue, Column, ColumnRole, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Count,
    Measure,
    Date,
    Range,
    YesNo,
    Label,
    Roman,
    Free,
    // Produced by steps.
    Number,
    Iso,
    Text,
    Flag,
}

const RAW_FLAVORS: [Flavor; 8] = [
    Flavor::Count,
    Flavor::Measure,
    Flavor::Date,
    Flavor::Range,
    Flavor::YesNo,
    Flavor::Label,
    Flavor::Roman,
    Flavor::Free,
];

const ROMANS: [&str; 20] = [
    "I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI", "XII", "XIII", "XIV", "XV", "XVI", "XVII",
    "XVIII", "XIX", "XX",
];

const LABELS: [&str; 8] = ["alpha", " beta", "gamma ", "Delta  x", "eps", "zeta\u{a0}", "eta", "theta"];
const WORDS: [&str; 10] = ["red", "green", "blue", "north", "south", "river", "stone", "(USA)", "St.", "de la"];

fn grouped(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn raw_cell(rng: &mut ChaCha8Rng, flavor: Flavor, layout: &DateLayout) -> String {
    if rng.random_bool(0.08) {
        return ["", "", "-", "n/a"].choose(rng).unwrap().to_string();
    }
    match flavor {
        Flavor::Count => {
            let n = rng.random_range(0..3_000_000u64);
            if rng.random_bool(0.6) {
                grouped(n)
            } else {
                n.to_string()
            }
        }
        Flavor::Measure => {
            let unit = ["km", "kg", "m", "%", "mi"].choose(rng).unwrap();
            let value = if rng.random_bool(0.5) {
                rng.random_range(0..5000).to_string()
            } else {
                format!("{}.{}", rng.random_range(0..100), rng.random_range(0..10))
            };
            let gap = if rng.random_bool(0.7) { " " } else { "" };
            format!("{value}{gap}{unit}")
        }
        Flavor::Date => {
            let d = NaiveDate::from_ymd_opt(rng.random_range(1950..2026), rng.random_range(1..=12), rng.random_range(1..=28))
                .unwrap();
            layout.format(d)
        }
        Flavor::Range => {
            let a = rng.random_range(1900..2020);
            format!("{a}-{}", a + rng.random_range(0..30))
        }
        Flavor::YesNo => ["Yes", "No"].choose(rng).unwrap().to_string(),
        Flavor::Label => LABELS.choose(rng).unwrap().to_string(),
        Flavor::Roman => ROMANS.choose(rng).unwrap().to_string(),
        Flavor::Free => {
            let n = rng.random_range(1..4);
            (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
        }
        _ => unreachable!("derived flavors are never generated raw"),
    }
}

/// A raw table of text cells with `rows <= 30` and `cols <= 10`.
pub fn random_table(rng: &mut ChaCha8Rng, id: &str) -> (Table, Vec<Flavor>) {
    let ncols = rng.random_range(1..=10);
    let nrows = rng.random_range(0..=30);
    let flavors: Vec<Flavor> = (0..ncols).map(|_| *RAW_FLAVORS.choose(rng).unwrap()).collect();
    let layouts = DateLayout::builtins();
    let col_layouts: Vec<DateLayout> = (0..ncols).map(|_| layouts.choose(rng).unwrap().clone()).collect();
    let columns = flavors
        .iter()
        .enumerate()
        .map(|(i, f)| Column::new(format!("{}_{i}", format!("{f:?}").to_lowercase())))
        .collect();
    let rows = (0..nrows)
        .map(|_| (0..ncols).map(|c| CellValue::text(raw_cell(rng, flavors[c], &col_layouts[c]))).collect())
        .collect();
    (Table::new(id, columns, rows).expect("generated table is well formed"), flavors)
}

struct Builder {
    cols: Vec<(String, Flavor)>,
    steps: Vec<PlanStep>,
    /// Columns written by each step, for dependency edges.
    written: Vec<Vec<String>>,
    has_row_id: bool,
}

impl Builder {
    fn of(&self, flavors: &[Flavor]) -> Vec<String> {
        self.cols.iter().filter(|(_, f)| flavors.contains(f)).map(|(n, _)| n.clone()).collect()
    }

    fn push(&mut self, step: PlanStep, structural: bool, new_cols: Vec<(String, Flavor)>) {
        let i = self.steps.len();
        let touched: Vec<&String> = step.reads.iter().chain(&step.writes).collect();
        let deps: Vec<String> = (0..i)
            .filter(|&j| structural || self.written[j].iter().any(|w| touched.contains(&w)))
            .map(|j| self.steps[j].step_id.clone())
            .collect();
        let mut step = step.depends_on(deps);
        step.step_id = format!("s{}", i + 1);
        step.description = format!("generated {}", step.op);
        self.written.push(step.writes.clone());
        self.steps.push(step);
        self.cols.extend(new_cols);
    }
}

fn pick(rng: &mut ChaCha8Rng, v: &[String]) -> Option<String> {
    v.choose(rng).cloned()
}

/// Tries to append one step; returns false when the drawn operator does
/// not apply to the current columns.
fn try_step(rng: &mut ChaCha8Rng, b: &mut Builder, row_changing: bool) -> bool {
    let i = b.steps.len() + 1;
    let choice = rng.random_range(0..22);
    let s = |op| PlanStep::new("", op);
    match choice {
        0 | 1 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Count, Flavor::Measure])) else { return false };
            let (num, unit) = (format!("{src}_num{i}"), format!("{src}_unit{i}"));
            let step = s(Operator::ParseNumber)
                .reads([src.clone()])
                .writes([num.clone(), unit.clone()])
                .param("source", json!(src))
                .param("target", json!(num))
                .param("unit_target", json!(unit));
            b.push(step, false, vec![(num, Flavor::Number), (unit, Flavor::Text)]);
        }
        2 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Date])) else { return false };
            let iso = format!("{src}_iso{i}");
            b.push(s(Operator::ParseDateText).reads([src]).writes([iso.clone()]), false, vec![(iso, Flavor::Iso)]);
        }
        3 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Range])) else { return false };
            let (a, z) = (format!("{src}_start{i}"), format!("{src}_end{i}"));
            let step = s(Operator::ExtractRegex)
                .reads([src])
                .writes([a.clone(), z.clone()])
                .param("pattern", json!("([0-9]{4})-([0-9]{4})"))
                .param("targets", json!({"1": a, "2": z}));
            b.push(step, false, vec![(a, Flavor::Text), (z, Flavor::Text)]);
        }
        4 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::YesNo])) else { return false };
            let flag = format!("{src}_flag{i}");
            let step = s(Operator::MapValues)
                .reads([src])
                .writes([flag.clone()])
                .param("mapping", json!({"Yes": true, "No": false}));
            b.push(step, false, vec![(flag, Flavor::Flag)]);
        }
        5 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Label, Flavor::Free])) else { return false };
            b.push(s(Operator::TrimWhitespace).reads([src.clone()]).writes([src]), false, vec![]);
        }
        6 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Count])) else { return false };
            let plain = format!("{src}_plain{i}");
            let step = s(Operator::ReplaceString)
                .reads([src])
                .writes([plain.clone()])
                .param("pattern", json!(","))
                .param("replacement", json!(""));
            b.push(step, false, vec![(plain, Flavor::Text)]);
        }
        7 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Number, Flavor::Text])) else { return false };
            let k = format!("{src}_cast{i}");
            let to = *["integer", "float", "text"].choose(rng).unwrap();
            let step = s(Operator::CastColumn).reads([src]).writes([k.clone()]).param("to", json!(to));
            b.push(step, false, vec![(k, if to == "text" { Flavor::Text } else { Flavor::Number })]);
        }
        8 => {
            let (expr, reads) = match rng.random_range(0..3) {
                0 => {
                    let Some(c) = pick(rng, &b.of(&[Flavor::Label, Flavor::Free, Flavor::Text])) else { return false };
                    (format!("len({c})"), vec![c])
                }
                1 => {
                    let Some(c) = pick(rng, &b.of(&[Flavor::Iso])) else { return false };
                    (format!("year({c})"), vec![c])
                }
                _ => {
                    let nums = b.of(&[Flavor::Number]);
                    let (Some(x), Some(y)) = (pick(rng, &nums), pick(rng, &nums)) else { return false };
                    let op = *["+", "-", "*", "/"].choose(rng).unwrap();
                    let reads = if x == y { vec![x.clone()] } else { vec![x.clone(), y.clone()] };
                    (format!("{x} {op} {y}"), reads)
                }
            };
            let m = format!("math{i}");
            let step = s(Operator::DeriveMath).reads(reads).writes([m.clone()]).param("expr", json!(expr));
            b.push(step, false, vec![(m, Flavor::Number)]);
        }
        9 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Label, Flavor::Free])) else { return false };
            let out = format!("cond{i}");
            let step = s(Operator::DeriveConditional)
                .reads([src.clone()])
                .writes([out.clone()])
                .param("rules", json!([{"condition": format!("{src} contains 'a'"), "value": true}]))
                .param("default", json!(false));
            b.push(step, false, vec![(out, Flavor::Flag)]);
        }
        10 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::YesNo])) else { return false };
            if b.steps.iter().any(|st| st.op == "one_hot" && st.reads == [src.clone()]) {
                return false;
            }
            let step = s(Operator::OneHot).reads([src.clone()]).writes([format!("{src}__*")]);
            b.push(step, false, vec![]);
        }
        11 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Number])) else { return false };
            let bin = format!("{src}_bin{i}");
            let step = s(Operator::BinNumeric)
                .reads([src])
                .writes([bin.clone()])
                .param("edges", json!([0, 100, 10000, 10000000]))
                .param("labels", json!(["small", "medium", "large"]));
            b.push(step, false, vec![(bin, Flavor::Text)]);
        }
        12 => {
            let pool = b.of(&[Flavor::Label, Flavor::Free, Flavor::Text, Flavor::Range]);
            let (Some(x), Some(y)) = (pick(rng, &pool), pick(rng, &pool)) else { return false };
            if x == y {
                return false;
            }
            let c = format!("combo{i}");
            let step = s(Operator::CombineColumns)
                .reads([x.clone(), y.clone()])
                .writes([c.clone()])
                .param("sources", json!([x, y]))
                .param("separator", json!(" | "));
            b.push(step, false, vec![(c, Flavor::Text)]);
        }
        13 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Label, Flavor::Free])) else { return false };
            let step = s(Operator::FillnaStatic).reads([src.clone()]).writes([src]).param("value", json!("none"));
            b.push(step, false, vec![]);
        }
        14 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Label, Flavor::Free, Flavor::Roman])) else { return false };
            let rule = *["forward_fill", "backward_fill", "column_mode"].choose(rng).unwrap();
            let step = s(Operator::FillnaDynamic).reads([src.clone()]).writes([src]).param("rule", json!(rule));
            b.push(step, false, vec![]);
        }
        15 => {
            if b.has_row_id {
                return false;
            }
            b.has_row_id = true;
            b.push(s(Operator::AddRowId).writes(["_row_id"]), false, vec![("_row_id".into(), Flavor::Number)]);
        }
        16 => {
            let Some(old) = pick(rng, &b.cols.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()) else { return false };
            if old == "_row_id" {
                return false;
            }
            let new = format!("{old}_r{i}");
            let step = s(Operator::Rename).reads([old.clone()]).writes([new.clone()]).param("mapping", json!({ old.clone(): new.clone() }));
            let pos = b.cols.iter().position(|(n, _)| *n == old).unwrap();
            let flavor = b.cols[pos].1;
            b.push(step, true, vec![]);
            b.cols[pos] = (new, flavor);
        }
        17 => {
            if b.cols.len() < 2 {
                return false;
            }
            let mut keep: Vec<(String, Flavor)> = b.cols.clone();
            keep.shuffle(rng);
            keep.truncate(rng.random_range(1..b.cols.len()));
            let names: Vec<String> = keep.iter().map(|(n, _)| n.clone()).collect();
            let step = s(Operator::Select).reads(names.clone()).param("columns", json!(names));
            b.push(step, true, vec![]);
            b.cols = keep;
        }
        18 => {
            let Some(by) = pick(rng, &b.cols.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()) else { return false };
            let step = s(Operator::Sort).reads([by.clone()]).param("by", json!([by])).param("ascending", json!(rng.random_bool(0.5)));
            b.push(step, true, vec![]);
        }
        19 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Label, Flavor::Free, Flavor::Count])) else { return false };
            let step = s(Operator::ReplaceValue)
                .reads([src.clone()])
                .writes([src])
                .param("from", json!(["-", "n/a"]))
                .param("to", json!(null));
            b.push(step, false, vec![]);
        }
        20 => {
            let Some(src) = pick(rng, &b.of(&[Flavor::Roman])) else { return false };
            let v = format!("{src}_val{i}");
            let step = s(Operator::Custom).reads([src]).writes([v.clone()]).param("name", json!("roman_to_int"));
            b.push(step, false, vec![(v, Flavor::Number)]);
        }
        _ => {
            if !row_changing {
                return false;
            }
            if rng.random_bool(0.5) {
                let Some(src) = pick(rng, &b.of(&[Flavor::Number])) else { return false };
                let step = s(Operator::FilterRows).reads([src.clone()]).param("condition", json!(format!("{src} > 100")));
                b.push(step, true, vec![]);
            } else {
                let Some(src) = pick(rng, &b.cols.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()) else { return false };
                let step = s(Operator::DeduplicateRows).reads([src.clone()]).param("subset", json!([src]));
                b.push(step, true, vec![]);
            }
        }
    }
    true
}

pub struct Pair {
    pub raw: Table,
    pub plan: TransformationPlan,
}

/// A random (table, plan) pair. Plans have at most eight steps; with
/// `row_changing` they may filter or deduplicate rows.
pub fn random_pair(seed: u64, row_changing: bool) -> Pair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = format!("gen{seed}");
    let (raw, flavors) = random_table(&mut rng, &id);
    let mut b = Builder {
        cols: raw.columns.iter().map(|c| c.name.clone()).zip(flavors).collect(),
        steps: Vec::new(),
        written: Vec::new(),
        has_row_id: false,
    };
    let target = rng.random_range(0..=8);
    let mut attempts = 0;
    while b.steps.len() < target && attempts < 200 {
        attempts += 1;
        try_step(&mut rng, &mut b, row_changing);
    }
    let mut plan = TransformationPlan::empty(id);
    plan.strategy = "generated".into();
    plan.steps = b.steps;
    if rng.random_bool(0.3) && !b.cols.is_empty() {
        // Promise an explicit output: every surviving column, derived ones tagged.
        plan.final_output = FinalOutput {
            primary_key: Vec::new(),
            columns: b
                .cols
                .iter()
                .map(|(n, f)| OutputColumn {
                    name: n.clone(),
                    role: if RAW_FLAVORS.contains(f) { ColumnRole::Canonical } else { ColumnRole::Derived },
                    kind: None,
                })
                .collect(),
        };
    }
    Pair { raw, plan }
}
