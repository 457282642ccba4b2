// SPDX-License-Identifier: Apache-2.0

//! Command-line surface. Machine-readable output goes to stdout, logs and
//! diagnostics to stderr.

mod commands;
mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;

/// Process exit statuses. They are part of the interface.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const PROVIDER: i32 = 3;
    pub const MISSING_PREREQ: i32 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Live,
    Replay,
    Mock,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Model backend.
    #[arg(long, value_enum, default_value = "mock", global = true)]
    pub provider: ProviderKind,
    /// Transcript to replay (replay) or append to (live, optional).
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
    /// JSON object of canned replies per stage for the mock provider.
    #[arg(long, global = true)]
    pub mock_responses: Option<PathBuf>,
    #[arg(long, default_value = ".tablecanon-cache", global = true, env = "TABLECANON_CACHE")]
    pub cache_dir: PathBuf,
    /// TOML or JSON stage overrides.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub allow_row_change: bool,
    /// Let the model write pandas code for unregistered custom steps.
    #[arg(long, global = true)]
    pub enable_codegen_fallback: bool,
    /// Rows serialized into prompts.
    #[arg(long, default_value_t = tablecanon::table::DEFAULT_MAX_ROWS, global = true)]
    pub max_rows: usize,
    /// Worker threads for batch commands; 0 means one per CPU.
    #[arg(long, default_value_t = 0, global = true)]
    pub workers: usize,
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Parser)]
#[command(name = "tablecanon", version, about = "Query-independent table canonicalization")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a table (.csv, .md, or hierarchical .json) and describe it.
    Ingest {
        table: PathBuf,
        #[arg(long)]
        table_id: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run the probe stage and print the probe artifact.
    Probe {
        table: PathBuf,
        #[arg(long)]
        table_id: Option<String>,
    },
    /// Run the probe and plan stages and print the plan.
    Plan {
        table: PathBuf,
        #[arg(long)]
        table_id: Option<String>,
        /// Reuse a probe artifact instead of running the probe stage.
        #[arg(long)]
        probes: Option<PathBuf>,
    },
    /// Check a plan against a table and print the policy report.
    Validate {
        plan: PathBuf,
        table: PathBuf,
        #[arg(long)]
        table_id: Option<String>,
    },
    /// Execute a plan (or generate one with --auto) and write the artifacts.
    Transform {
        /// Table file; omit with --all.
        table: Option<PathBuf>,
        #[arg(long, conflicts_with = "auto")]
        plan: Option<PathBuf>,
        /// Probe and plan with the configured provider.
        #[arg(long)]
        auto: bool,
        /// Transform every table file in a directory (implies --auto).
        #[arg(long, conflicts_with_all = ["table", "plan"])]
        all: Option<PathBuf>,
        #[arg(long)]
        table_id: Option<String>,
        /// Directory for canonical.csv, trace.json and audit.json; defaults
        /// to `out/<table_id>`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Audit a plan's output and check that the raw table can be rebuilt.
    VerifyLossless {
        table: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        table_id: Option<String>,
    },
    /// Print SQL for a cached canonical table.
    ExportSql {
        table_id: String,
        #[arg(long)]
        table_name: Option<String>,
    },
    /// Answer a question over a cached canonical table.
    Qa { table_id: String, question: String },
    /// Score predictions against gold answers.
    Eval {
        predictions: PathBuf,
        gold: PathBuf,
        /// Compare whole list elements instead of tokens.
        #[arg(long)]
        exact_element: bool,
        /// JSONL of `{id, labels}` with one label (or label set) per rater.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Write per-record results as JSONL here.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Print the effective stage configuration.
    Config,
    #[command(subcommand)]
    Cache(CacheCommand),
    /// Print the token ledger.
    Ledger {
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheCommand {
    /// List cached table ids.
    List,
    /// Remove one table's cache directory, or the whole cache.
    Clear { table_id: Option<String> },
}
