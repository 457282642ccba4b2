// SPDX-License-Identifier: Apache-2.0

//! Model-driven stages: probing a raw table for deficiencies, proposing a
//! transformation plan, optional code generation for custom steps, and
//! answering questions over the canonical table.

pub mod cache;
pub mod codegen;
pub mod config;
pub mod ledger;
pub mod pipeline;
pub mod probe;
pub mod prompts;
pub mod provider;
pub mod retry;

pub use cache::{ArtifactCache, CacheEntry, CacheError};
pub use config::{Stage, StageConfig, StageConfigs};
pub use ledger::TokenLedger;
pub use pipeline::{CacheStatus, Pipeline, PipelineError, PipelineOptions, PreprocessOutcome, QaOutcome, TableInput};
pub use probe::{parse_probe_response, Issue, Probe, ProbeArtifact, ProbeError};
pub use prompts::{build_stage_prompt, PromptError, PromptExtras};
pub use provider::{Completion, MockProvider, ProviderClient, ProviderError, RecordingProvider, ReplayProvider, TokenUsage};
pub use retry::{run_stage_with_retry, Clock, FakeClock, RetryError, StageOutput, SystemClock};
