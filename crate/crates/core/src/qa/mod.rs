// SPDX-License-Identifier: Apache-2.0

//! Downstream question answering: response parsing, answer normalization,
//! F1 scoring and annotator agreement.

mod agreement;
mod format;
mod response;
mod score;
mod stats;

pub use agreement::{cohen_kappa, fleiss_kappa, jaccard_agreement, Agreement, AgreementError};
pub use format::{format_answer, rewrite_roman_numerals};
pub use response::{parse_qa_response, QaParseError, QaResponse, SqlPlan};
pub use score::{answer_text, compute_f1, compute_f1_with, f1_from_counts, mean_f1, EvalRecord, MatchMode};
pub use stats::{challenge_stats, ChallengeReport, DimensionStats, QuestionMeta, TypeShare};
