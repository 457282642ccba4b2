// SPDX-License-Identifier: Apache-2.0

use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

use super::config::StageConfig;
use super::provider::{Completion, ProviderClient, ProviderError, TokenUsage};

/// Where retry sleeps go. Tests substitute [`FakeClock`].
pub trait Clock: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// Records requested sleeps and returns immediately.
#[derive(Debug, Default)]
pub struct FakeClock {
    sleeps: Mutex<Vec<Duration>>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().expect("fake clock").clone()
    }

    pub fn elapsed(&self) -> Duration {
        self.sleeps().iter().sum()
    }
}

impl Clock for FakeClock {
    fn sleep(&self, duration: Duration) {
        self.sleeps.lock().expect("fake clock").push(duration);
    }
}

/// Delay after failed attempt `k` (1-based): `initial * 2^(k-1)` seconds.
pub fn backoff_delay(cfg: &StageConfig, attempt: u32) -> Duration {
    Duration::from_secs_f64(cfg.initial_delay * 2f64.powi(attempt.saturating_sub(1) as i32))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub completion: Completion,
    pub attempts: u32,
    /// Tokens over every attempt, including failed ones that reported usage.
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetryError {
    #[error("attempt {attempt} failed permanently: {error}")]
    Permanent { attempt: u32, error: ProviderError, usage: TokenUsage },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: ProviderError, usage: TokenUsage },
}

impl RetryError {
    pub fn usage(&self) -> TokenUsage {
        match self {
            RetryError::Permanent { usage, .. } | RetryError::Exhausted { usage, .. } => *usage,
        }
    }
}

/// Calls the provider up to `cfg.retries` times, sleeping
/// `initial_delay * 2^(k-1)` after the k-th transient failure. There is no
/// sleep after the final attempt. Permanent errors stop at once.
pub fn run_stage_with_retry(
    client: &dyn ProviderClient,
    prompt: &str,
    cfg: &StageConfig,
    clock: &dyn Clock,
) -> Result<StageOutput, RetryError> {
    let attempts = cfg.retries.max(1);
    let mut usage = TokenUsage::default();
    let mut attempt = 1;
    loop {
        match client.complete(prompt, cfg) {
            Ok(completion) => {
                usage += completion.usage;
                return Ok(StageOutput { completion, attempts: attempt, usage });
            }
            Err(error) => {
                if let Some(u) = error.usage() {
                    usage += u;
                }
                if !error.is_transient() {
                    return Err(RetryError::Permanent { attempt, error, usage });
                }
                if attempt == attempts {
                    return Err(RetryError::Exhausted { attempts, last: error, usage });
                }
                log::warn!("{} stage attempt {attempt} failed: {error}; retrying", cfg.stage);
                clock.sleep(backoff_delay(cfg, attempt));
                attempt += 1;
            }
        }
    }
}
