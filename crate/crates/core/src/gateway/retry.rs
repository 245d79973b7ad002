use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;

use super::GatewayError;

/// Exponential backoff with full jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(500),
            factor: 2,
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the sleep before retry number `attempt` (0-based).
    pub fn ceiling(&self, attempt: u32) -> Duration {
        let mult = (self.factor as u64).saturating_pow(attempt);
        let ms = (self.base.as_millis() as u64).saturating_mul(mult);
        Duration::from_millis(ms).min(self.max_delay)
    }

    /// Uniform draw in `[0, ceiling(attempt)]`.
    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let cap = self.ceiling(attempt).as_millis() as u64;
        Duration::from_millis(rng.random_range(0..=cap))
    }
}

/// Timeouts, 429 and 5xx are retried; every other failure is final.
pub fn is_retryable(err: &GatewayError) -> bool {
    match err {
        GatewayError::ProviderTimeout => true,
        GatewayError::ProviderHttp { status, .. } => *status == 429 || (500..600).contains(status),
        _ => false,
    }
}

#[async_trait]
pub trait Sleeper: Send + Sync {
    async fn sleep(&self, d: Duration);
}

pub struct TokioSleeper;

#[async_trait]
impl Sleeper for TokioSleeper {
    async fn sleep(&self, d: Duration) {
        tokio::time::sleep(d).await
    }
}
