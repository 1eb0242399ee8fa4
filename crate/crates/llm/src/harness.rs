use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, Semaphore};

use structamp_core::predictors::prompt::Message;

use crate::backend::{ChatParams, ChatReply, HttpBackend};
use crate::cache::{new_entry, Attempt, ResponseCache};
use crate::LlmError;

/// Scheduling and resilience settings shared by every call of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Ceiling on simultaneous in-flight requests.
    pub max_concurrency: usize,
    /// Token-bucket refill rate; `None` disables rate limiting.
    pub requests_per_second: Option<f64>,
    pub burst: u32,
    /// Re-sends after a network error, 5xx or 429.
    pub transport_retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Hard cap on HTTP requests per harness.
    pub request_budget: Option<u64>,
    /// Re-query prompts whose cached attempts were all rejected.
    pub retry_failed: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_concurrency: 8,
            requests_per_second: None,
            burst: 1,
            transport_retries: 3,
            backoff_ms: 250,
            timeout_secs: 120,
            request_budget: None,
            retry_failed: false,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_concurrency == 0 {
            out.push("max_concurrency must be >= 1".to_string());
        }
        if let Some(r) = self.requests_per_second {
            if !(r > 0.0 && r.is_finite()) {
                out.push(format!("requests_per_second must be > 0, got {r}"));
            }
        }
        if self.burst == 0 {
            out.push("burst must be >= 1".to_string());
        }
        out
    }
}

/// Counters over the harness lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// HTTP requests actually sent.
    pub requests: u64,
    /// Calls answered from the cache.
    pub cache_hits: u64,
    /// Re-queries after a rejected reply.
    pub retries: u64,
    /// Calls whose every attempt was rejected.
    pub failed_calls: u64,
}

#[derive(Default)]
struct Counters {
    requests: AtomicU64,
    cache_hits: AtomicU64,
    retries: AtomicU64,
    failed_calls: AtomicU64,
}

struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64, burst: u32) -> Self {
        let capacity = f64::from(burst.max(1));
        Self { rate, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    async fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().await;
                let now = Instant::now();
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.rate).min(self.capacity);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.rate
            };
            tokio::time::sleep(Duration::from_secs_f64(wait)).await;
        }
    }
}

/// Result of one logical call (possibly several HTTP requests).
#[derive(Debug, Clone)]
pub struct CallOutcome<V> {
    /// Parsed value, or the last rejection reason.
    pub value: Result<V, String>,
    /// The accepted reply.
    pub reply: Option<ChatReply>,
    pub retries: u32,
    pub cached: bool,
}

/// Shared client for one endpoint.
pub struct Harness {
    backend: HttpBackend,
    cache: Option<ResponseCache>,
    permits: Arc<Semaphore>,
    bucket: Option<TokenBucket>,
    opts: RunOptions,
    counters: Counters,
}

impl Harness {
    pub fn new(backend: HttpBackend, cache: Option<ResponseCache>, opts: RunOptions) -> Result<Self, LlmError> {
        let problems = opts.validate();
        if !problems.is_empty() {
            return Err(LlmError::InvalidSpec(problems.join("; ")));
        }
        Ok(Self {
            backend,
            cache,
            permits: Arc::new(Semaphore::new(opts.max_concurrency)),
            bucket: opts.requests_per_second.map(|r| TokenBucket::new(r, opts.burst)),
            opts,
            counters: Counters::default(),
        })
    }

    pub fn endpoint(&self) -> &str {
        self.backend.endpoint()
    }

    pub fn options(&self) -> &RunOptions {
        &self.opts
    }

    pub fn stats(&self) -> RunStats {
        let c = &self.counters;
        RunStats {
            requests: c.requests.load(Ordering::SeqCst),
            cache_hits: c.cache_hits.load(Ordering::SeqCst),
            retries: c.retries.load(Ordering::SeqCst),
            failed_calls: c.failed_calls.load(Ordering::SeqCst),
        }
    }

    async fn send(&self, params: &ChatParams, messages: &[Message]) -> Result<ChatReply, LlmError> {
        let mut tries = 0u32;
        loop {
            let n = self.counters.requests.fetch_add(1, Ordering::SeqCst) + 1;
            if let Some(budget) = self.opts.request_budget {
                if n > budget {
                    self.counters.requests.fetch_sub(1, Ordering::SeqCst);
                    return Err(LlmError::BudgetExceeded(budget));
                }
            }
            if let Some(b) = &self.bucket {
                b.acquire().await;
            }
            let result = {
                let _permit = self.permits.acquire().await.expect("semaphore is never closed");
                self.backend.chat(params, messages).await
            };
            match result {
                Ok(r) => return Ok(r),
                Err(e) if e.retryable && tries < self.opts.transport_retries => {
                    log::warn!("request to {} failed ({}); retrying", self.backend.endpoint(), e.message);
                    tokio::time::sleep(Duration::from_millis(self.opts.backoff_ms << tries.min(10))).await;
                    tries += 1;
                }
                Err(e) => return Err(LlmError::Transport(e.message)),
            }
        }
    }

    /// Sends `messages` and validates the reply, re-querying up to
    /// `max_retries` times when `validate` rejects it. Exchanges are read
    /// from and written to the cache; a cached pair is never re-sent.
    pub async fn call<V>(
        &self,
        params: &ChatParams,
        messages: &[Message],
        max_retries: u32,
        validate: impl Fn(&str) -> Result<V, String>,
    ) -> Result<CallOutcome<V>, LlmError> {
        let key = ResponseCache::key(&params.model, messages);
        if let Some(entry) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            match entry.accepted {
                Some(i) if i < entry.attempts.len() => {
                    let a = &entry.attempts[i];
                    if let Ok(v) = validate(&a.content) {
                        self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                        return Ok(CallOutcome {
                            value: Ok(v),
                            reply: Some(ChatReply { content: a.content.clone(), reasoning: a.reasoning.clone() }),
                            retries: i as u32,
                            cached: true,
                        });
                    }
                }
                None if !self.opts.retry_failed => {
                    self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                    self.counters.failed_calls.fetch_add(1, Ordering::SeqCst);
                    let reason = entry.attempts.last().and_then(|a| a.error.clone()).unwrap_or_default();
                    return Ok(CallOutcome {
                        value: Err(reason),
                        reply: None,
                        retries: entry.attempts.len().saturating_sub(1) as u32,
                        cached: true,
                    });
                }
                _ => {}
            }
        }

        let mut entry = new_entry(&params.model, messages);
        let mut outcome = None;
        for attempt in 0..=max_retries {
            if attempt > 0 {
                self.counters.retries.fetch_add(1, Ordering::SeqCst);
            }
            let reply = self.send(params, messages).await?;
            match validate(&reply.content) {
                Ok(v) => {
                    entry.attempts.push(Attempt { content: reply.content.clone(), reasoning: reply.reasoning.clone(), error: None });
                    entry.accepted = Some(attempt as usize);
                    outcome = Some(CallOutcome { value: Ok(v), reply: Some(reply), retries: attempt, cached: false });
                    break;
                }
                Err(e) => {
                    log::debug!("rejected reply from {} (attempt {}): {e}", params.model, attempt + 1);
                    entry.attempts.push(Attempt { content: reply.content, reasoning: reply.reasoning, error: Some(e) });
                }
            }
        }
        if let Some(c) = &self.cache {
            c.put(&key, &entry)?;
        }
        Ok(outcome.unwrap_or_else(|| {
            self.counters.failed_calls.fetch_add(1, Ordering::SeqCst);
            let reason = entry.attempts.last().and_then(|a| a.error.clone()).unwrap_or_default();
            CallOutcome { value: Err(reason), reply: None, retries: max_retries, cached: false }
        }))
    }
}
