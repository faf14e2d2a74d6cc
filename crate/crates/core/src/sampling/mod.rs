//! Candidate generation: prompts, samplers and output sanitization.
//!
//! For every component the model is asked `N` times at the configured
//! temperature and once greedily (temperature 0). Raw outputs are reduced
//! to identifiers; an output that sanitizes to nothing is re-requested
//! against a per-component retry budget.

mod fixture;
mod live;
mod prompt;
mod sanitize;

pub use fixture::{FixtureFile, FixtureSampler, FixtureScript};
pub use live::{ChatCompletionSampler, LiveSamplerConfig};
pub use prompt::{build_prompt, PromptSpec, ToolContext};
pub use sanitize::sanitize_name;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

pub const DEFAULT_NUM_CANDIDATES: usize = 32;
pub const DEFAULT_TEMPERATURE: f64 = 0.4;
pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("num_candidates must be at least 1")]
    NoCandidates,
    #[error("temperature must lie in (0, 1], got {0}")]
    Temperature(f64),
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("request_parallelism must be at least 1")]
    Parallelism,
}

/// Knobs for one alignment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub model_id: String,
    pub num_candidates: usize,
    pub temperature: f64,
    pub alpha: f64,
    /// Seeds the fixture sampler's draw order.
    pub rng_seed: u64,
    /// Re-requests allowed per request on transport failure, and per
    /// component for outputs that sanitize to nothing.
    pub max_retries: u32,
    pub request_parallelism: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            model_id: "fixture".into(),
            num_candidates: DEFAULT_NUM_CANDIDATES,
            temperature: DEFAULT_TEMPERATURE,
            alpha: DEFAULT_ALPHA,
            rng_seed: 0,
            max_retries: 3,
            request_parallelism: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_candidates == 0 {
            return Err(ConfigError::NoCandidates);
        }
        if !(self.temperature > 0.0 && self.temperature <= 1.0) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if self.request_parallelism == 0 {
            return Err(ConfigError::Parallelism);
        }
        Ok(())
    }
}

/// Which request of a component's batch this is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    /// The temperature-0 reference request.
    Greedy,
    /// Sampled request `k`; retries continue numbering after the first `N`.
    Sample(usize),
}

/// One completion request as seen by a [`Sampler`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest<'a> {
    /// Dotted path of the component in the *original* schema.
    pub component: &'a str,
    pub prompt: &'a str,
    pub temperature: f64,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    /// Network or server-side failure worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("no fixture script for component `{0}`")]
    MissingScript(String),
    #[error("fixture script for `{component}` exhausted: request {requested} but only {available} outputs scripted")]
    ScriptExhausted {
        component: String,
        requested: usize,
        available: usize,
    },
}

impl SamplerError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, SamplerError::Transport(_))
    }
}

/// Source of raw model text. Implementations are shared across worker
/// threads while one component's requests fan out.
pub trait Sampler: Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, SamplerError>;

    /// Delay before retry number `attempt` (1-based) after a transport error.
    fn retry_backoff(&self, _attempt: u32) -> Duration {
        Duration::ZERO
    }
}

impl<S: Sampler + ?Sized> Sampler for &S {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, SamplerError> {
        (**self).complete(request)
    }

    fn retry_backoff(&self, attempt: u32) -> Duration {
        (**self).retry_backoff(attempt)
    }
}

/// Counts every request passed through to the inner sampler.
#[derive(Debug)]
pub struct CountingSampler<S> {
    inner: S,
    count: AtomicUsize,
}

impl<S> CountingSampler<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn requests(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

impl<S: Sampler> Sampler for CountingSampler<S> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, SamplerError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(request)
    }

    fn retry_backoff(&self, attempt: u32) -> Duration {
        self.inner.retry_backoff(attempt)
    }
}

/// One raw output, kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub slot: Slot,
    pub raw: String,
    pub accepted: bool,
}

/// `N` sanitized candidates plus the greedy reference for one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<String>,
    pub reference: String,
    pub raw_transcripts: Vec<Transcript>,
}

impl CandidateSet {
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("candidate sets serialize");
        format!("sha256:{}", sha256_hex(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("component `{component}` has an empty description")]
    EmptyDescription { component: String },
    #[error("sampler failed for `{component}`: {source}")]
    Sampler {
        component: String,
        #[source]
        source: SamplerError,
    },
    #[error(
        "only {collected} of {needed} valid candidates for `{component}` within the retry budget"
    )]
    InsufficientCandidates {
        component: String,
        collected: usize,
        needed: usize,
    },
    #[error("greedy reference for `{component}` never produced a valid name")]
    Reference { component: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn request_with_retries<S: Sampler + ?Sized>(
    sampler: &S,
    request: &CompletionRequest<'_>,
    max_retries: u32,
) -> Result<String, SamplerError> {
    let mut attempt = 0;
    loop {
        match sampler.complete(request) {
            Err(e) if e.is_retryable() && attempt < max_retries => {
                attempt += 1;
                std::thread::sleep(sampler.retry_backoff(attempt));
            }
            other => return other,
        }
    }
}

/// Collects `N` sanitized candidates and one greedy reference.
///
/// The first `N` sampled requests may run concurrently; their results are
/// reassembled by slot so the candidate order never depends on scheduling.
/// Rejected outputs are replaced in place by sequential re-requests
/// numbered from `N` upward.
pub fn sample_candidates<S: Sampler + ?Sized>(
    component: &str,
    prompt: &PromptSpec,
    config: &SamplerConfig,
    sampler: &S,
) -> Result<CandidateSet, SamplingError> {
    config.validate()?;
    let text = prompt.render();
    let n = config.num_candidates;
    let wrap = |source: SamplerError| SamplingError::Sampler {
        component: component.to_string(),
        source,
    };
    let request = |slot: Slot, temperature: f64| {
        request_with_retries(
            sampler,
            &CompletionRequest {
                component,
                prompt: &text,
                temperature,
                slot,
            },
            config.max_retries,
        )
    };

    let mut budget = config.max_retries;
    let mut transcripts = Vec::with_capacity(n + 1);

    let reference = loop {
        let raw = request(Slot::Greedy, 0.0).map_err(wrap)?;
        let name = sanitize_name(&raw);
        transcripts.push(Transcript {
            slot: Slot::Greedy,
            raw,
            accepted: !name.is_empty(),
        });
        if !name.is_empty() {
            break name;
        }
        if budget == 0 {
            return Err(SamplingError::Reference {
                component: component.to_string(),
            });
        }
        budget -= 1;
    };

    let first_pass = fan_out(n, config.request_parallelism, |k| {
        request(Slot::Sample(k), config.temperature)
    });
    let mut candidates: Vec<String> = Vec::with_capacity(n);
    let mut rejected = Vec::new();
    for (k, result) in first_pass.into_iter().enumerate() {
        let raw = result.map_err(wrap)?;
        let name = sanitize_name(&raw);
        if name.is_empty() {
            rejected.push(k);
        }
        transcripts.push(Transcript {
            slot: Slot::Sample(k),
            raw,
            accepted: !name.is_empty(),
        });
        candidates.push(name);
    }

    let mut next_slot = n;
    for position in rejected {
        loop {
            if budget == 0 {
                return Err(SamplingError::InsufficientCandidates {
                    component: component.to_string(),
                    collected: candidates.iter().filter(|c| !c.is_empty()).count(),
                    needed: n,
                });
            }
            budget -= 1;
            let slot = Slot::Sample(next_slot);
            next_slot += 1;
            let raw = request(slot, config.temperature).map_err(wrap)?;
            let name = sanitize_name(&raw);
            let accepted = !name.is_empty();
            transcripts.push(Transcript {
                slot,
                raw,
                accepted,
            });
            if accepted {
                candidates[position] = name;
                break;
            }
        }
    }

    Ok(CandidateSet {
        candidates,
        reference,
        raw_transcripts: transcripts,
    })
}

/// Runs `job(0..n)` on up to `workers` threads and returns results in index
/// order.
fn fan_out<T, F>(n: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(job).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let out = job(k);
                slots
                    .lock()
                    .expect("no worker panics while holding the lock")[k] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
