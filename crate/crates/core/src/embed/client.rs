//! Client side of the embedding service.
//!
//! `POST <endpoint>/embed` with
//! `{"model", "pooling": "mean"|"last_token", "max_tokens", "inputs": [{"key", "text"}]}`
//! answered by `{"model", "dim", "vectors": [{"key", "vector"}]}`.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingRecord, EmbeddingStore, EmbeddingVariant, ModelSpec, Pooling, Result};

/// Overrides the configured service endpoint when set.
pub const ENDPOINT_ENV: &str = "ITEMDIFF_EMBED_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedInput {
    pub key: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub pooling: Pooling,
    pub max_tokens: usize,
    pub inputs: Vec<EmbedInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedVector {
    pub key: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub model: String,
    pub dim: usize,
    pub vectors: Vec<KeyedVector>,
}

/// A failed service call.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceError {
    /// Connection problems, timeouts and 5xx answers are worth retrying.
    pub retryable: bool,
    pub message: String,
}

pub trait EmbeddingService: Sync {
    fn embed(&self, request: &EmbedRequest) -> std::result::Result<EmbedResponse, ServiceError>;
}

/// Blocking HTTP client for the `/embed` endpoint.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingClient {
    endpoint: String,
    client: reqwest::blocking::Client,
}

/// `ITEMDIFF_EMBED_ENDPOINT` if set and non-empty, else `configured`.
pub fn endpoint_from_env(configured: Option<&str>) -> Option<String> {
    std::env::var(ENDPOINT_ENV)
        .ok()
        .filter(|v| !v.trim().is_empty())
        .or_else(|| configured.map(str::to_string))
}

impl HttpEmbeddingClient {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Io(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            client,
        })
    }

    pub fn url(&self) -> String {
        format!("{}/embed", self.endpoint)
    }
}

impl EmbeddingService for HttpEmbeddingClient {
    fn embed(&self, request: &EmbedRequest) -> std::result::Result<EmbedResponse, ServiceError> {
        let resp = self.client.post(self.url()).json(request).send().map_err(|e| ServiceError {
            retryable: true,
            message: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(ServiceError {
                retryable: status.is_server_error() || status.as_u16() == 429,
                message: format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()),
            });
        }
        resp.json::<EmbedResponse>().map_err(|e| ServiceError {
            retryable: false,
            message: format!("malformed response body: {e}"),
        })
    }
}

/// One text to embed and where its vector goes in the store.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchRequest {
    pub item_id: String,
    pub variant: EmbeddingVariant,
    pub text: String,
}

impl FetchRequest {
    fn wire_key(&self) -> String {
        format!("{}#{}", self.item_id, self.variant)
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub batch_size: usize,
    /// Upper bound on concurrent service calls.
    pub max_in_flight: usize,
    pub max_attempts: u32,
    /// Wait before the second attempt; doubled for each further one.
    pub backoff: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_in_flight: 4,
            max_attempts: 3,
            backoff: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FetchSummary {
    pub requested: usize,
    /// Already in the store; not sent.
    pub cached: usize,
    pub fetched: usize,
    /// Service calls made, retries included.
    pub calls: u32,
}

/// Embeds every request not already in the store and adds the results.
///
/// Batches are sent concurrently (at most `max_in_flight` at a time) and
/// inserted in request order, so the store does not depend on completion
/// order. A dimension that disagrees with `spec` is fatal and not retried.
/// On error nothing from this call is inserted.
pub fn fetch_embeddings(
    service: &dyn EmbeddingService,
    store: &mut EmbeddingStore,
    model: &str,
    spec: ModelSpec,
    requests: &[FetchRequest],
    options: &FetchOptions,
) -> Result<FetchSummary> {
    store.declare_model(model, spec)?;
    let mut seen = HashSet::new();
    let mut pending = Vec::new();
    let mut cached = 0;
    for r in requests {
        if !seen.insert((r.item_id.as_str(), &r.variant)) {
            continue;
        }
        if store.contains(&r.item_id, &r.variant, model) {
            cached += 1;
        } else {
            pending.push(r);
        }
    }
    let batches: Vec<&[&FetchRequest]> = pending.chunks(options.batch_size.max(1)).collect();
    let calls = AtomicU32::new(0);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Vec<Vec<f64>>>>>> = Mutex::new(vec![None; batches.len()]);

    let workers = options.max_in_flight.max(1).min(batches.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::SeqCst);
                if b >= batches.len() {
                    break;
                }
                let out = fetch_batch(service, model, spec, batches[b], options, &calls);
                let failed = out.is_err();
                results.lock().expect("no worker panics")[b] = Some(out);
                if failed {
                    // stop handing out new batches
                    next.store(batches.len(), Ordering::SeqCst);
                }
            });
        }
    });

    let results = results.into_inner().expect("no worker panics");
    let mut vectors = Vec::with_capacity(pending.len());
    for r in results {
        match r {
            Some(Ok(v)) => vectors.extend(v),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    // a skipped batch only happens after a failure, which returned above
    debug_assert_eq!(vectors.len(), pending.len());

    let mut staged = store.clone();
    for (req, vector) in pending.iter().zip(vectors) {
        staged.insert(EmbeddingRecord {
            item_id: req.item_id.clone(),
            variant: req.variant.clone(),
            model: model.to_string(),
            dim: vector.len(),
            vector,
        })?;
    }
    *store = staged;
    Ok(FetchSummary {
        requested: requests.len(),
        cached,
        fetched: pending.len(),
        calls: calls.into_inner(),
    })
}

fn fetch_batch(
    service: &dyn EmbeddingService,
    model: &str,
    spec: ModelSpec,
    batch: &[&FetchRequest],
    options: &FetchOptions,
    calls: &AtomicU32,
) -> Result<Vec<Vec<f64>>> {
    let request = EmbedRequest {
        model: model.to_string(),
        pooling: spec.pooling,
        max_tokens: spec.max_tokens,
        inputs: batch
            .iter()
            .map(|r| EmbedInput {
                key: r.wire_key(),
                text: r.text.clone(),
            })
            .collect(),
    };
    let mut attempts = 0;
    let mut wait = options.backoff;
    let response = loop {
        attempts += 1;
        calls.fetch_add(1, Ordering::SeqCst);
        match service.embed(&request) {
            Ok(r) => break r,
            Err(e) if e.retryable && attempts < options.max_attempts => {
                log::warn!("embedding call failed (attempt {attempts}): {}", e.message);
                std::thread::sleep(wait);
                wait *= 2;
            }
            Err(e) => {
                return Err(EmbedError::Transport {
                    attempts,
                    message: e.message,
                })
            }
        }
    };
    check_response(&request, response, spec)
}

/// Validates a response and returns vectors in request order.
fn check_response(request: &EmbedRequest, response: EmbedResponse, spec: ModelSpec) -> Result<Vec<Vec<f64>>> {
    if response.model != request.model {
        return Err(EmbedError::Protocol(format!(
            "asked for model `{}`, got `{}`",
            request.model, response.model
        )));
    }
    let mismatch = |got| EmbedError::DimMismatch {
        model: request.model.clone(),
        expected: spec.dim,
        got,
    };
    if response.dim != spec.dim {
        return Err(mismatch(response.dim));
    }
    let mut by_key: HashMap<String, Vec<f64>> = HashMap::with_capacity(response.vectors.len());
    for kv in response.vectors {
        if kv.vector.len() != spec.dim {
            return Err(mismatch(kv.vector.len()));
        }
        if by_key.insert(kv.key.clone(), kv.vector).is_some() {
            return Err(EmbedError::Protocol(format!("key `{}` returned twice", kv.key)));
        }
    }
    if by_key.len() != request.inputs.len() {
        return Err(EmbedError::Protocol(format!(
            "sent {} inputs, got {} vectors",
            request.inputs.len(),
            by_key.len()
        )));
    }
    request
        .inputs
        .iter()
        .map(|i| {
            by_key
                .remove(&i.key)
                .ok_or_else(|| EmbedError::Protocol(format!("no vector for key `{}`", i.key)))
        })
        .collect()
}
