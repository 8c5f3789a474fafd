//! HTTP client for the `/v1/score` and `/v1/health` protocol.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreRequest, Scorer, ScorerError, TokenScores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub model_id: String,
    pub max_batch: usize,
    /// Extra attempts after the first failure.
    pub retries: usize,
    pub backoff: Duration,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(endpoint: &str, model_id: &str) -> Self {
        RemoteConfig {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model_id: model_id.to_string(),
            max_batch: 16,
            retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
    #[serde(default)]
    pub mask: Option<String>,
}

#[derive(Serialize)]
struct WireItem<'a> {
    prompt: &'a str,
    candidates: &'a [String],
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model_id: &'a str,
    items: Vec<WireItem<'a>>,
}

#[derive(Deserialize)]
struct WireResult {
    scores: Vec<f64>,
}

#[derive(Deserialize)]
struct WireResponse {
    results: Vec<WireResult>,
}

struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.slots.lock().expect("gate lock");
        while *free == 0 {
            free = self.freed.wait(free).expect("gate lock");
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.slots.lock().expect("gate lock") += 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Retry(ScorerError),
    Fatal(ScorerError),
}

pub struct RemoteScorer {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl RemoteScorer {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(cfg.timeout)).http_status_as_error(false).build().into();
        let gate = Gate { slots: Mutex::new(cfg.max_in_flight.max(1)), freed: Condvar::new() };
        RemoteScorer { cfg, agent, gate }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    pub fn health(&self) -> Result<Health, ScorerError> {
        let url = format!("{}/v1/health", self.cfg.endpoint);
        self.with_retries(|| {
            let mut resp = self.agent.get(&url).call().map_err(transport)?;
            check_status(resp.status().as_u16())?;
            resp.body_mut()
                .read_json::<Health>()
                .map_err(|e| Attempt::Fatal(ScorerError::ProtocolViolation(format!("health body: {e}"))))
        })
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, Attempt>) -> Result<T, ScorerError> {
        let attempts = self.cfg.retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.cfg.backoff * 2u32.saturating_pow(attempt as u32 - 1));
            }
            match call() {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("scorer attempt {}/{attempts} failed: {e}", attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(match last.expect("at least one attempt") {
            ScorerError::Timeout(m) => ScorerError::Timeout(m),
            other => ScorerError::ScorerUnavailable { attempts, message: other.to_string() },
        })
    }

    fn score_chunk(&self, chunk: &[ScoreRequest]) -> Result<Vec<TokenScores>, ScorerError> {
        let url = format!("{}/v1/score", self.cfg.endpoint);
        let body = WireRequest {
            model_id: &self.cfg.model_id,
            items: chunk.iter().map(|r| WireItem { prompt: &r.prompt, candidates: &r.candidates }).collect(),
        };
        let _slot = self.gate.acquire();
        let parsed: WireResponse = self.with_retries(|| {
            let mut resp = self.agent.post(&url).send_json(&body).map_err(transport)?;
            check_status(resp.status().as_u16())?;
            resp.body_mut()
                .read_json::<WireResponse>()
                .map_err(|e| Attempt::Fatal(ScorerError::ProtocolViolation(format!("score body: {e}"))))
        })?;
        if parsed.results.len() != chunk.len() {
            return Err(ScorerError::ProtocolViolation(format!(
                "{} results for {} items",
                parsed.results.len(),
                chunk.len()
            )));
        }
        chunk.iter().zip(parsed.results).map(|(req, res)| validate_scores(req, res.scores)).collect()
    }
}

fn transport(e: ureq::Error) -> Attempt {
    match e {
        ureq::Error::Timeout(t) => Attempt::Retry(ScorerError::Timeout(t.to_string())),
        other => Attempt::Retry(ScorerError::ScorerUnavailable { attempts: 1, message: other.to_string() }),
    }
}

fn check_status(code: u16) -> Result<(), Attempt> {
    match code {
        200..=299 => Ok(()),
        500..=599 => {
            Err(Attempt::Retry(ScorerError::ScorerUnavailable { attempts: 1, message: format!("HTTP {code}") }))
        }
        _ => Err(Attempt::Fatal(ScorerError::ProtocolViolation(format!("HTTP {code}")))),
    }
}

fn validate_scores(req: &ScoreRequest, scores: Vec<f64>) -> Result<TokenScores, ScorerError> {
    let bad = |why: String| Err(ScorerError::ProtocolViolation(format!("{}: {why}", req.request_id)));
    if scores.len() != req.candidates.len() {
        return bad(format!("{} scores for {} candidates", scores.len(), req.candidates.len()));
    }
    if scores.iter().any(|s| !s.is_finite() || *s < 0.0 || *s > 1.0) {
        return bad("score outside [0, 1]".into());
    }
    let total: f64 = scores.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return bad(format!("scores sum to {total}"));
    }
    Ok(req.candidates.iter().cloned().zip(scores).collect())
}

impl Scorer for RemoteScorer {
    fn scorer_id(&self) -> String {
        format!("remote:{}", self.cfg.model_id)
    }

    fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<TokenScores>, ScorerError> {
        for r in requests {
            r.check()?;
        }
        let mut out = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(self.cfg.max_batch.max(1)) {
            out.extend(self.score_chunk(chunk)?);
        }
        Ok(out)
    }
}
