//! Scorer contract, the synthetic biased oracle, the remote client and the
//! persistent score cache.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod cache;
pub mod oracle;
pub mod remote;

pub use cache::{CacheKey, ScoreCache};
pub use oracle::{oracle_score, BiasedOracleConfig, OracleScorer, OracleTruth};
pub use remote::{RemoteConfig, RemoteScorer};

/// One prompt to score against an ordered candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub request_id: String,
    pub prompt: String,
    pub candidates: Vec<String>,
}

impl ScoreRequest {
    pub fn check(&self) -> Result<(), ScorerError> {
        if self.candidates.is_empty() {
            return Err(ScorerError::InvalidRequest(format!("{}: no candidates", self.request_id)));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if self.candidates[..i].contains(c) {
                return Err(ScorerError::InvalidRequest(format!("{}: duplicate candidate {c:?}", self.request_id)));
            }
        }
        Ok(())
    }
}

pub type TokenScores = HashMap<String, f64>;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid score request: {0}")]
    InvalidRequest(String),
    #[error("scorer unavailable after {attempts} attempts: {message}")]
    ScorerUnavailable { attempts: usize, message: String },
    #[error("scorer timed out: {0}")]
    Timeout(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("oracle has no ground truth for request {0}")]
    UnknownRequest(String),
}

/// Anything that maps prompts to candidate-token scores.
pub trait Scorer: Send + Sync {
    /// Identifier recorded in cache keys and run manifests.
    fn scorer_id(&self) -> String;

    /// One score map per request, in request order, covering every candidate.
    fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<TokenScores>, ScorerError>;
}
