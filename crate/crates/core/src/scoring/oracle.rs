//! Deterministic stand-in for a biased masked language model.
//!
//! Logits start at `margin` for the gold label and 0 elsewhere, receive
//! per-label Gaussian noise, and then a bias increment: β₁ on E when the
//! statement is free of negation, β₂ on C when it is negated. The softmax is
//! taken over the labels active under the world assumption.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ScoreRequest, Scorer, ScorerError, TokenScores};
use crate::label::{Label, LabelDistribution, WorldAssumption};
use crate::prompting::Verbalizer;
use crate::seed::rng_for;

pub const DEFAULT_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasedOracleConfig {
    pub margin: f64,
    pub label_noise: f64,
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    pub seed: u64,
    pub assumption: WorldAssumption,
}

impl Default for BiasedOracleConfig {
    fn default() -> Self {
        BiasedOracleConfig::bert()
    }
}

impl BiasedOracleConfig {
    pub fn bert() -> Self {
        BiasedOracleConfig {
            margin: DEFAULT_MARGIN,
            label_noise: 0.0,
            mu1: 0.276,
            sigma1: 0.053,
            mu2: 0.434,
            sigma2: 0.083,
            seed: 0,
            assumption: WorldAssumption::Owa,
        }
    }

    pub fn roberta() -> Self {
        BiasedOracleConfig { mu1: 0.112, sigma1: 0.025, mu2: 0.321, sigma2: 0.080, ..BiasedOracleConfig::bert() }
    }

    pub fn unbiased() -> Self {
        BiasedOracleConfig { mu1: 0.0, sigma1: 0.0, mu2: 0.0, sigma2: 0.0, ..BiasedOracleConfig::bert() }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "bert" => Some(Self::bert()),
            "roberta" => Some(Self::roberta()),
            "unbiased" | "none" => Some(Self::unbiased()),
            _ => None,
        }
    }

    pub fn check(&self) -> Result<(), ScorerError> {
        let finite = [self.margin, self.label_noise, self.mu1, self.sigma1, self.mu2, self.sigma2];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ScorerError::InvalidRequest("oracle parameters must be finite".into()));
        }
        if self.margin <= 0.0 {
            return Err(ScorerError::InvalidRequest("oracle margin must be positive".into()));
        }
        if self.label_noise < 0.0 || self.sigma1 < 0.0 || self.sigma2 < 0.0 {
            return Err(ScorerError::InvalidRequest("oracle standard deviations must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        BiasedOracleConfig { seed, ..self }
    }
}

/// Pre-softmax logits in E, C, N order.
pub fn oracle_logits(cfg: &BiasedOracleConfig, gold: Label, statement_has_negation: bool, key: &str) -> [f64; 3] {
    let mut rng = rng_for(cfg.seed, "oracle", key);
    // the draw sequence is fixed so biased and unbiased runs share noise
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let noise = [draw(), draw(), draw()];
    let (z1, z2) = (draw(), draw());
    let mut logits = [0.0; 3];
    for l in Label::ALL {
        let base = if l == gold { cfg.margin } else { 0.0 };
        logits[l.index()] = base + cfg.label_noise * noise[l.index()];
    }
    if statement_has_negation {
        logits[Label::Contradiction.index()] += cfg.mu2 + cfg.sigma2 * z2;
    } else {
        logits[Label::Entailment.index()] += cfg.mu1 + cfg.sigma1 * z1;
    }
    logits
}

pub fn oracle_score(
    cfg: &BiasedOracleConfig,
    gold: Label,
    statement_has_negation: bool,
    key: &str,
) -> LabelDistribution {
    let logits = oracle_logits(cfg, gold, statement_has_negation, key);
    let active = cfg.assumption.labels();
    let top = active.iter().map(|l| logits[l.index()]).fold(f64::NEG_INFINITY, f64::max);
    let mut w = [0.0; 3];
    for l in active {
        w[l.index()] = (logits[l.index()] - top).exp();
    }
    LabelDistribution::from_weights(w[0], w[1], w[2]).expect("softmax weights are positive")
}

/// What the oracle needs to know about a request beyond its prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleTruth {
    pub gold: Label,
    pub statement_has_negation: bool,
}

pub struct OracleScorer {
    cfg: BiasedOracleConfig,
    verbalizer: Verbalizer,
    truths: HashMap<String, OracleTruth>,
}

impl OracleScorer {
    pub fn new(cfg: BiasedOracleConfig, verbalizer: Verbalizer) -> Result<Self, ScorerError> {
        cfg.check()?;
        Ok(OracleScorer { cfg, verbalizer, truths: HashMap::new() })
    }

    pub fn config(&self) -> &BiasedOracleConfig {
        &self.cfg
    }

    pub fn register(&mut self, request_id: impl Into<String>, truth: OracleTruth) {
        self.truths.insert(request_id.into(), truth);
    }
}

impl Scorer for OracleScorer {
    fn scorer_id(&self) -> String {
        let c = &self.cfg;
        format!(
            "oracle(m={},noise={},b1={}~{},b2={}~{},seed={},{})",
            c.margin, c.label_noise, c.mu1, c.sigma1, c.mu2, c.sigma2, c.seed, c.assumption
        )
    }

    fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<TokenScores>, ScorerError> {
        requests
            .iter()
            .map(|r| {
                r.check()?;
                let truth =
                    self.truths.get(&r.request_id).ok_or_else(|| ScorerError::UnknownRequest(r.request_id.clone()))?;
                let dist = oracle_score(&self.cfg, truth.gold, truth.statement_has_negation, &r.request_id);
                Ok(r.candidates
                    .iter()
                    .map(|c| (c.clone(), self.verbalizer.label_of(c).map(|l| dist.get(l)).unwrap_or(0.0)))
                    .collect())
            })
            .collect()
    }
}
