//! Negation augmenting (NA), negation debiasing (ND) and γ calibration.
//!
//! NA scores every label `y` as `P(y|T(x)) + P(ȳ|T(¬x))`, where `ȳ` swaps
//! Entailment and Contradiction. A "not"-bearing statement inflates the
//! Contradiction logit by β₂ and a negation-free one inflates Entailment by
//! β₁; since x and ¬x always differ in negation, the sum sees both biases on
//! both channels and the skew cancels. Under CWA the degenerate form only
//! augments Entailment. ND then adds an offset γ to the Neutral score to
//! undo the mass the two inflated channels took from it, with
//! `γ = max(0, min(μ₁ − 2σ₁, μ₂ − 2σ₂))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::instance::Instance;
use crate::label::{CombinedScore, DistributionError, Label, LabelDistribution, WorldAssumption};
use crate::negator::has_logical_negation;

/// Default minimum number of bias samples per stratum.
pub const DEFAULT_MIN_SAMPLES: usize = 100;

/// Probability floor used when taking log-ratios of scorer outputs.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("negation debiasing requires the open-world assumption")]
    NdUnderCwa,
    #[error("gamma mode {gamma} is inconsistent with mode {mode}")]
    GammaModeMismatch { mode: Mode, gamma: GammaMode },
    #[error("offset gamma must be finite and non-negative, got {0}")]
    NegativeGamma(f64),
    #[error("closed-world augmenting needs zero Neutral mass, got {0}")]
    NeutralInCwaInput(f64),
    #[error("negated scores are required for mode {0}")]
    MissingNegatedScores(Mode),
    #[error("gamma mode `estimated` needs a calibration report")]
    MissingCalibration,
    #[error("insufficient calibration samples: {n1} negation-free and {n2} negated Neutral items, need {min} each")]
    InsufficientCalibrationSamples { n1: usize, n2: usize, min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Na,
    Nand,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Na, Mode::Nand];

    pub fn needs_negation(self) -> bool {
        self != Mode::Baseline
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::Na => "na",
            Mode::Nand => "nand",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "na" => Ok(Mode::Na),
            "nand" => Ok(Mode::Nand),
            other => Err(format!("unknown mode {other:?} (expected baseline, na or nand)")),
        }
    }
}

/// Where the ND offset comes from. Text form: `fixed:<x>`, `estimated`, `none`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    Fixed(f64),
    Estimated,
    None,
}

impl fmt::Display for GammaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaMode::Fixed(g) => write!(f, "fixed:{g}"),
            GammaMode::Estimated => f.write_str("estimated"),
            GammaMode::None => f.write_str("none"),
        }
    }
}

impl FromStr for GammaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "estimated" => Ok(GammaMode::Estimated),
            "none" => Ok(GammaMode::None),
            other => {
                let value = other
                    .strip_prefix("fixed:")
                    .ok_or_else(|| format!("unknown gamma mode {other:?} (expected fixed:<x>, estimated or none)"))?;
                let g: f64 = value.parse().map_err(|_| format!("bad gamma value {value:?}"))?;
                if !g.is_finite() || g < 0.0 {
                    return Err(format!("gamma must be non-negative, got {g}"));
                }
                Ok(GammaMode::Fixed(g))
            }
        }
    }
}

impl Serialize for GammaMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GammaMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NandConfig {
    pub assumption: WorldAssumption,
    pub mode: Mode,
    pub gamma: GammaMode,
}

impl NandConfig {
    pub fn new(assumption: WorldAssumption, mode: Mode, gamma: GammaMode) -> Result<Self, EngineError> {
        let cfg = NandConfig { assumption, mode, gamma };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), EngineError> {
        if self.mode == Mode::Nand && self.assumption == WorldAssumption::Cwa {
            return Err(EngineError::NdUnderCwa);
        }
        let has_gamma = !matches!(self.gamma, GammaMode::None);
        if has_gamma != (self.mode == Mode::Nand) {
            return Err(EngineError::GammaModeMismatch { mode: self.mode, gamma: self.gamma });
        }
        if let GammaMode::Fixed(g) = self.gamma {
            if !g.is_finite() || g < 0.0 {
                return Err(EngineError::NegativeGamma(g));
            }
        }
        Ok(())
    }

    /// The offset γ this configuration applies.
    pub fn resolve_gamma(&self, report: Option<&CalibrationReport>) -> Result<f64, EngineError> {
        match self.gamma {
            GammaMode::Fixed(g) => Ok(g),
            GammaMode::Estimated => report.map(|r| r.gamma).ok_or(EngineError::MissingCalibration),
            GammaMode::None => Ok(0.0),
        }
    }
}

/// Scorer outputs for T(x) and T(¬x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub x: LabelDistribution,
    pub negx: LabelDistribution,
}

impl PairScores {
    pub fn new(x: LabelDistribution, negx: LabelDistribution) -> Self {
        PairScores { x, negx }
    }
}

/// Open-world NA: `s_y = P(y|x) + P(ȳ|¬x)`.
pub fn combine_na_owa(p: &PairScores) -> Result<CombinedScore, EngineError> {
    p.x.check(WorldAssumption::Owa)?;
    p.negx.check(WorldAssumption::Owa)?;
    let s = |y: Label| p.x.get(y) + p.negx.get(y.counterpart());
    Ok(CombinedScore { e: s(Label::Entailment), c: s(Label::Contradiction), n: s(Label::Neutral) })
}

/// Degenerate closed-world NA: `s_E = P(E|x) + P(C|¬x)`, `s_C = 2·P(C|x)`.
pub fn combine_na_cwa(p: &PairScores) -> Result<CombinedScore, EngineError> {
    for d in [&p.x, &p.negx] {
        let n = d.get(Label::Neutral);
        if n != 0.0 {
            return Err(EngineError::NeutralInCwaInput(n));
        }
        d.check(WorldAssumption::Cwa)?;
    }
    Ok(CombinedScore {
        e: p.x.get(Label::Entailment) + p.negx.get(Label::Contradiction),
        c: 2.0 * p.x.get(Label::Contradiction),
        n: 0.0,
    })
}

pub fn apply_nd(s: &CombinedScore, gamma: f64) -> Result<CombinedScore, EngineError> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(EngineError::NegativeGamma(gamma));
    }
    Ok(CombinedScore { n: s.n + gamma, ..*s })
}

/// Two-sigma offset, clamped at zero.
pub fn gamma_from(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> f64 {
    (mu1 - 2.0 * sigma1).min(mu2 - 2.0 * sigma2).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Sample mean and unbiased standard deviation. Samples are sorted first so
/// the result does not depend on their order.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn log_gap(d: &LabelDistribution, up: Label, down: Label) -> f64 {
    d.get(up).max(PROB_FLOOR).ln() - d.get(down).max(PROB_FLOOR).ln()
}

/// Per-item bias samples `(β₁ samples, β₂ samples)` from Neutral-gold pairs.
///
/// On a Neutral item the true E and C scores are taken as equal, so the
/// log-ratio between the inflated channel and its counterpart on the same
/// input is the injected increment: `ln P(E) − ln P(C)` on the negation-free
/// side of the pair and `ln P(C) − ln P(E)` on the negated side.
pub fn bias_samples(calibration: &[(Instance, PairScores)]) -> (Vec<f64>, Vec<f64>) {
    let mut beta1 = Vec::new();
    let mut beta2 = Vec::new();
    for (instance, pair) in calibration {
        if instance.gold != Label::Neutral {
            continue;
        }
        let (plain, negated) =
            if has_logical_negation(&instance.statement) { (&pair.negx, &pair.x) } else { (&pair.x, &pair.negx) };
        beta1.push(log_gap(plain, Label::Entailment, Label::Contradiction));
        beta2.push(log_gap(negated, Label::Contradiction, Label::Entailment));
    }
    (beta1, beta2)
}

pub fn estimate_bias(
    calibration: &[(Instance, PairScores)],
    min_samples: usize,
) -> Result<CalibrationReport, EngineError> {
    let (beta1, beta2) = bias_samples(calibration);
    if beta1.len() < min_samples.max(2) || beta2.len() < min_samples.max(2) {
        return Err(EngineError::InsufficientCalibrationSamples {
            n1: beta1.len(),
            n2: beta2.len(),
            min: min_samples.max(2),
        });
    }
    let (mu1, sigma1) = mean_std(&beta1);
    let (mu2, sigma2) = mean_std(&beta2);
    Ok(CalibrationReport {
        mu1,
        sigma1,
        mu2,
        sigma2,
        gamma: gamma_from(mu1, sigma1, mu2, sigma2),
        n1: beta1.len(),
        n2: beta2.len(),
    })
}

/// Argmax of the x distribution alone.
pub fn predict_baseline(x: &LabelDistribution, wa: WorldAssumption) -> Result<Label, EngineError> {
    Ok(x.argmax(wa)?)
}

/// Label under `cfg`. `negx` may be absent only in baseline mode.
pub fn predict(
    cfg: &NandConfig,
    x: &LabelDistribution,
    negx: Option<&LabelDistribution>,
    report: Option<&CalibrationReport>,
) -> Result<Label, EngineError> {
    cfg.check()?;
    if cfg.mode == Mode::Baseline {
        return predict_baseline(x, cfg.assumption);
    }
    let negx = negx.ok_or(EngineError::MissingNegatedScores(cfg.mode))?;
    let pair = PairScores::new(*x, *negx);
    let combined = match cfg.assumption {
        WorldAssumption::Owa => combine_na_owa(&pair)?,
        WorldAssumption::Cwa => combine_na_cwa(&pair)?,
    };
    let combined = if cfg.mode == Mode::Nand { apply_nd(&combined, cfg.resolve_gamma(report)?)? } else { combined };
    Ok(combined.argmax(cfg.assumption))
}
