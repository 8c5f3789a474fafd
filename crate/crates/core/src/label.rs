//! Label algebra and probability containers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the unit-sum constraint of a [`LabelDistribution`].
pub const SUM_TOLERANCE: f64 = 1e-6;

/// One of the three NLI labels.
///
/// The declaration order doubles as the tie-break priority used by
/// [`LabelDistribution::argmax`] and [`CombinedScore::argmax`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "E")]
    Entailment,
    #[serde(rename = "C")]
    Contradiction,
    #[serde(rename = "N")]
    Neutral,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    /// Swaps Entailment and Contradiction; Neutral is a fixed point.
    pub fn counterpart(self) -> Label {
        match self {
            Label::Entailment => Label::Contradiction,
            Label::Contradiction => Label::Entailment,
            Label::Neutral => Label::Neutral,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Label::Entailment => "E",
            Label::Contradiction => "C",
            Label::Neutral => "N",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label {0:?} (expected E, C or N)")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" => Ok(Label::Entailment),
            "C" => Ok(Label::Contradiction),
            "N" => Ok(Label::Neutral),
            other => Err(ParseLabelError(other.to_string())),
        }
    }
}

/// Closed world: anything not derivable is a contradiction, so only E and C
/// exist. Open world: underivable statements are Neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldAssumption {
    Cwa,
    Owa,
}

impl WorldAssumption {
    pub fn labels(self) -> &'static [Label] {
        match self {
            WorldAssumption::Cwa => &[Label::Entailment, Label::Contradiction],
            WorldAssumption::Owa => &Label::ALL,
        }
    }

    pub fn allows(self, label: Label) -> bool {
        self.labels().contains(&label)
    }
}

impl fmt::Display for WorldAssumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorldAssumption::Cwa => "cwa",
            WorldAssumption::Owa => "owa",
        })
    }
}

impl FromStr for WorldAssumption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cwa" => Ok(WorldAssumption::Cwa),
            "owa" => Ok(WorldAssumption::Owa),
            other => Err(format!("unknown world assumption {other:?} (expected cwa or owa)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("probability {value} for {label} is outside [0, 1]")]
    OutOfRange { label: Label, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    BadSum(f64),
    #[error("closed-world distribution has non-zero Neutral mass {0}")]
    NeutralUnderCwa(f64),
}

/// Normalized probabilities over {E, C, N}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    e: f64,
    c: f64,
    n: f64,
}

impl LabelDistribution {
    pub fn new(e: f64, c: f64, n: f64) -> Result<Self, DistributionError> {
        for (label, value) in [(Label::Entailment, e), (Label::Contradiction, c), (Label::Neutral, n)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(DistributionError::OutOfRange { label, value });
            }
        }
        let sum = e + c + n;
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::BadSum(sum));
        }
        Ok(LabelDistribution { e, c, n })
    }

    /// Closed-world distribution with the Neutral slot pinned to zero.
    pub fn cwa(e: f64, c: f64) -> Result<Self, DistributionError> {
        Self::new(e, c, 0.0)
    }

    /// Renormalizes non-negative weights. Returns `None` when every weight is zero.
    pub fn from_weights(e: f64, c: f64, n: f64) -> Option<Self> {
        let total = e + c + n;
        if !total.is_finite() || total <= 0.0 || e < 0.0 || c < 0.0 || n < 0.0 {
            return None;
        }
        Some(LabelDistribution { e: e / total, c: c / total, n: n / total })
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Entailment => self.e,
            Label::Contradiction => self.c,
            Label::Neutral => self.n,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.e, self.c, self.n]
    }

    /// Checks that the distribution is legal under `wa`.
    pub fn check(&self, wa: WorldAssumption) -> Result<(), DistributionError> {
        Self::new(self.e, self.c, self.n)?;
        if wa == WorldAssumption::Cwa && self.n != 0.0 {
            return Err(DistributionError::NeutralUnderCwa(self.n));
        }
        Ok(())
    }

    /// Most probable label among those legal under `wa`; exact ties resolve E > C > N.
    pub fn argmax(&self, wa: WorldAssumption) -> Result<Label, DistributionError> {
        self.check(wa)?;
        Ok(argmax3(self.as_array(), wa.labels()))
    }
}

/// Per-label scores after combining the distributions of x and ¬x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedScore {
    pub e: f64,
    pub c: f64,
    pub n: f64,
}

impl CombinedScore {
    pub fn get(&self, label: Label) -> f64 {
        self.as_array()[label.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.e, self.c, self.n]
    }

    pub fn total(&self) -> f64 {
        self.e + self.c + self.n
    }

    pub fn argmax(&self, wa: WorldAssumption) -> Label {
        argmax3(self.as_array(), wa.labels())
    }
}

fn argmax3(values: [f64; 3], labels: &[Label]) -> Label {
    let mut best = labels[0];
    for &label in &labels[1..] {
        // strict comparison keeps the earlier (higher-priority) label on ties
        if values[label.index()] > values[best.index()] {
            best = label;
        }
    }
    best
}
