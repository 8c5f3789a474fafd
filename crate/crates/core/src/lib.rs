//! Negation augmenting and negation debiasing for prompt-based NLI over
//! rule-based reasoning tasks.

pub mod analytics;
pub mod datasets;
pub mod engine;
pub mod instance;
pub mod label;
pub mod negator;
pub mod par;
pub mod pipeline;
pub mod prompting;
pub mod scoring;
pub mod seed;

pub use engine::{CalibrationReport, GammaMode, Mode, NandConfig, PairScores};
pub use instance::{Instance, NegationPair};
pub use label::{CombinedScore, Label, LabelDistribution, WorldAssumption};
pub use par::Execution;
