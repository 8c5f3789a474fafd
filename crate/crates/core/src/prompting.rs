//! Prompt templates and verbalizers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::label::{Label, LabelDistribution, WorldAssumption};

pub const FACTS: &str = "{FACTS}";
pub const RULES: &str = "{RULES}";
pub const STATEMENT: &str = "{STATEMENT}";
pub const MASK: &str = "{MASK}";

/// Mask literal for BERT-family scorers.
pub const DEFAULT_MASK: &str = "[MASK]";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {template:?} is missing placeholder {placeholder}")]
    MissingPlaceholder { template: String, placeholder: &'static str },
    #[error("template {template:?} repeats placeholder {placeholder}")]
    DuplicatePlaceholder { template: String, placeholder: &'static str },
    #[error("statement override is empty")]
    EmptyOverride,
    #[error("verbalizer {id:?} has no token for {label}")]
    MissingToken { id: String, label: Label },
    #[error("verbalizer {id:?} maps two labels to {token:?}")]
    DuplicateToken { id: String, token: String },
    #[error("no score for candidate token {0:?}")]
    MissingCandidateScore(String),
    #[error("score {score} for {token:?} is negative or not finite")]
    InvalidScore { token: String, score: f64 },
    #[error("all candidate scores are zero")]
    AllZeroScores,
    #[error("unknown template id {0:?}")]
    UnknownTemplate(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Parse { path: String, line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub pattern: String,
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, pattern: impl Into<String>) -> Result<Self, PromptError> {
        let t = PromptTemplate { id: id.into(), pattern: pattern.into() };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), PromptError> {
        for (placeholder, required) in [(MASK, true), (STATEMENT, true), (FACTS, true), (RULES, false)] {
            match self.pattern.matches(placeholder).count() {
                0 if required => {
                    return Err(PromptError::MissingPlaceholder { template: self.id.clone(), placeholder })
                }
                0 | 1 => {}
                _ => return Err(PromptError::DuplicatePlaceholder { template: self.id.clone(), placeholder }),
            }
        }
        Ok(())
    }

    /// Substitutes the instance into the pattern. `statement_override` swaps
    /// in ¬x while keeping facts and rules identical. When the pattern has no
    /// `{RULES}` slot the rules follow the facts.
    pub fn render(
        &self,
        instance: &Instance,
        statement_override: Option<&str>,
        mask: &str,
    ) -> Result<String, PromptError> {
        self.check()?;
        let statement = match statement_override {
            Some(s) if s.trim().is_empty() => return Err(PromptError::EmptyOverride),
            Some(s) => s,
            None => instance.statement.as_str(),
        };
        let facts = instance.facts.join(" ");
        let rules = instance.rules.join(" ");
        let (facts_slot, rules_slot) =
            if self.pattern.contains(RULES) { (facts, rules) } else { (join_nonempty(&facts, &rules), String::new()) };
        // placeholders are substituted in one left-to-right pass so text that
        // happens to contain a placeholder is never re-expanded
        let mut out = String::with_capacity(self.pattern.len() + facts_slot.len() + rules_slot.len() + statement.len());
        let mut rest = self.pattern.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            let replaced =
                [(FACTS, facts_slot.as_str()), (RULES, rules_slot.as_str()), (STATEMENT, statement), (MASK, mask)]
                    .into_iter()
                    .find(|(p, _)| tail.starts_with(p));
            match replaced {
                Some((p, value)) => {
                    out.push_str(value);
                    rest = &tail[p.len()..];
                }
                None => {
                    out.push('{');
                    rest = &tail[1..];
                }
            }
        }
        out.push_str(rest);
        Ok(out.split_whitespace().collect::<Vec<_>>().join(" "))
    }
}

fn join_nonempty(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a} {b}"),
    }
}

/// The prompt formats used in the experiments, plus two variants of the
/// inline `[MASK], Statement` style.
pub fn builtin_templates() -> Vec<PromptTemplate> {
    [
        ("A1", "[CLS] {FACTS} {RULES} [SEP] It was {MASK}. {STATEMENT}"),
        ("A2", "[CLS] {FACTS} {RULES}? [SEP] {MASK} {STATEMENT}"),
        ("A3", "[CLS] {FACTS} {RULES}? [SEP] It is {MASK} that {STATEMENT}"),
        ("A4", "[CLS] {FACTS} {RULES}? {MASK}, {STATEMENT}"),
        ("A5", "{FACTS} {RULES}? {MASK}, {STATEMENT}"),
        ("A6", "{FACTS} {RULES} [SEP] {MASK}, {STATEMENT}"),
    ]
    .into_iter()
    .map(|(id, pattern)| PromptTemplate { id: id.into(), pattern: pattern.into() })
    .collect()
}

pub fn builtin_template(id: &str) -> Result<PromptTemplate, PromptError> {
    builtin_templates().into_iter().find(|t| t.id == id).ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
}

/// Reads a JSONL file of `{"id": ..., "pattern": ...}` records.
pub fn load_templates(path: &Path) -> Result<Vec<PromptTemplate>, PromptError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: PromptTemplate = serde_json::from_str(line).map_err(|source| PromptError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        t.check()?;
        out.push(t);
    }
    Ok(out)
}

/// Label -> mask-slot candidate token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verbalizer {
    pub id: String,
    pub tokens: BTreeMap<Label, String>,
}

impl Default for Verbalizer {
    fn default() -> Self {
        Verbalizer {
            id: "default".into(),
            tokens: BTreeMap::from([
                (Label::Entailment, "true".to_string()),
                (Label::Contradiction, "false".to_string()),
                (Label::Neutral, "unknown".to_string()),
            ]),
        }
    }
}

impl Verbalizer {
    pub fn new(id: impl Into<String>, tokens: BTreeMap<Label, String>) -> Result<Self, PromptError> {
        let v = Verbalizer { id: id.into(), tokens };
        v.check(WorldAssumption::Cwa)?;
        Ok(v)
    }

    /// Reads a JSON map `{"E": "...", "C": "...", "N": "..."}`; the id is the file stem.
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
        let tokens: BTreeMap<Label, String> = serde_json::from_str(&text).map_err(|source| PromptError::Parse {
            path: path.display().to_string(),
            line: 1,
            source,
        })?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Verbalizer::new(id, tokens)
    }

    pub fn check(&self, wa: WorldAssumption) -> Result<(), PromptError> {
        let mut seen: Vec<&str> = Vec::new();
        for &label in wa.labels() {
            let token = self.token(label)?;
            if seen.contains(&token) {
                return Err(PromptError::DuplicateToken { id: self.id.clone(), token: token.to_string() });
            }
            seen.push(token);
        }
        Ok(())
    }

    pub fn token(&self, label: Label) -> Result<&str, PromptError> {
        self.tokens.get(&label).map(String::as_str).ok_or(PromptError::MissingToken { id: self.id.clone(), label })
    }

    pub fn label_of(&self, token: &str) -> Option<Label> {
        self.tokens.iter().find(|(_, t)| t.as_str() == token).map(|(l, _)| *l)
    }

    /// Candidate tokens in E, C, N order for the active label set.
    pub fn candidates(&self, wa: WorldAssumption) -> Result<Vec<String>, PromptError> {
        wa.labels().iter().map(|&l| self.token(l).map(str::to_string)).collect()
    }
}

/// Renormalizes candidate-token scores into a label distribution. Under CWA
/// the Neutral token is ignored.
pub fn distribution_from_scores(
    verbalizer: &Verbalizer,
    token_scores: &HashMap<String, f64>,
    wa: WorldAssumption,
) -> Result<LabelDistribution, PromptError> {
    verbalizer.check(wa)?;
    let mut weights = [0.0f64; 3];
    for &label in wa.labels() {
        let token = verbalizer.token(label)?;
        let score = *token_scores.get(token).ok_or_else(|| PromptError::MissingCandidateScore(token.to_string()))?;
        if !score.is_finite() || score < 0.0 {
            return Err(PromptError::InvalidScore { token: token.to_string(), score });
        }
        weights[label as usize] = score;
    }
    LabelDistribution::from_weights(weights[0], weights[1], weights[2]).ok_or(PromptError::AllZeroScores)
}
