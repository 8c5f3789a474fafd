//! Canonical NLI instance model and its JSONL record.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{Label, WorldAssumption};

/// The seven first-order logic forms an instance may be tagged with.
pub const LOGIC_TAGS: [&str; 7] =
    ["conjunction", "disjunction", "negation", "implication", "equivalence", "universal", "existential"];

pub fn is_logic_tag(tag: &str) -> bool {
    LOGIC_TAGS.contains(&tag)
}

/// Depth sentinel for instances whose proof depth is unknown or undefined.
pub const UNKNOWN_DEPTH: i32 = -1;

/// One NLI item. Serializes to the canonical JSONL record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    #[serde(default)]
    pub facts: Vec<String>,
    #[serde(default)]
    pub rules: Vec<String>,
    pub statement: String,
    #[serde(rename = "label")]
    pub gold: Label,
    #[serde(default = "unknown_depth")]
    pub depth: i32,
    #[serde(rename = "logic", default)]
    pub logic_tags: Vec<String>,
    #[serde(default)]
    pub source: String,
}

fn unknown_depth() -> i32 {
    UNKNOWN_DEPTH
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceIssue {
    #[error("statement is empty")]
    EmptyStatement,
    #[error("label {label} is illegal under {assumption}")]
    IllegalLabelForAssumption { label: Label, assumption: WorldAssumption },
    #[error("unknown logic tag {0:?}")]
    UnknownLogicTag(String),
}

/// Every invariant an instance violates, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("instance {id}: {}", .issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError {
    pub id: String,
    pub issues: Vec<InstanceIssue>,
}

pub fn validate_instance(instance: &Instance, wa: WorldAssumption) -> Result<(), ValidationError> {
    let mut issues = Vec::new();
    if instance.statement.trim().is_empty() {
        issues.push(InstanceIssue::EmptyStatement);
    }
    if !wa.allows(instance.gold) {
        issues.push(InstanceIssue::IllegalLabelForAssumption { label: instance.gold, assumption: wa });
    }
    for tag in &instance.logic_tags {
        if !is_logic_tag(tag) {
            issues.push(InstanceIssue::UnknownLogicTag(tag.clone()));
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ValidationError { id: instance.id.clone(), issues })
    }
}

impl Instance {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.logic_tags.iter().any(|t| t == tag)
    }
}

/// An instance together with its negated statement ¬x and counterpart gold ȳ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegationPair {
    pub original: Instance,
    pub negated_statement: String,
    #[serde(rename = "counterpart_label")]
    pub counterpart_gold: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PairError {
    #[error("negated statement of {0} equals the original")]
    UnchangedStatement(String),
}

impl NegationPair {
    pub fn new(original: Instance, negated_statement: String) -> Result<Self, PairError> {
        if negated_statement == original.statement {
            return Err(PairError::UnchangedStatement(original.id));
        }
        let counterpart_gold = original.gold.counterpart();
        Ok(NegationPair { original, negated_statement, counterpart_gold })
    }

    /// The instance with the negated statement and counterpart gold substituted.
    pub fn negated_instance(&self) -> Instance {
        Instance { statement: self.negated_statement.clone(), gold: self.counterpart_gold, ..self.original.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(gold: Label) -> Instance {
        Instance {
            id: "t1".into(),
            facts: vec!["Bob is big.".into()],
            rules: vec!["If Bob is big then Bob is green.".into()],
            statement: "Bob is green.".into(),
            gold,
            depth: 1,
            logic_tags: vec!["implication".into()],
            source: "test".into(),
        }
    }

    #[test]
    fn well_formed_owa_instance_is_ok() {
        assert!(validate_instance(&sample(Label::Neutral), WorldAssumption::Owa).is_ok());
    }

    #[test]
    fn neutral_illegal_under_cwa() {
        let err = validate_instance(&sample(Label::Neutral), WorldAssumption::Cwa).unwrap_err();
        assert_eq!(
            err.issues,
            vec![InstanceIssue::IllegalLabelForAssumption { label: Label::Neutral, assumption: WorldAssumption::Cwa }]
        );
    }

    #[test]
    fn unknown_tag_rejected() {
        let mut i = sample(Label::Entailment);
        i.logic_tags.push("modal".into());
        let err = validate_instance(&i, WorldAssumption::Owa).unwrap_err();
        assert_eq!(err.issues, vec![InstanceIssue::UnknownLogicTag("modal".into())]);
    }

    #[test]
    fn all_issues_reported() {
        let mut i = sample(Label::Neutral);
        i.statement = "   ".into();
        i.logic_tags = vec!["modal".into(), "temporal".into()];
        let err = validate_instance(&i, WorldAssumption::Cwa).unwrap_err();
        assert_eq!(err.issues.len(), 4);
        assert_eq!(err.issues[0], InstanceIssue::EmptyStatement);
    }

    #[test]
    fn canonical_record_shape() {
        let line = r#"{"id": "a", "facts": ["Bob is big."], "rules": [], "statement": "Bob is big.", "label": "E", "depth": 0, "logic": ["negation"], "source": "logicnli"}"#;
        let i: Instance = serde_json::from_str(line).unwrap();
        assert_eq!(i.gold, Label::Entailment);
        assert_eq!(i.logic_tags, vec!["negation".to_string()]);
        let back = serde_json::to_string(&i).unwrap();
        assert_eq!(
            back,
            r#"{"id":"a","facts":["Bob is big."],"rules":[],"statement":"Bob is big.","label":"E","depth":0,"logic":["negation"],"source":"logicnli"}"#
        );
    }

    #[test]
    fn missing_depth_defaults_to_unknown() {
        let i: Instance = serde_json::from_str(r#"{"id":"a","statement":"x.","label":"N"}"#).unwrap();
        assert_eq!(i.depth, UNKNOWN_DEPTH);
    }

    #[test]
    fn pair_counterpart() {
        let p = NegationPair::new(sample(Label::Entailment), "Bob is not green.".into()).unwrap();
        assert_eq!(p.counterpart_gold, Label::Contradiction);
        assert_eq!(p.negated_instance().statement, "Bob is not green.");
        assert!(NegationPair::new(sample(Label::Entailment), "Bob is green.".into()).is_err());
    }
}
