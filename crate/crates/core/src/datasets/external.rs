//! Conversion of public reasoning-dataset releases into canonical records.
//!
//! Field paths per profile:
//!
//! | profile       | id            | context                 | questions                        | statement  | label                           | depth        |
//! |---------------|---------------|-------------------------|----------------------------------|------------|---------------------------------|--------------|
//! | `ruletaker`   | `id`          | `context`               | `questions[]`                    | `text`     | `label`: true/false             | `meta.QDep`  |
//! | `proofwriter` | `id`          | `theory`                | `questions` (object or array)    | `question` | `answer`: true/false/"Unknown"  | `QDep`       |
//! | `logicnli`    | key or index  | `facts[]` + `rules[]`   | `statements[]` zipped w/ `labels[]` | item    | entailment/contradiction/neutral/self_contradiction | none |
//!
//! LogicNLI `self_contradiction` maps to N: the premises decide neither the
//! statement nor its negation in a way that licenses E or C.

use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use super::DatasetError;
use crate::instance::{Instance, UNKNOWN_DEPTH};
use crate::label::Label;
use crate::negator::{has_logical_negation, parse_statement};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingProfile {
    RuleTaker,
    ProofWriter,
    LogicNli,
}

impl MappingProfile {
    pub fn name(self) -> &'static str {
        match self {
            MappingProfile::RuleTaker => "ruletaker",
            MappingProfile::ProofWriter => "proofwriter",
            MappingProfile::LogicNli => "logicnli",
        }
    }
}

impl FromStr for MappingProfile {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ruletaker" => Ok(MappingProfile::RuleTaker),
            "proofwriter" => Ok(MappingProfile::ProofWriter),
            "logicnli" => Ok(MappingProfile::LogicNli),
            _ => Err(DatasetError::UnknownProfile(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConversionReport {
    pub instances: Vec<Instance>,
    /// Statements outside the negator grammar. They are still emitted.
    pub unsupported_statements: usize,
}

/// Top-level JSON records: one per line, or a single array / id-keyed object.
fn records(text: &str) -> Result<Vec<(Option<String>, Value)>, DatasetError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if let Ok(whole) = serde_json::from_str::<Value>(trimmed) {
        match whole {
            Value::Array(items) => return Ok(items.into_iter().map(|v| (None, v)).collect()),
            Value::Object(map) if is_keyed_collection(&map) => {
                return Ok(map.into_iter().map(|(k, v)| (Some(k), v)).collect());
            }
            other => return Ok(vec![(None, other)]),
        }
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?;
        out.push((None, v));
    }
    Ok(out)
}

fn is_keyed_collection(map: &serde_json::Map<String, Value>) -> bool {
    !map.is_empty() && map.values().all(|v| v.is_object())
}

fn field<'a>(v: &'a Value, path: &str, record: usize) -> Result<&'a Value, DatasetError> {
    v.pointer(&format!("/{}", path.replace('.', "/")))
        .ok_or_else(|| DatasetError::SchemaMismatch { record, field: path.to_string() })
}

fn text_field(v: &Value, path: &str, record: usize) -> Result<String, DatasetError> {
    match field(v, path, record)? {
        Value::String(s) => Ok(s.clone()),
        other => Ok(other.to_string()),
    }
}

fn string_list(v: &Value, path: &str, record: usize) -> Result<Vec<String>, DatasetError> {
    match field(v, path, record)? {
        Value::Array(items) => {
            Ok(items.iter().map(|x| x.as_str().map(str::to_string).unwrap_or_else(|| x.to_string())).collect())
        }
        _ => Err(DatasetError::SchemaMismatch { record, field: path.to_string() }),
    }
}

fn depth_of(v: &Value, path: &str) -> i32 {
    match v.pointer(&format!("/{}", path.replace('.', "/"))) {
        Some(Value::Number(n)) => n.as_i64().map(|d| d as i32).unwrap_or(UNKNOWN_DEPTH),
        Some(Value::String(s)) => s.parse().unwrap_or(UNKNOWN_DEPTH),
        _ => UNKNOWN_DEPTH,
    }
}

fn map_label(v: &Value, record: usize, path: &str) -> Result<Label, DatasetError> {
    let bad = || DatasetError::Validation { line: record, reason: format!("unmappable label {v}") };
    match v {
        Value::Bool(true) => Ok(Label::Entailment),
        Value::Bool(false) => Ok(Label::Contradiction),
        Value::String(s) => match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "true" | "entailment" => Ok(Label::Entailment),
            "false" | "contradiction" => Ok(Label::Contradiction),
            "unknown" | "neutral" | "self_contradiction" => Ok(Label::Neutral),
            _ => Err(bad()),
        },
        Value::Null => Err(DatasetError::SchemaMismatch { record, field: path.to_string() }),
        _ => Err(bad()),
    }
}

fn is_rule(sentence: &str) -> bool {
    let lower = sentence.to_ascii_lowercase();
    let mut words = lower.split_whitespace();
    let first = words.next().unwrap_or("");
    let second = words.next().unwrap_or("");
    first == "if"
        || first == "all"
        || lower.contains(" then ")
        || lower.contains(" if and only if ")
        || matches!(second, "people" | "things" | "animals")
}

/// Splits a context paragraph into facts and rules.
pub fn split_context(context: &str) -> (Vec<String>, Vec<String>) {
    let mut facts = Vec::new();
    let mut rules = Vec::new();
    for raw in context.split_inclusive(['.', '!', '?']) {
        let sentence = raw.trim();
        if sentence.is_empty() {
            continue;
        }
        if is_rule(sentence) {
            rules.push(sentence.to_string());
        } else {
            facts.push(sentence.to_string());
        }
    }
    (facts, rules)
}

/// Logic tags read off the surface text of an externally sourced instance.
pub fn infer_logic_tags(facts: &[String], rules: &[String], statement: &str) -> Vec<String> {
    let mut tags = Vec::new();
    let lower_rules: Vec<String> = rules.iter().map(|r| format!(" {} ", r.to_ascii_lowercase())).collect();
    let any_rule = |needle: &str| lower_rules.iter().any(|r| r.contains(needle));
    if any_rule(" and ") {
        tags.push("conjunction");
    }
    if any_rule(" or ") {
        tags.push("disjunction");
    }
    if has_logical_negation(statement) || facts.iter().chain(rules).any(|s| has_logical_negation(s)) {
        tags.push("negation");
    }
    if !rules.is_empty() {
        tags.push("implication");
    }
    if any_rule(" if and only if ") {
        tags.push("equivalence");
    }
    if any_rule(" someone ")
        || any_rule(" something ")
        || any_rule(" all ")
        || any_rule(" people ")
        || any_rule(" things ")
    {
        tags.push("universal");
    }
    if any_rule(" there is ") || any_rule(" there exists ") {
        tags.push("existential");
    }
    tags.into_iter().map(str::to_string).collect()
}

fn make(
    id: String,
    facts: Vec<String>,
    rules: Vec<String>,
    statement: String,
    gold: Label,
    depth: i32,
    profile: MappingProfile,
) -> Instance {
    let logic_tags = infer_logic_tags(&facts, &rules, &statement);
    Instance { id, facts, rules, statement, gold, depth, logic_tags, source: profile.name().to_string() }
}

fn question_list(v: &Value, record: usize) -> Result<Vec<(Option<String>, &Value)>, DatasetError> {
    match field(v, "questions", record)? {
        Value::Array(items) => Ok(items.iter().map(|q| (None, q)).collect()),
        Value::Object(map) => Ok(map.iter().map(|(k, q)| (Some(k.clone()), q)).collect()),
        _ => Err(DatasetError::SchemaMismatch { record, field: "questions".into() }),
    }
}

pub fn convert_external_str(text: &str, profile: MappingProfile) -> Result<ConversionReport, DatasetError> {
    let mut instances = Vec::new();
    for (record, (key, v)) in records(text)?.into_iter().enumerate() {
        let record = record + 1;
        match profile {
            MappingProfile::RuleTaker | MappingProfile::ProofWriter => {
                let (context_path, text_path, label_path, depth_path) = match profile {
                    MappingProfile::RuleTaker => ("context", "text", "label", "meta.QDep"),
                    _ => ("theory", "question", "answer", "QDep"),
                };
                let base_id = key.clone().map(Ok).unwrap_or_else(|| text_field(&v, "id", record))?;
                let (facts, rules) = split_context(&text_field(&v, context_path, record)?);
                for (i, (qkey, q)) in question_list(&v, record)?.into_iter().enumerate() {
                    let id = match q.get("id").and_then(Value::as_str) {
                        Some(qid) => qid.to_string(),
                        None => format!("{base_id}-{}", qkey.unwrap_or_else(|| (i + 1).to_string())),
                    };
                    let statement = text_field(q, text_path, record)?;
                    let gold = map_label(field(q, label_path, record)?, record, label_path)?;
                    instances.push(make(
                        id,
                        facts.clone(),
                        rules.clone(),
                        statement,
                        gold,
                        depth_of(q, depth_path),
                        profile,
                    ));
                }
            }
            MappingProfile::LogicNli => {
                let base_id = match (key, v.get("id").and_then(Value::as_str)) {
                    (Some(k), _) => k,
                    (None, Some(id)) => id.to_string(),
                    (None, None) => record.to_string(),
                };
                let facts = string_list(&v, "facts", record)?;
                let rules = string_list(&v, "rules", record)?;
                let statements = string_list(&v, "statements", record)?;
                let labels = match field(&v, "labels", record)? {
                    Value::Array(items) => items.clone(),
                    _ => return Err(DatasetError::SchemaMismatch { record, field: "labels".into() }),
                };
                if labels.len() != statements.len() {
                    return Err(DatasetError::Validation {
                        line: record,
                        reason: format!("{} statements but {} labels", statements.len(), labels.len()),
                    });
                }
                for (i, (statement, label)) in statements.into_iter().zip(&labels).enumerate() {
                    let gold = map_label(label, record, "labels")?;
                    let id = format!("{base_id}-{}", i + 1);
                    instances.push(make(id, facts.clone(), rules.clone(), statement, gold, UNKNOWN_DEPTH, profile));
                }
            }
        }
    }
    let unsupported_statements = instances.iter().filter(|i| parse_statement(&i.statement).is_err()).count();
    if unsupported_statements > 0 {
        log::warn!("{unsupported_statements} statements fall outside the negator grammar");
    }
    Ok(ConversionReport { instances, unsupported_statements })
}

pub fn convert_external(path: &Path, profile: MappingProfile) -> Result<ConversionReport, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    convert_external_str(&text, profile)
}
