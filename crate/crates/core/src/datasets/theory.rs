use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// A signed ground literal `attribute(subject)` or `¬attribute(subject)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub subject: usize,
    pub attribute: usize,
    pub sign: Sign,
}

impl Atom {
    pub fn pos(subject: usize, attribute: usize) -> Atom {
        Atom { subject, attribute, sign: Sign::Positive }
    }

    pub fn neg(subject: usize, attribute: usize) -> Atom {
        Atom { subject, attribute, sign: Sign::Negative }
    }

    pub fn negated(self) -> Atom {
        Atom { sign: self.sign.flip(), ..self }
    }

    pub fn positive(self) -> Atom {
        Atom { sign: Sign::Positive, ..self }
    }

    pub fn is_negative(self) -> bool {
        self.sign == Sign::Negative
    }

    /// The unsigned proposition.
    pub fn key(self) -> (usize, usize) {
        (self.subject, self.attribute)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bang = if self.is_negative() { "¬" } else { "" };
        write!(f, "{bang}a{}(e{})", self.attribute, self.subject)
    }
}

/// Surface shape a rule was generated from. Rules sharing a `group` were
/// grounded from one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleForm {
    Ground,
    Universal,
    Existential,
    Disjunctive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub body: Vec<Atom>,
    pub head: Atom,
    pub form: RuleForm,
    pub group: usize,
}

impl Rule {
    pub fn ground(body: Vec<Atom>, head: Atom, group: usize) -> Rule {
        Rule { body, head, form: RuleForm::Ground, group }
    }
}

/// A predicate in the generator vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Attribute {
    /// `is green` / `is not green`
    Adjective { word: String },
    /// `likes the cat` / `does not like the cat`
    Relation { third: String, base: String, object: String },
}

impl Attribute {
    pub fn adjective(word: &str) -> Attribute {
        Attribute::Adjective { word: word.to_string() }
    }

    pub fn relation(third: &str, base: &str, object: &str) -> Attribute {
        Attribute::Relation { third: third.into(), base: base.into(), object: object.into() }
    }

    /// Verb phrase agreeing with a singular subject.
    pub fn singular(&self, sign: Sign) -> String {
        match (self, sign) {
            (Attribute::Adjective { word }, Sign::Positive) => format!("is {word}"),
            (Attribute::Adjective { word }, Sign::Negative) => format!("is not {word}"),
            (Attribute::Relation { third, object, .. }, Sign::Positive) => format!("{third} {object}"),
            (Attribute::Relation { base, object, .. }, Sign::Negative) => format!("does not {base} {object}"),
        }
    }

    /// Verb phrase agreeing with `they`.
    pub fn plural(&self, sign: Sign) -> String {
        match (self, sign) {
            (Attribute::Adjective { word }, Sign::Positive) => format!("are {word}"),
            (Attribute::Adjective { word }, Sign::Negative) => format!("are not {word}"),
            (Attribute::Relation { base, object, .. }, Sign::Positive) => format!("{base} {object}"),
            (Attribute::Relation { base, object, .. }, Sign::Negative) => format!("do not {base} {object}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theory {
    pub facts: BTreeSet<Atom>,
    pub rules: Vec<Rule>,
    pub entities: Vec<String>,
    pub attributes: Vec<Attribute>,
}

impl Theory {
    /// Every unsigned proposition mentioned by a fact or rule, sorted.
    pub fn propositions(&self) -> Vec<(usize, usize)> {
        let mut set: BTreeSet<(usize, usize)> = self.facts.iter().map(|a| a.key()).collect();
        for rule in &self.rules {
            set.insert(rule.head.key());
            set.extend(rule.body.iter().map(|a| a.key()));
        }
        set.into_iter().collect()
    }

    /// All propositions over the vocabulary (`entities × attributes`).
    pub fn vocabulary(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.entities.len()).flat_map(move |e| (0..self.attributes.len()).map(move |a| (e, a)))
    }
}
