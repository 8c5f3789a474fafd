//! Surface negation of templated English statements.
//!
//! The grammar covers `<subject> <head> [not] <tail>.` where the head is a
//! copula (`is`, `are`, `was`, `were`), a modal (`can`, `will`, ...) or a
//! lexical verb handled through do-support (`likes` / `does not like`).
//! Negating a negative statement removes the marker instead of stacking a
//! second one, so `negate` is an involution on the supported grammar.
//!
//! Contracted markers (`isn't`, `doesn't`) and the split form `can not` are
//! detected by [`has_logical_negation`] but rejected by [`parse_statement`]:
//! negating them twice could not restore the original surface text.

use std::fmt;

use thiserror::Error;

const COPULAS: [&str; 4] = ["is", "are", "was", "were"];
const MODALS: [&str; 9] = ["can", "could", "will", "would", "may", "might", "must", "shall", "should"];
const DETERMINERS: [&str; 13] =
    ["the", "a", "an", "this", "that", "these", "those", "my", "his", "her", "its", "our", "their"];
/// Quantifiers, connectives and negative quantifiers whose negation is not a
/// surface `not` insertion.
const BLOCKED: [&str; 20] = [
    "no",
    "never",
    "nothing",
    "nobody",
    "none",
    "neither",
    "nor",
    "if",
    "then",
    "and",
    "or",
    "all",
    "every",
    "each",
    "someone",
    "something",
    "somebody",
    "everyone",
    "everything",
    "everybody",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NegatorError {
    #[error("unsupported statement pattern ({reason}): {text:?}")]
    UnsupportedPattern { text: String, reason: &'static str },
    #[error("cannot conjugate verb {verb:?}")]
    UnknownVerbConjugation { verb: String },
}

fn unsupported(text: &str, reason: &'static str) -> NegatorError {
    NegatorError::UnsupportedPattern { text: text.to_string(), reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Head {
    /// The copula token as written.
    Copula(String),
    /// The bare modal (`can` for both `can` and `cannot`).
    Modal(String),
    /// Lexical verb. `verb` is the finite form when positive and the base
    /// form when negative; `third_person` selects `does` over `do`.
    DoSupport { verb: String, third_person: bool },
}

/// Parsed statement. `render` reproduces the normalized input exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatementForm {
    pub subject: String,
    pub head: Head,
    pub polarity: Polarity,
    pub tail: String,
}

impl StatementForm {
    pub fn render(&self) -> String {
        let mut words: Vec<String> = vec![self.subject.clone()];
        match (&self.head, self.polarity) {
            (Head::Copula(v), Polarity::Positive) => words.push(v.clone()),
            (Head::Copula(v), Polarity::Negative) => {
                words.push(v.clone());
                words.push("not".into());
            }
            (Head::Modal(m), Polarity::Positive) => words.push(m.clone()),
            (Head::Modal(m), Polarity::Negative) => {
                if m.eq_ignore_ascii_case("can") {
                    words.push(format!("{m}not"));
                } else {
                    words.push(m.clone());
                    words.push("not".into());
                }
            }
            (Head::DoSupport { verb, .. }, Polarity::Positive) => words.push(verb.clone()),
            (Head::DoSupport { verb, third_person }, Polarity::Negative) => {
                words.push(if *third_person { "does" } else { "do" }.into());
                words.push("not".into());
                words.push(verb.clone());
            }
        }
        if !self.tail.is_empty() {
            words.push(self.tail.clone());
        }
        format!("{}.", words.join(" "))
    }

    /// The same statement with polarity flipped and the head re-conjugated.
    pub fn negated(&self) -> Result<StatementForm, NegatorError> {
        let head = match &self.head {
            Head::DoSupport { verb, third_person: true } => {
                let verb = match self.polarity {
                    Polarity::Positive => third_person_to_base(verb),
                    Polarity::Negative => base_to_third_person(verb),
                }
                .ok_or_else(|| NegatorError::UnknownVerbConjugation { verb: verb.clone() })?;
                Head::DoSupport { verb, third_person: true }
            }
            other => other.clone(),
        };
        Ok(StatementForm { head, polarity: self.polarity.flip(), ..self.clone() })
    }
}

impl fmt::Display for StatementForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Collapses whitespace and ensures a single terminal period. `?` and `!`
/// endings are left alone so the parser can reject them.
pub fn normalize(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.is_empty() {
        return joined;
    }
    if joined.ends_with('?') || joined.ends_with('!') {
        return joined;
    }
    let body = joined.trim_end_matches(|c: char| c == '.' || c.is_whitespace());
    if body.is_empty() {
        return String::new();
    }
    format!("{body}.")
}

fn bare_token(token: &str) -> String {
    token.replace('\u{2019}', "'").trim_matches(|c: char| !c.is_alphanumeric() && c != '\'').to_lowercase()
}

fn is_marker(bare: &str) -> bool {
    bare == "not" || bare == "cannot" || bare.ends_with("n't")
}

/// True iff a negation marker (`not`, `cannot`, `n't`) occurs as a whole token.
pub fn has_logical_negation(text: &str) -> bool {
    text.split_whitespace().any(|t| is_marker(&bare_token(t)))
}

fn is_lower_word(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_lowercase())
}

fn looks_third_person(verb: &str) -> bool {
    matches!(verb, "has" | "does" | "goes")
        || (verb.len() >= 3 && verb.ends_with('s') && !verb.ends_with("ss") && !verb.ends_with("us"))
}

/// `likes` -> `like`, `tries` -> `try`, `kisses` -> `kiss`.
pub fn third_person_to_base(verb: &str) -> Option<String> {
    if !is_lower_word(verb) || !looks_third_person(verb) {
        return None;
    }
    let irregular = match verb {
        "has" => Some("have"),
        "does" => Some("do"),
        "goes" => Some("go"),
        _ => None,
    };
    if let Some(base) = irregular {
        return Some(base.to_string());
    }
    if verb.ends_with("ies") && verb.len() > 4 {
        return Some(format!("{}y", &verb[..verb.len() - 3]));
    }
    for suffix in ["sses", "shes", "ches", "xes", "zzes", "oes"] {
        if verb.ends_with(suffix) {
            return Some(verb[..verb.len() - 2].to_string());
        }
    }
    Some(verb[..verb.len() - 1].to_string())
}

/// `like` -> `likes`, `try` -> `tries`, `kiss` -> `kisses`.
pub fn base_to_third_person(verb: &str) -> Option<String> {
    if !is_lower_word(verb) {
        return None;
    }
    let irregular = match verb {
        "have" => Some("has"),
        "do" => Some("does"),
        "go" => Some("goes"),
        _ => None,
    };
    if let Some(form) = irregular {
        return Some(form.to_string());
    }
    // a base ending in a single `s` has no unambiguous inverse
    if verb.ends_with('s') && !verb.ends_with("ss") {
        return None;
    }
    let bytes = verb.as_bytes();
    let n = bytes.len();
    if n >= 2 && bytes[n - 1] == b'y' && !b"aeiou".contains(&bytes[n - 2]) {
        return Some(format!("{}ies", &verb[..n - 1]));
    }
    if ["ss", "sh", "ch", "x", "zz", "o"].iter().any(|s| verb.ends_with(s)) {
        return Some(format!("{verb}es"));
    }
    Some(format!("{verb}s"))
}

fn is_head_token(lower: &str) -> bool {
    COPULAS.contains(&lower) || MODALS.contains(&lower) || matches!(lower, "cannot" | "do" | "does" | "did")
}

pub fn parse_statement(text: &str) -> Result<StatementForm, NegatorError> {
    let normalized = normalize(text);
    if normalized.is_empty() {
        return Err(unsupported(text, "empty statement"));
    }
    let Some(body) = normalized.strip_suffix('.') else {
        return Err(unsupported(text, "statement must end with a period"));
    };
    let tokens: Vec<&str> = body.split(' ').collect();
    for token in &tokens {
        let bare = bare_token(token);
        if bare.contains('\'') {
            return Err(unsupported(text, "contractions and possessives"));
        }
        if BLOCKED.contains(&bare.as_str()) {
            return Err(unsupported(text, "quantified, compound or negative-quantifier statement"));
        }
    }
    if tokens.len() < 2 {
        return Err(unsupported(text, "no subject/head split"));
    }
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();

    let head_at = if DETERMINERS.contains(&lower[0].as_str()) {
        (2..tokens.len())
            .find(|&i| is_head_token(&lower[i]) || (is_lower_word(tokens[i]) && looks_third_person(tokens[i])))
    } else {
        Some(1)
    };
    let Some(k) = head_at else {
        return Err(unsupported(text, "no recognized head"));
    };
    let subject = tokens[..k].join(" ");
    let head_lower = lower[k].as_str();
    let next_is_not = lower.get(k + 1).map(String::as_str) == Some("not");

    let (head, polarity, tail_start) = if COPULAS.contains(&head_lower) {
        if next_is_not {
            (Head::Copula(tokens[k].to_string()), Polarity::Negative, k + 2)
        } else {
            (Head::Copula(tokens[k].to_string()), Polarity::Positive, k + 1)
        }
    } else if head_lower == "cannot" {
        let modal = &tokens[k][..tokens[k].len() - 3];
        (Head::Modal(modal.to_string()), Polarity::Negative, k + 1)
    } else if MODALS.contains(&head_lower) {
        if next_is_not {
            if head_lower == "can" {
                return Err(unsupported(text, "split form `can not`"));
            }
            (Head::Modal(tokens[k].to_string()), Polarity::Negative, k + 2)
        } else {
            (Head::Modal(tokens[k].to_string()), Polarity::Positive, k + 1)
        }
    } else if head_lower == "do" || head_lower == "does" {
        if !next_is_not {
            return Err(unsupported(text, "auxiliary do without negation"));
        }
        let Some(verb) = tokens.get(k + 2).filter(|v| is_lower_word(v)) else {
            return Err(unsupported(text, "missing lexical verb after do-support"));
        };
        (Head::DoSupport { verb: verb.to_string(), third_person: head_lower == "does" }, Polarity::Negative, k + 3)
    } else if head_lower == "did" {
        return Err(unsupported(text, "past-tense do-support"));
    } else if head_lower == "not" {
        return Err(unsupported(text, "negation without a head"));
    } else {
        if !is_lower_word(tokens[k]) {
            return Err(unsupported(text, "no recognized head"));
        }
        let verb = tokens[k].to_string();
        let third_person = looks_third_person(&verb);
        (Head::DoSupport { verb, third_person }, Polarity::Positive, k + 1)
    };

    let tail_tokens = tokens.get(tail_start..).unwrap_or(&[]);
    if tail_tokens.iter().any(|t| is_marker(&bare_token(t))) {
        return Err(unsupported(text, "negation marker outside the head"));
    }
    if tokens[..k].iter().any(|t| is_marker(&bare_token(t))) {
        return Err(unsupported(text, "negation marker in subject"));
    }
    let tail = tail_tokens.join(" ");
    if tail.is_empty() && !matches!(head, Head::DoSupport { .. }) {
        return Err(unsupported(text, "missing complement"));
    }
    Ok(StatementForm { subject, head, polarity, tail })
}

/// Flips the polarity of `text`; a negative statement becomes positive.
pub fn negate(text: &str) -> Result<String, NegatorError> {
    Ok(parse_statement(text)?.negated()?.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(text: &str) -> StatementForm {
        parse_statement(text).unwrap()
    }

    #[test]
    fn parse_copula() {
        let f = form("Bob is green.");
        assert_eq!(f.subject, "Bob");
        assert_eq!(f.head, Head::Copula("is".into()));
        assert_eq!(f.polarity, Polarity::Positive);
        assert_eq!(f.tail, "green");
        let f = form("Bob is not green.");
        assert_eq!(f.polarity, Polarity::Negative);
        assert_eq!(f.tail, "green");
    }

    #[test]
    fn parse_rejects_question() {
        assert!(matches!(
            parse_statement("Colorless ideas sleep furiously violently quickly?"),
            Err(NegatorError::UnsupportedPattern { .. })
        ));
    }

    #[test]
    fn negate_examples() {
        assert_eq!(negate("Bob is green.").unwrap(), "Bob is not green.");
        assert_eq!(negate("Bob is not green.").unwrap(), "Bob is green.");
        assert_eq!(negate("Alice likes Bob.").unwrap(), "Alice does not like Bob.");
        assert_eq!(negate("Alice does not like Bob.").unwrap(), "Alice likes Bob.");
    }

    #[test]
    fn negate_modals() {
        assert_eq!(negate("Bob can fly.").unwrap(), "Bob cannot fly.");
        assert_eq!(negate("Bob cannot fly.").unwrap(), "Bob can fly.");
        assert_eq!(negate("Bob will win.").unwrap(), "Bob will not win.");
        assert_eq!(negate("Bob must not go.").unwrap(), "Bob must go.");
        assert!(parse_statement("Bob can not fly.").is_err());
    }

    #[test]
    fn determiner_subjects() {
        assert_eq!(negate("The bald eagle likes the cat.").unwrap(), "The bald eagle does not like the cat.");
        assert_eq!(negate("The cat is not big.").unwrap(), "The cat is big.");
        assert_eq!(negate("The mice do not chase the cat.").unwrap(), "The mice chase the cat.");
    }

    #[test]
    fn plural_do_support() {
        assert_eq!(negate("They like Bob.").unwrap(), "They do not like Bob.");
        assert_eq!(negate("They do not like Bob.").unwrap(), "They like Bob.");
    }

    #[test]
    fn intransitive_verbs() {
        assert_eq!(negate("Bob runs.").unwrap(), "Bob does not run.");
        assert_eq!(negate("Bob does not run.").unwrap(), "Bob runs.");
    }

    #[test]
    fn unknown_conjugation() {
        assert!(matches!(negate("Bob does not focus."), Err(NegatorError::UnknownVerbConjugation { .. })));
    }

    #[test]
    fn blocked_patterns() {
        for s in [
            "Nothing is green.",
            "Someone is green.",
            "If Bob is big then Bob is green.",
            "Bob is big and green.",
            "Bob isn't green.",
            "Bob is not not green.",
            "Bob did not run.",
            "Bob not green.",
            "Bob is.",
            "Bob.",
            "",
        ] {
            assert!(
                matches!(parse_statement(s), Err(NegatorError::UnsupportedPattern { .. })),
                "{s:?} should be unsupported"
            );
        }
    }

    #[test]
    fn detection() {
        assert!(has_logical_negation("Bob is not green."));
        assert!(!has_logical_negation("Bob is green."));
        assert!(!has_logical_negation("The knot is tight."));
        assert!(!has_logical_negation("Nothing is green."));
        assert!(has_logical_negation("Bob cannot fly."));
        assert!(has_logical_negation("Bob isn't green."));
        assert!(has_logical_negation("Bob doesn\u{2019}t swim."));
        assert!(has_logical_negation("NOT here"));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Bob  is green"), "Bob is green.");
        assert_eq!(normalize("Bob is green."), "Bob is green.");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("  Bob is green ..  "), "Bob is green.");
        assert_eq!(normalize("Is Bob green?"), "Is Bob green?");
    }

    #[test]
    fn conjugation_round_trips() {
        for base in [
            "like", "try", "kiss", "fix", "buzz", "see", "play", "echo", "chase", "have", "do", "go", "die", "wash",
            "catch",
        ] {
            let third = base_to_third_person(base).unwrap();
            assert_eq!(third_person_to_base(&third).as_deref(), Some(base), "{base} -> {third}");
        }
    }

    #[test]
    fn render_round_trip() {
        for s in ["Bob is green.", "The cat cannot swim.", "Alice does not like the dog.", "Anne chases the mouse."] {
            assert_eq!(form(s).render(), s);
        }
        assert_eq!(form("Bob   is green").render(), "Bob is green.");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn statement() -> impl Strategy<Value = String> {
            let subject = prop::sample::select(vec!["Bob", "Anne", "The cat", "The bald eagle", "It"]);
            let adjective = prop::sample::select(vec!["green", "big", "kind", "rough", "young"]);
            let verb = prop::sample::select(vec!["like", "chase", "see", "need", "visit", "eat", "try", "kiss"]);
            let obj = prop::sample::select(vec!["the cat", "Bob", "the mouse"]);
            prop_oneof![
                (subject.clone(), prop::sample::select(vec!["is", "was"]), any::<bool>(), adjective)
                    .prop_map(|(s, c, neg, a)| format!("{s} {c} {}{a}.", if neg { "not " } else { "" })),
                (
                    subject.clone(),
                    prop::sample::select(vec!["can", "will", "must"]),
                    any::<bool>(),
                    verb.clone(),
                    obj.clone()
                )
                    .prop_map(|(s, m, neg, v, o)| match (m, neg) {
                        ("can", true) => format!("{s} cannot {v} {o}."),
                        (m, true) => format!("{s} {m} not {v} {o}."),
                        (m, false) => format!("{s} {m} {v} {o}."),
                    }),
                (subject, any::<bool>(), verb, obj).prop_map(|(s, neg, v, o)| {
                    if neg {
                        format!("{s} does not {v} {o}.")
                    } else {
                        format!("{s} {} {o}.", base_to_third_person(v).unwrap())
                    }
                }),
            ]
        }

        proptest! {
            #[test]
            fn involution(s in statement()) {
                let once = negate(&s).unwrap();
                prop_assert_eq!(negate(&once).unwrap(), normalize(&s));
            }

            #[test]
            fn polarity_xor(s in statement()) {
                let once = negate(&s).unwrap();
                prop_assert_ne!(has_logical_negation(&once), has_logical_negation(&s));
            }

            #[test]
            fn detection_is_total(s in ".*") {
                let _ = has_logical_negation(&s);
                let _ = normalize(&s);
                let _ = parse_statement(&s);
            }
        }
    }
}
