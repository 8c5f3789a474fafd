//! Enumeration oracles, independent of the chaining code they check.

use std::collections::BTreeSet;

use super::theory::{Atom, Theory};
use super::DatasetError;
use crate::label::Label;

/// Largest proposition count the oracles will enumerate.
pub const MAX_ENUMERATION_ATOMS: usize = 16;

fn index_of(props: &[(usize, usize)], atom: Atom) -> usize {
    props.binary_search(&atom.key()).expect("proposition indexed")
}

fn holds(props: &[(usize, usize)], model: u32, atom: Atom) -> bool {
    let bit = model >> index_of(props, atom) & 1 == 1;
    bit != atom.is_negative()
}

/// Classical entailment with rules read as material implications: E if
/// `query` is true in every model of the facts and rules, C if it is false
/// in every model, N otherwise.
pub fn brute_force_label(theory: &Theory, query: Atom) -> Result<Label, DatasetError> {
    let mut props: BTreeSet<(usize, usize)> = theory.propositions().into_iter().collect();
    props.insert(query.key());
    let props: Vec<_> = props.into_iter().collect();
    if props.len() > MAX_ENUMERATION_ATOMS {
        return Err(DatasetError::TooLargeForEnumeration(props.len()));
    }
    let mut any_model = false;
    let mut always_true = true;
    let mut always_false = true;
    for model in 0u32..(1u32 << props.len()) {
        if !theory.facts.iter().all(|&f| holds(&props, model, f)) {
            continue;
        }
        let rules_ok = theory
            .rules
            .iter()
            .all(|r| !r.body.iter().all(|&b| holds(&props, model, b)) || holds(&props, model, r.head));
        if !rules_ok {
            continue;
        }
        any_model = true;
        if holds(&props, model, query) {
            always_false = false;
        } else {
            always_true = false;
        }
        if !always_true && !always_false {
            break;
        }
    }
    if !any_model {
        return Err(DatasetError::InconsistencyDetected("theory has no classical model".into()));
    }
    Ok(match (always_true, always_false) {
        (true, _) => Label::Entailment,
        (_, true) => Label::Contradiction,
        _ => Label::Neutral,
    })
}

/// Closed-world closure by exhaustive search: each candidate set of true
/// propositions is kept iff naive iteration of the rules, with negative body
/// literals read against the candidate, reproduces it exactly. A stratified
/// theory has exactly one such set.
pub fn naive_cwa_closure(theory: &Theory) -> Result<BTreeSet<(usize, usize)>, DatasetError> {
    let props = theory.propositions();
    if props.len() > MAX_ENUMERATION_ATOMS {
        return Err(DatasetError::TooLargeForEnumeration(props.len()));
    }
    let mut found: Option<u32> = None;
    for candidate in 0u32..(1u32 << props.len()) {
        let mut current: u32 = 0;
        for f in &theory.facts {
            current |= 1 << index_of(&props, *f);
        }
        loop {
            let mut next = current;
            for rule in &theory.rules {
                let fires = rule.body.iter().all(|&b| {
                    let source = if b.is_negative() { candidate } else { current };
                    holds(&props, source, b)
                });
                if fires {
                    next |= 1 << index_of(&props, rule.head);
                }
            }
            if next == current {
                break;
            }
            current = next;
        }
        if current == candidate {
            if found.is_some() {
                return Err(DatasetError::UnstratifiedNegation);
            }
            found = Some(candidate);
        }
    }
    let model = found.ok_or(DatasetError::UnstratifiedNegation)?;
    Ok(props.iter().enumerate().filter(|(i, _)| model >> i & 1 == 1).map(|(_, &p)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::theory::{Attribute, Rule};

    fn theory(n_entities: usize, n_attributes: usize, facts: &[Atom], rules: Vec<Rule>) -> Theory {
        Theory {
            facts: facts.iter().copied().collect(),
            rules,
            entities: (0..n_entities).map(|i| format!("E{i}")).collect(),
            attributes: (0..n_attributes).map(|i| Attribute::adjective(&format!("a{i}"))).collect(),
        }
    }

    #[test]
    fn forced_by_rule() {
        let t = theory(1, 2, &[Atom::pos(0, 0)], vec![Rule::ground(vec![Atom::pos(0, 0)], Atom::pos(0, 1), 0)]);
        assert_eq!(brute_force_label(&t, Atom::pos(0, 1)).unwrap(), Label::Entailment);
        assert_eq!(brute_force_label(&t, Atom::neg(0, 1)).unwrap(), Label::Contradiction);
    }

    #[test]
    fn free_atom_is_neutral() {
        let t = theory(1, 2, &[Atom::pos(0, 0)], vec![]);
        assert_eq!(brute_force_label(&t, Atom::pos(0, 1)).unwrap(), Label::Neutral);
    }

    #[test]
    fn guard() {
        let facts: Vec<Atom> = (0..20).map(|i| Atom::pos(i, 0)).collect();
        let t = theory(20, 1, &facts, vec![]);
        assert!(matches!(brute_force_label(&t, Atom::pos(0, 0)), Err(DatasetError::TooLargeForEnumeration(20))));
    }

    #[test]
    fn negative_body_literal_enumeration() {
        let t = theory(
            1,
            3,
            &[Atom::pos(0, 0), Atom::neg(0, 1)],
            vec![Rule::ground(vec![Atom::pos(0, 0), Atom::neg(0, 1)], Atom::pos(0, 2), 0)],
        );
        assert_eq!(brute_force_label(&t, Atom::pos(0, 2)).unwrap(), Label::Entailment);
    }

    #[test]
    fn naive_closure_naf() {
        let t = theory(
            1,
            3,
            &[Atom::pos(0, 0)],
            vec![Rule::ground(vec![Atom::pos(0, 0), Atom::neg(0, 1)], Atom::pos(0, 2), 0)],
        );
        assert_eq!(naive_cwa_closure(&t).unwrap(), BTreeSet::from([(0, 0), (0, 2)]));
    }
}
