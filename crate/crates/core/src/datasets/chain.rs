//! Forward chaining over signed ground literals.
//!
//! Open world: a negative literal is an ordinary fact that has to be derived.
//! Closed world: negative body literals are negation as failure, evaluated
//! against the final closure of lower strata.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::theory::{Atom, RuleForm, Sign, Theory};
use super::DatasetError;
use crate::label::{Label, WorldAssumption};

/// Derived literals with their minimal proof depth and the rule that
/// achieved it (absent for facts).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Closure {
    pub assumption: WorldAssumption,
    pub depths: BTreeMap<Atom, u32>,
    pub support: BTreeMap<Atom, usize>,
}

impl Closure {
    pub fn contains(&self, atom: Atom) -> bool {
        self.depths.contains_key(&atom)
    }

    pub fn depth(&self, atom: Atom) -> Option<u32> {
        self.depths.get(&atom).copied()
    }

    /// Gold label and proof depth of `query` (−1 when no finite proof decides it).
    pub fn label(&self, query: Atom) -> (Label, i32) {
        let d = |a: Atom| self.depth(a).map(|x| x as i32);
        match self.assumption {
            WorldAssumption::Owa => {
                if let Some(depth) = d(query) {
                    (Label::Entailment, depth)
                } else if let Some(depth) = d(query.negated()) {
                    (Label::Contradiction, depth)
                } else {
                    (Label::Neutral, -1)
                }
            }
            WorldAssumption::Cwa => {
                let derived = d(query.positive());
                match (query.sign, derived) {
                    (Sign::Positive, Some(depth)) => (Label::Entailment, depth),
                    (Sign::Positive, None) => (Label::Contradiction, -1),
                    (Sign::Negative, Some(depth)) => (Label::Contradiction, depth),
                    (Sign::Negative, None) => (Label::Entailment, -1),
                }
            }
        }
    }

    /// Literals and rule indices used in the minimal-depth proof of `atom`.
    pub fn proof(&self, theory: &Theory, atom: Atom) -> (BTreeSet<Atom>, BTreeSet<usize>) {
        let mut atoms = BTreeSet::new();
        let mut rules = BTreeSet::new();
        let mut stack = vec![atom];
        while let Some(a) = stack.pop() {
            if !self.contains(a) || !atoms.insert(a) {
                continue;
            }
            if let Some(&r) = self.support.get(&a) {
                rules.insert(r);
                for &b in &theory.rules[r].body {
                    if b.is_negative() && self.assumption == WorldAssumption::Cwa {
                        atoms.insert(b);
                    } else {
                        stack.push(b);
                    }
                }
            }
        }
        (atoms, rules)
    }

    /// Logic tags for a query, taken from the literals and rule shapes of its
    /// proof. Negation is tagged iff a negative literal participates.
    pub fn logic_tags(&self, theory: &Theory, query: Atom) -> Vec<String> {
        let deciding = match self.assumption {
            WorldAssumption::Owa => [query, query.negated()].into_iter().find(|a| self.contains(*a)),
            WorldAssumption::Cwa => Some(query.positive()).filter(|a| self.contains(*a)),
        };
        let (atoms, rules) = match deciding {
            Some(a) => self.proof(theory, a),
            None => Default::default(),
        };
        let mut tags = BTreeSet::new();
        if query.is_negative() || atoms.iter().any(|a| a.is_negative()) {
            tags.insert("negation");
        }
        for &r in &rules {
            let rule = &theory.rules[r];
            tags.insert("implication");
            if rule.body.len() > 1 {
                tags.insert("conjunction");
            }
            match rule.form {
                RuleForm::Ground => {}
                RuleForm::Universal => {
                    tags.insert("universal");
                }
                RuleForm::Existential => {
                    tags.insert("existential");
                }
                RuleForm::Disjunctive => {
                    tags.insert("disjunction");
                }
            }
        }
        // fixed seven-tag order
        crate::instance::LOGIC_TAGS.iter().filter(|t| tags.contains(*t)).map(|t| t.to_string()).collect()
    }
}

/// Least fixpoint of the theory. `max_depth` bounds the number of chaining
/// rounds (open world) or filters deeper literals out (closed world).
pub fn forward_chain(theory: &Theory, wa: WorldAssumption, max_depth: Option<u32>) -> Result<Closure, DatasetError> {
    let closure = match wa {
        WorldAssumption::Owa => chain_owa(theory, max_depth)?,
        WorldAssumption::Cwa => {
            let mut c = chain_cwa(theory)?;
            if let Some(bound) = max_depth {
                c.depths.retain(|_, d| *d <= bound);
                c.support.retain(|a, _| c.depths.contains_key(a));
            }
            c
        }
    };
    Ok(closure)
}

/// Round-based derivation: a literal first derived in round `r` has depth `r`.
/// `holds` decides negation-as-failure literals; `None` treats every body
/// literal as something to be derived.
fn rounds(
    theory: &Theory,
    facts: impl Iterator<Item = Atom>,
    naf: Option<&BTreeSet<(usize, usize)>>,
    max_depth: Option<u32>,
) -> (BTreeMap<Atom, u32>, BTreeMap<Atom, usize>) {
    let mut depths: BTreeMap<Atom, u32> = facts.map(|a| (a, 0)).collect();
    let mut support = BTreeMap::new();
    let mut round = 0u32;
    loop {
        if max_depth.is_some_and(|m| round >= m) {
            break;
        }
        round += 1;
        let mut fresh: Vec<(Atom, usize)> = Vec::new();
        for (i, rule) in theory.rules.iter().enumerate() {
            if depths.contains_key(&rule.head) || fresh.iter().any(|(a, _)| *a == rule.head) {
                continue;
            }
            let fires = rule.body.iter().all(|b| match naf {
                Some(closed) if b.is_negative() => !closed.contains(&b.key()),
                _ => depths.contains_key(b),
            });
            if fires {
                fresh.push((rule.head, i));
            }
        }
        if fresh.is_empty() {
            break;
        }
        for (atom, rule) in fresh {
            depths.insert(atom, round);
            support.insert(atom, rule);
        }
    }
    (depths, support)
}

fn chain_owa(theory: &Theory, max_depth: Option<u32>) -> Result<Closure, DatasetError> {
    let (depths, support) = rounds(theory, theory.facts.iter().copied(), None, max_depth);
    if let Some(a) = depths.keys().find(|a| a.sign == Sign::Positive && depths.contains_key(&a.negated())) {
        return Err(DatasetError::InconsistencyDetected(a.to_string()));
    }
    Ok(Closure { assumption: WorldAssumption::Owa, depths, support })
}

fn strata(theory: &Theory) -> Result<HashMap<(usize, usize), usize>, DatasetError> {
    let props = theory.propositions();
    let mut level: HashMap<(usize, usize), usize> = props.iter().map(|&p| (p, 0)).collect();
    let limit = props.len() + 1;
    loop {
        let mut changed = false;
        for rule in &theory.rules {
            let need = rule.body.iter().map(|b| level[&b.key()] + usize::from(b.is_negative())).max().unwrap_or(0);
            let head = level.get_mut(&rule.head.key()).expect("head proposition indexed");
            if *head < need {
                *head = need;
                changed = true;
                if need > limit {
                    return Err(DatasetError::UnstratifiedNegation);
                }
            }
        }
        if !changed {
            return Ok(level);
        }
    }
}

fn chain_cwa(theory: &Theory) -> Result<Closure, DatasetError> {
    if let Some(a) = theory.facts.iter().chain(theory.rules.iter().map(|r| &r.head)).find(|a| a.is_negative()) {
        return Err(DatasetError::NegativeLiteralUnderCwa(a.to_string()));
    }
    let level = strata(theory)?;
    let top = level.values().copied().max().unwrap_or(0);
    // membership, stratum by stratum
    let mut closed: BTreeSet<(usize, usize)> = theory.facts.iter().map(|a| a.key()).collect();
    for stratum in 0..=top {
        loop {
            let mut changed = false;
            for rule in theory.rules.iter().filter(|r| level[&r.head.key()] == stratum) {
                if closed.contains(&rule.head.key()) {
                    continue;
                }
                let fires = rule.body.iter().all(|b| closed.contains(&b.key()) != b.is_negative());
                if fires {
                    closed.insert(rule.head.key());
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    // depths on the program reduced by the now-fixed negative literals
    let (depths, support) = rounds(theory, theory.facts.iter().copied(), Some(&closed), None);
    debug_assert_eq!(depths.keys().map(|a| a.key()).collect::<BTreeSet<_>>(), closed);
    Ok(Closure { assumption: WorldAssumption::Cwa, depths, support })
}

/// Gold label and proof depth of `query` in `theory`.
pub fn label_statement(theory: &Theory, query: Atom, wa: WorldAssumption) -> Result<(Label, i32), DatasetError> {
    Ok(forward_chain(theory, wa, None)?.label(query))
}
