//! English surface text for theories. Every statement produced here lies
//! inside the negator grammar.

use std::collections::BTreeMap;

use super::theory::{Atom, Rule, RuleForm, Theory};
use crate::instance::Instance;
use crate::label::Label;

pub fn render_atom(theory: &Theory, atom: Atom) -> String {
    format!("{} {}.", theory.entities[atom.subject], theory.attributes[atom.attribute].singular(atom.sign))
}

fn clause(theory: &Theory, atom: Atom) -> String {
    format!("{} {}", theory.entities[atom.subject], theory.attributes[atom.attribute].singular(atom.sign))
}

fn render_group(theory: &Theory, rules: &[&Rule]) -> String {
    let first = rules[0];
    let attr = |a: Atom| &theory.attributes[a.attribute];
    match first.form {
        RuleForm::Ground => {
            let body: Vec<String> = first.body.iter().map(|&b| clause(theory, b)).collect();
            format!("If {} then {}.", body.join(" and "), clause(theory, first.head))
        }
        RuleForm::Disjunctive => {
            let body: Vec<String> = rules
                .iter()
                .map(|r| r.body.iter().map(|&b| clause(theory, b)).collect::<Vec<_>>().join(" and "))
                .collect();
            format!("If {} then {}.", body.join(" or "), clause(theory, first.head))
        }
        RuleForm::Universal => {
            let body: Vec<String> = first.body.iter().map(|&b| attr(b).singular(b.sign)).collect();
            format!("If someone {} then they {}.", body.join(" and "), attr(first.head).plural(first.head.sign))
        }
        RuleForm::Existential => {
            let body: Vec<String> = first.body.iter().map(|&b| attr(b).singular(b.sign)).collect();
            format!("If someone {} then {}.", body.join(" and "), clause(theory, first.head))
        }
    }
}

/// One sentence per rule group, in order of first appearance.
pub fn render_rules(theory: &Theory) -> Vec<String> {
    let mut order: Vec<usize> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&Rule>> = BTreeMap::new();
    for rule in &theory.rules {
        let entry = groups.entry(rule.group).or_default();
        if entry.is_empty() {
            order.push(rule.group);
        }
        entry.push(rule);
    }
    order.iter().map(|g| render_group(theory, &groups[g])).collect()
}

pub fn render_facts(theory: &Theory) -> Vec<String> {
    theory.facts.iter().map(|&a| render_atom(theory, a)).collect()
}

pub fn render_instance(
    theory: &Theory,
    query: Atom,
    gold: Label,
    depth: i32,
    id: String,
    logic_tags: Vec<String>,
    source: &str,
) -> Instance {
    Instance {
        id,
        facts: render_facts(theory),
        rules: render_rules(theory),
        statement: render_atom(theory, query),
        gold,
        depth,
        logic_tags,
        source: source.to_string(),
    }
}
