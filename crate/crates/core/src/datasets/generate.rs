//! Synthetic rulebases and labeled instances.
//!
//! Attributes are put in a random order and every rule points from
//! lower-ranked to higher-ranked attributes, so the dependency graph is a
//! DAG and closed-world negation is stratified. Under the open world each
//! attribute carries one sign used in facts, rule bodies and rule heads;
//! together with the DAG this keeps chaining complete with respect to
//! classical entailment.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::forward_chain;
use super::render::render_instance;
use super::theory::{Atom, Attribute, Rule, RuleForm, Sign, Theory};
use super::DatasetError;
use crate::instance::Instance;
use crate::label::{Label, WorldAssumption};
use crate::par::{self, Execution};
use crate::seed::{derive_u64, rng_for};

pub const MAX_GENERATION_RETRIES: usize = 50;
pub const MAX_DEPTH_LIMIT: u32 = 5;

const ENTITY_POOL: [&str; 10] = ["Anne", "Bob", "Charlie", "Dave", "Erin", "Fiona", "Gary", "Harry", "Alan", "Eric"];
const ADJECTIVE_POOL: [&str; 14] = [
    "big", "blue", "cold", "furry", "green", "kind", "nice", "quiet", "red", "rough", "round", "smart", "white",
    "young",
];
const RELATION_POOL: [(&str, &str, &str); 6] = [
    ("likes", "like", "the cat"),
    ("chases", "chase", "the dog"),
    ("sees", "see", "the mouse"),
    ("needs", "need", "the bear"),
    ("visits", "visit", "the squirrel"),
    ("eats", "eat", "the rabbit"),
];

fn attribute_pool() -> Vec<Attribute> {
    ADJECTIVE_POOL
        .iter()
        .map(|w| Attribute::adjective(w))
        .chain(RELATION_POOL.iter().map(|(t, b, o)| Attribute::relation(t, b, o)))
        .collect()
}

fn default_instances() -> usize {
    1000
}

fn default_queries() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulebaseSpec {
    pub n_entities: usize,
    pub n_attributes: usize,
    pub n_facts: usize,
    pub n_rules: usize,
    pub max_depth: u32,
    pub negation_rate: f64,
    pub assumption: WorldAssumption,
    pub seed: u64,
    /// Instances emitted by [`generate_dataset`].
    #[serde(default = "default_instances")]
    pub n_instances: usize,
    /// Upper bound on statements drawn from one theory.
    #[serde(default = "default_queries")]
    pub queries_per_theory: usize,
}

impl Default for RulebaseSpec {
    fn default() -> Self {
        RulebaseSpec {
            n_entities: 3,
            n_attributes: 4,
            n_facts: 4,
            n_rules: 4,
            max_depth: 3,
            negation_rate: 0.4,
            assumption: WorldAssumption::Owa,
            seed: 42,
            n_instances: default_instances(),
            queries_per_theory: default_queries(),
        }
    }
}

impl RulebaseSpec {
    pub fn check(&self) -> Result<(), DatasetError> {
        let bad = |msg: String| Err(DatasetError::InvalidSpec(msg));
        for (name, v) in [
            ("n_entities", self.n_entities),
            ("n_attributes", self.n_attributes),
            ("n_facts", self.n_facts),
            ("n_rules", self.n_rules),
            ("queries_per_theory", self.queries_per_theory),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.n_entities > ENTITY_POOL.len() {
            return bad(format!("n_entities must be at most {}", ENTITY_POOL.len()));
        }
        if self.n_attributes < 2 || self.n_attributes > ADJECTIVE_POOL.len() + RELATION_POOL.len() {
            return bad(format!("n_attributes must be in 2..={}", ADJECTIVE_POOL.len() + RELATION_POOL.len()));
        }
        if self.n_facts > self.n_entities * self.n_attributes {
            return bad("n_facts exceeds the number of propositions".into());
        }
        if self.max_depth > MAX_DEPTH_LIMIT {
            return bad(format!("max_depth must be at most {MAX_DEPTH_LIMIT}"));
        }
        if !(0.0..=1.0).contains(&self.negation_rate) {
            return bad("negation_rate must be in [0, 1]".into());
        }
        Ok(())
    }
}

fn one_attempt(spec: &RulebaseSpec, rng: &mut ChaCha8Rng) -> Theory {
    let mut names: Vec<&str> = ENTITY_POOL.to_vec();
    names.shuffle(rng);
    let entities: Vec<String> = names[..spec.n_entities].iter().map(|s| s.to_string()).collect();
    let mut pool = attribute_pool();
    pool.shuffle(rng);
    pool.truncate(spec.n_attributes);
    let attributes = pool;
    let n_attr = attributes.len();
    let owa = spec.assumption == WorldAssumption::Owa;

    let attr_sign: Vec<Sign> = (0..n_attr)
        .map(|_| if owa && rng.random_bool(spec.negation_rate) { Sign::Negative } else { Sign::Positive })
        .collect();
    let head_sign = |a: usize| if owa { attr_sign[a] } else { Sign::Positive };

    // facts lean towards low-ranked attributes so rules have something to fire on
    let low = n_attr.div_ceil(2);
    let mut facts = BTreeSet::new();
    let mut keys = BTreeSet::new();
    while facts.len() < spec.n_facts {
        let e = rng.random_range(0..spec.n_entities);
        let a = if rng.random_bool(0.7) { rng.random_range(0..low) } else { rng.random_range(0..n_attr) };
        if keys.insert((e, a)) {
            facts.insert(Atom { subject: e, attribute: a, sign: head_sign(a) });
        }
    }

    let mut rules = Vec::new();
    for group in 0..spec.n_rules {
        let head_attr = rng.random_range(1..n_attr);
        let max_body = head_attr.min(3);
        let roll: f64 = rng.random();
        let body_len = if roll < 0.6 || max_body == 1 {
            1
        } else if roll < 0.9 || max_body == 2 {
            2
        } else {
            3
        };
        let mut candidates: Vec<usize> = (0..head_attr).collect();
        candidates.shuffle(rng);
        let body_attrs: Vec<usize> = candidates[..body_len].to_vec();
        let body_sign = |a: usize, rng: &mut ChaCha8Rng| {
            if owa {
                attr_sign[a]
            } else if rng.random_bool(spec.negation_rate) {
                Sign::Negative
            } else {
                Sign::Positive
            }
        };
        let signs: Vec<Sign> = body_attrs.iter().map(|&a| body_sign(a, rng)).collect();
        let form_roll: f64 = rng.random();
        let form = if form_roll < 0.35 {
            RuleForm::Ground
        } else if form_roll < 0.7 {
            RuleForm::Universal
        } else if form_roll < 0.8 {
            RuleForm::Existential
        } else if head_attr >= 2 {
            RuleForm::Disjunctive
        } else {
            RuleForm::Ground
        };
        let lit = |e: usize, a: usize, s: Sign| Atom { subject: e, attribute: a, sign: s };
        match form {
            RuleForm::Ground => {
                let e = rng.random_range(0..spec.n_entities);
                let body = body_attrs.iter().zip(&signs).map(|(&a, &s)| lit(e, a, s)).collect();
                rules.push(Rule { body, head: lit(e, head_attr, head_sign(head_attr)), form, group });
            }
            RuleForm::Universal => {
                for e in 0..spec.n_entities {
                    let body = body_attrs.iter().zip(&signs).map(|(&a, &s)| lit(e, a, s)).collect();
                    rules.push(Rule { body, head: lit(e, head_attr, head_sign(head_attr)), form, group });
                }
            }
            RuleForm::Existential => {
                let target = rng.random_range(0..spec.n_entities);
                for e in 0..spec.n_entities {
                    let body = body_attrs.iter().zip(&signs).map(|(&a, &s)| lit(e, a, s)).collect();
                    rules.push(Rule { body, head: lit(target, head_attr, head_sign(head_attr)), form, group });
                }
            }
            RuleForm::Disjunctive => {
                let e = rng.random_range(0..spec.n_entities);
                let mut alternatives: Vec<usize> = (0..head_attr).collect();
                alternatives.shuffle(rng);
                for &a in &alternatives[..2] {
                    let s = body_sign(a, rng);
                    rules.push(Rule {
                        body: vec![lit(e, a, s)],
                        head: lit(e, head_attr, head_sign(head_attr)),
                        form,
                        group,
                    });
                }
            }
        }
    }
    Theory { facts, rules, entities, attributes }
}

/// Deterministic theory for `seed`; regenerates on inconsistency.
pub fn generate_theory(spec: &RulebaseSpec, seed: u64) -> Result<Theory, DatasetError> {
    spec.check()?;
    let mut rng = rng_for(seed, "theory", "");
    for _ in 0..MAX_GENERATION_RETRIES {
        let theory = one_attempt(spec, &mut rng);
        match forward_chain(&theory, spec.assumption, None) {
            Ok(_) => return Ok(theory),
            Err(DatasetError::InconsistencyDetected(_) | DatasetError::UnstratifiedNegation) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(DatasetError::GenerationRetryExceeded(MAX_GENERATION_RETRIES))
}

/// A generated instance with the theory and literal it was drawn from.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: Instance,
    pub theory: Arc<Theory>,
    pub query: Atom,
}

fn theory_seed(spec: &RulebaseSpec, index: usize) -> u64 {
    derive_u64(spec.seed, "theory-index", &index.to_string())
}

fn instances_from_theory(spec: &RulebaseSpec, index: usize) -> Result<Vec<GeneratedInstance>, DatasetError> {
    let theory = Arc::new(generate_theory(spec, theory_seed(spec, index))?);
    let closure = forward_chain(&theory, spec.assumption, None)?;
    let mut rng = rng_for(spec.seed, "queries", &index.to_string());

    // label -> depth -> candidate literals
    let mut pools: BTreeMap<Label, BTreeMap<i32, Vec<Atom>>> = BTreeMap::new();
    for (e, a) in theory.vocabulary() {
        for atom in [Atom::pos(e, a), Atom::neg(e, a)] {
            let (label, depth) = closure.label(atom);
            if depth > spec.max_depth as i32 {
                continue;
            }
            pools.entry(label).or_default().entry(depth).or_default().push(atom);
        }
    }
    let labels = spec.assumption.labels();
    let mut picked: Vec<(Atom, Label, i32)> = Vec::new();
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut cursor = index % labels.len();
    let mut misses = 0;
    while picked.len() < spec.queries_per_theory && misses < labels.len() {
        let label = labels[cursor % labels.len()];
        cursor += 1;
        let choice = pools.get(&label).and_then(|by_depth| {
            let depths: Vec<i32> = by_depth
                .iter()
                .filter(|(_, atoms)| atoms.iter().any(|a| !used.contains(&a.key())))
                .map(|(d, _)| *d)
                .collect();
            let depth = *depths.choose(&mut rng)?;
            let atoms: Vec<Atom> = by_depth[&depth].iter().copied().filter(|a| !used.contains(&a.key())).collect();
            atoms.choose(&mut rng).map(|a| (*a, depth))
        });
        match choice {
            Some((atom, depth)) => {
                misses = 0;
                used.insert(atom.key());
                picked.push((atom, label, depth));
            }
            None => misses += 1,
        }
    }

    let source = format!("synthetic-{}", spec.assumption);
    Ok(picked
        .into_iter()
        .enumerate()
        .map(|(q, (atom, label, depth))| {
            let id = format!("gen-{}-{index:05}-{q}", spec.seed);
            let tags = closure.logic_tags(&theory, atom);
            GeneratedInstance {
                instance: render_instance(&theory, atom, label, depth, id, tags, &source),
                theory: Arc::clone(&theory),
                query: atom,
            }
        })
        .collect())
}

/// Labeled instances drawn from successive theories until `spec.n_instances`
/// are collected. Output is identical under every execution policy.
pub fn generate_dataset(spec: &RulebaseSpec, exec: Execution) -> Result<Vec<GeneratedInstance>, DatasetError> {
    spec.check()?;
    const BATCH: usize = 64;
    let mut out: Vec<GeneratedInstance> = Vec::with_capacity(spec.n_instances);
    let mut next = 0usize;
    let mut empty_batches = 0;
    while out.len() < spec.n_instances {
        let batch = par::map_range(exec, BATCH, |i| instances_from_theory(spec, next + i));
        next += BATCH;
        let before = out.len();
        for produced in batch {
            out.extend(produced?);
        }
        if out.len() == before {
            empty_batches += 1;
            if empty_batches >= MAX_GENERATION_RETRIES {
                return Err(DatasetError::GenerationRetryExceeded(MAX_GENERATION_RETRIES));
            }
        }
    }
    out.truncate(spec.n_instances);
    Ok(out)
}
