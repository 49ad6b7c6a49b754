use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ExperienceStore, LearnError};
use crate::logic::{is_entity_id, Atom, FactBase, Term};
use crate::taxonomy::Taxonomy;

/// State predicates describing where an entity is rather than what it is.
/// They are kept in the fact base but never become rule body literals.
pub const CONTEXT_PREDICATES: &[&str] = &["at_room", "in_inventory", "is_closed", "is_open"];

/// An action, with the second argument fixed for two-argument actions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Goal {
    pub action: String,
    pub second: Option<String>,
}

impl Goal {
    pub fn new(action: &str, second: Option<&str>) -> Self {
        Goal { action: action.to_string(), second: second.map(str::to_string) }
    }

    /// Goal of an action atom whose first argument is an entity.
    pub fn of_action(atom: &Atom) -> Option<Goal> {
        if !is_entity_id(atom.first_arg()) {
            return None;
        }
        match atom.second_arg() {
            None => Some(Goal::new(&atom.pred, None)),
            Some(s) if !is_entity_id(s) => Some(Goal::new(&atom.pred, Some(s))),
            Some(_) => None,
        }
    }

    pub fn matches(&self, atom: &Atom) -> bool {
        atom.pred == self.action
            && match &self.second {
                None => atom.arity() == 1,
                Some(s) => atom.second_arg() == Some(s.as_str()),
            }
    }

    /// Rule head with variable `X` in the first position.
    pub fn head(&self) -> Atom {
        let mut args = vec![Term::var("X")];
        if let Some(s) = &self.second {
            args.push(Term::constant(s));
        }
        Atom::new(&self.action, args).expect("goal names are valid atoms")
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.second {
            Some(s) => write!(f, "{}_{}", self.action, s),
            None => f.write_str(&self.action),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExampleKey {
    pub entity: String,
    pub episode: usize,
    pub step: usize,
}

/// The entity acted upon and the descriptive predicates true of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub key: ExampleKey,
    pub type_lemma: Option<String>,
    pub features: BTreeSet<String>,
}

impl Example {
    pub fn entity(&self) -> &str {
        &self.key.entity
    }

    pub fn from_facts(facts: &FactBase, entity: &str, episode: usize, step: usize) -> Self {
        let features = facts
            .unary_of(entity)
            .into_iter()
            .filter(|p| !CONTEXT_PREDICATES.contains(&p.as_str()))
            .collect();
        Example {
            key: ExampleKey { entity: entity.to_string(), episode, step },
            type_lemma: facts.type_of(entity).map(str::to_string),
            features,
        }
    }

    pub fn has(&self, pred: &str) -> bool {
        self.features.contains(pred)
    }

    /// True when every predicate of a unary body holds of this example.
    pub fn satisfies<'a>(&self, body: impl IntoIterator<Item = &'a str>) -> bool {
        body.into_iter().all(|p| self.has(p))
    }

    /// Adds every hypernym of the type lemma as a feature.
    pub fn with_hypernyms(&self, taxonomy: &Taxonomy) -> Example {
        let mut ex = self.clone();
        if let Some(t) = &self.type_lemma {
            ex.features.extend(taxonomy.all_hypernyms(t).into_iter().map(|h| h.lemma));
        }
        ex
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpTask {
    pub goal: Goal,
    pub predicate_list: BTreeSet<String>,
    pub pos: Vec<Example>,
    pub neg: Vec<Example>,
}

impl IlpTask {
    pub fn from_examples(goal: Goal, pos: Vec<Example>, neg: Vec<Example>) -> Self {
        let predicate_list = pos.iter().chain(&neg).flat_map(|e| e.features.iter().cloned()).collect();
        IlpTask { goal, predicate_list, pos, neg }
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.pos.iter().chain(&self.neg)
    }

    pub fn is_type_predicate(&self, pred: &str) -> bool {
        self.examples().any(|e| e.type_lemma.as_deref() == Some(pred))
    }
}

/// Every goal with at least one recorded step.
pub fn goals(store: &ExperienceStore) -> BTreeSet<Goal> {
    store
        .iter()
        .filter_map(|s| s.record.action.as_ref().and_then(Goal::of_action))
        .collect()
}

/// Splits the recorded steps of `action` (with `second` fixed) into positive
/// and zero/negative examples keyed by (entity, episode, step).
pub fn build_ilp_task(store: &ExperienceStore, action: &str, second: Option<&str>) -> Result<IlpTask, LearnError> {
    let goal = Goal::new(action, second);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for s in store.iter() {
        let Some(atom) = &s.record.action else { continue };
        if !goal.matches(atom) || !is_entity_id(atom.first_arg()) {
            continue;
        }
        let ex = Example::from_facts(&s.record.facts, atom.first_arg(), s.episode, s.step);
        if s.record.reward > 0.0 {
            pos.push(ex);
        } else {
            neg.push(ex);
        }
    }
    if pos.is_empty() && neg.is_empty() {
        return Err(LearnError::EmptyTask(goal.to_string()));
    }
    Ok(IlpTask::from_examples(goal, pos, neg))
}
