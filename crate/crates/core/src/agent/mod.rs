//! Action selection: rule-derived candidates ranked by confidence, with a
//! learned exploration policy as the fallback.

mod learner;
mod policy;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ilp::{CandidateLog, Provenance};
use crate::logic::{ground_query, Atom, FactBase, Rule, RuleStore};
use crate::taxonomy::Taxonomy;

pub use learner::{LearnReport, RuleLearner};
pub use policy::{observation_tokens, EpsilonSchedule, ExplorationPolicy, FEATURE_BUCKETS, MAX_ADVANTAGE};

/// Confidence of one rule: accuracy plus, for generalized rules, proximity
/// to the entity in the taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub rule_id: String,
    pub accuracy: f64,
    pub proximity: f64,
    pub score: f64,
}

impl Confidence {
    /// Unused rules get accuracy 1 so that fresh rules are tried.
    pub fn of(rule: &Rule) -> Confidence {
        let s = &rule.stats;
        let accuracy = if s.uses == 0 { 1.0 } else { s.positive_uses as f64 / s.uses as f64 };
        let proximity = if rule.generalized { 1.0 / rule.gen_distance.unwrap_or(1).max(1) as f64 } else { 0.0 };
        Confidence { rule_id: rule.id.clone(), accuracy, proximity, score: accuracy + proximity }
    }
}

/// Records one resolved use of a rule. Unknown ids are ignored (the rule may
/// have been replaced since it was applied).
pub fn update_confidence(store: &mut RuleStore, rule_id: &str, reward: f64) {
    if let Some(rule) = store.get_mut(rule_id) {
        rule.stats.uses += 1;
        if reward > 0.0 {
            rule.stats.positive_uses += 1;
        }
    }
}

/// Adds `h(o)` for every hypernym `h` of every object's type. Receptacles
/// are lifted too when `locations` is set.
pub fn augment_with_hypernyms(facts: &FactBase, taxonomy: &Taxonomy, locations: bool) -> FactBase {
    let mut out = facts.clone();
    for (entity, lemma) in facts.types() {
        if !entity.starts_with('o') && !locations {
            continue;
        }
        for h in taxonomy.all_hypernyms(lemma) {
            let _ = out.insert(Atom::fact1(&h.lemma, entity));
        }
    }
    out
}

pub type Candidate = CandidateLog;

/// Derived actions that are admissible now, with the confidence of the best
/// rule deriving each, sorted by descending score then action string.
///
/// `admissible` pairs every admissible action with its atom, if any.
pub fn symbolic_candidates(store: &RuleStore, facts: &FactBase, admissible: &[(String, Option<Atom>)]) -> Vec<Candidate> {
    if store.rules().is_empty() {
        return Vec::new();
    }
    let by_atom: BTreeMap<&Atom, &str> =
        admissible.iter().filter_map(|(s, a)| a.as_ref().map(|a| (a, s.as_str()))).collect();
    let mut best: BTreeMap<&str, Candidate> = BTreeMap::new();
    for (head, rule_id) in ground_query(store, facts) {
        let Some(&action) = by_atom.get(&head) else { continue };
        let rule = store.get(&rule_id).expect("derived by a stored rule");
        let score = Confidence::of(rule).score;
        let better = best.get(action).is_none_or(|c| score > c.score);
        if better {
            best.insert(action, Candidate { action: action.to_string(), rule_id, score });
        }
    }
    let mut out: Vec<Candidate> = best.into_values().collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.action.cmp(&b.action)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: String,
    pub provenance: Provenance,
    pub candidates: Vec<Candidate>,
}

/// The top symbolic candidate if there is one, otherwise the policy's
/// epsilon-greedy pick among `admissible`.
///
/// # Panics
/// If `admissible` is empty.
pub fn select_action<R: Rng>(
    candidates: Vec<Candidate>,
    policy: &ExplorationPolicy,
    obs_tokens: &[String],
    admissible: &[String],
    epsilon: f64,
    rng: &mut R,
) -> Decision {
    assert!(!admissible.is_empty(), "select_action needs an admissible action");
    let top = candidates
        .iter()
        .filter(|c| admissible.contains(&c.action))
        .reduce(|best, c| if c.score > best.score || (c.score == best.score && c.action < best.action) { c } else { best });
    match top {
        Some(c) => Decision {
            action: c.action.clone(),
            provenance: Provenance::Symbolic { rule_id: c.rule_id.clone(), score: c.score },
            candidates,
        },
        None => Decision {
            action: policy.choose(obs_tokens, admissible, epsilon, rng),
            provenance: Provenance::Neural,
            candidates,
        },
    }
}
