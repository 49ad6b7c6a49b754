//! Hypernym-based rule generalization.
//!
//! For every goal in the experience log, examples are split by reward, the
//! hypernyms of each example's type lemma are counted on both sides, and the
//! goal is lifted to `goal(X) :- hypernym(X).` rules: the information-gain
//! winner in `Ig` mode, or every hypernym within three edges of a positive
//! example in `Exhaustive` mode. Generalized rules are added next to the
//! induced ones, never in place of them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ilp::{build_ilp_task, goals, Example, ExperienceStore};
use crate::logic::{Atom, Rule};
use crate::taxonomy::Taxonomy;

/// Hypernym distance bound of exhaustive generalization.
pub const EXHAUSTIVE_LEVEL: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GainError {
    #[error("information gain needs a rule covering at least one positive example")]
    NoPositiveCoverage,
}

/// `total * (log2(p1 / (p1 + n1)) - log2(p0 / (p0 + n0)))`.
///
/// `p0`/`n0` are the positives/negatives covered by the rule, `p1`/`n1`
/// those still covered after adding the candidate literal, and `total` the
/// positives covered by both. A candidate covering no positive scores
/// negative infinity.
pub fn information_gain(p0: usize, n0: usize, p1: usize, n1: usize, total: usize) -> Result<f64, GainError> {
    if p0 == 0 {
        return Err(GainError::NoPositiveCoverage);
    }
    if p1 == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let before = p0 as f64 / (p0 + n0) as f64;
    let after = p1 as f64 / (p1 + n1) as f64;
    Ok(total as f64 * (after.log2() - before.log2()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    None,
    Exhaustive,
    Ig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub mode: GenMode,
    pub max_level: usize,
    /// Also lift goals whose examples are receptacles (e.g. `open`).
    pub generalize_locations: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("hypernym level must be 2 or 3, got {0}")]
pub struct LevelError(pub usize);

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::none()
    }
}

impl GenConfig {
    pub fn new(mode: GenMode, max_level: usize) -> Result<Self, LevelError> {
        if !(2..=3).contains(&max_level) {
            return Err(LevelError(max_level));
        }
        Ok(GenConfig { mode, max_level, generalize_locations: false })
    }

    pub fn none() -> Self {
        GenConfig { mode: GenMode::None, max_level: 3, generalize_locations: false }
    }

    pub fn is_active(&self) -> bool {
        self.mode != GenMode::None
    }
}

/// Per-hypernym example counts for one goal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HypEvidence {
    pub hyp_pos: BTreeMap<String, usize>,
    pub hyp_neg: BTreeMap<String, usize>,
    /// Smallest type-to-hypernym distance, preferring positive examples.
    pub distance: BTreeMap<String, usize>,
}

impl HypEvidence {
    pub fn candidates(&self) -> impl Iterator<Item = &str> {
        let mut all: Vec<&str> = self.hyp_pos.keys().chain(self.hyp_neg.keys()).map(String::as_str).collect();
        all.sort_unstable();
        all.dedup();
        all.into_iter()
    }

    pub fn pos(&self, h: &str) -> usize {
        self.hyp_pos.get(h).copied().unwrap_or(0)
    }

    pub fn neg(&self, h: &str) -> usize {
        self.hyp_neg.get(h).copied().unwrap_or(0)
    }
}

fn count_hypernyms(
    taxonomy: &Taxonomy,
    examples: &[Example],
    max_level: usize,
    counts: &mut BTreeMap<String, usize>,
    distance: &mut BTreeMap<String, usize>,
) {
    for ex in examples {
        let Some(t) = &ex.type_lemma else { continue };
        for hit in taxonomy.hypernyms_up_to(t, max_level) {
            *counts.entry(hit.lemma.clone()).or_default() += 1;
            distance
                .entry(hit.lemma)
                .and_modify(|d| *d = (*d).min(hit.distance))
                .or_insert(hit.distance);
        }
    }
}

/// Counts, for every hypernym within `max_level` of an example's type, how
/// many positive and negative examples reach it (once per example).
pub fn extract_hypernym_predicates(taxonomy: &Taxonomy, pos: &[Example], neg: &[Example], max_level: usize) -> HypEvidence {
    let mut ev = HypEvidence::default();
    let mut pos_dist = BTreeMap::new();
    let mut neg_dist = BTreeMap::new();
    count_hypernyms(taxonomy, pos, max_level, &mut ev.hyp_pos, &mut pos_dist);
    count_hypernyms(taxonomy, neg, max_level, &mut ev.hyp_neg, &mut neg_dist);
    for (h, d) in neg_dist {
        pos_dist.entry(h).or_insert(d);
    }
    ev.distance = pos_dist;
    ev
}

/// Scored generalization candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GenCandidate {
    pub hypernym: String,
    pub gain: f64,
    pub distance: usize,
}

/// The information-gain winner over `ev`, ties broken by smaller distance
/// and then lemma. `None` unless the winner strictly improves purity, so a
/// goal without negatives is never lifted.
pub fn best_generalization(ev: &HypEvidence, n_pos: usize, n_neg: usize) -> Option<GenCandidate> {
    if n_pos == 0 {
        return None;
    }
    let mut best: Option<GenCandidate> = None;
    for h in ev.candidates() {
        let p1 = ev.pos(h);
        if p1 == 0 {
            continue;
        }
        let gain = information_gain(n_pos, n_neg, p1, ev.neg(h), p1).expect("n_pos >= 1");
        let cand = GenCandidate { hypernym: h.to_string(), gain, distance: ev.distance[h] };
        let better = match &best {
            None => true,
            Some(b) => {
                cand.gain > b.gain
                    || (cand.gain == b.gain
                        && (cand.distance, cand.hypernym.as_str()) < (b.distance, b.hypernym.as_str()))
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.filter(|b| b.gain > 0.0)
}

fn is_location_goal(pos: &[Example]) -> bool {
    pos.iter().any(|e| !e.entity().starts_with('o'))
}

/// Lifts every goal in `store` to hypernym rules according to `cfg`.
pub fn get_generalized_rules(
    store: &ExperienceStore,
    taxonomy: &Taxonomy,
    cfg: &GenConfig,
    next_id: &mut impl FnMut() -> String,
) -> Vec<Rule> {
    let mut out = Vec::new();
    if !cfg.is_active() {
        return out;
    }
    for goal in goals(store) {
        let Ok(task) = build_ilp_task(store, &goal.action, goal.second.as_deref()) else { continue };
        if task.pos.is_empty() || (!cfg.generalize_locations && is_location_goal(&task.pos)) {
            continue;
        }
        let level = match cfg.mode {
            GenMode::Exhaustive => EXHAUSTIVE_LEVEL,
            _ => cfg.max_level,
        };
        let ev = extract_hypernym_predicates(taxonomy, &task.pos, &task.neg, level);
        let chosen: Vec<(String, usize)> = match cfg.mode {
            GenMode::None => Vec::new(),
            GenMode::Ig => best_generalization(&ev, task.pos.len(), task.neg.len())
                .map(|c| (c.hypernym, c.distance))
                .into_iter()
                .collect(),
            GenMode::Exhaustive => ev.hyp_pos.keys().map(|h| (h.clone(), ev.distance[h])).collect(),
        };
        for (h, d) in chosen {
            let mut rule = Rule::new(&next_id(), goal.head(), vec![Atom::unary_var(&h, "X")], Vec::new())
                .expect("single-literal body binds X");
            rule.generalized = true;
            rule.gen_distance = Some(d as u32);
            out.push(rule);
        }
    }
    out
}
