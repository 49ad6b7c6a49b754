use std::cmp::Ordering;

use super::{Example, IlpTask, LearnError};
use crate::generalize::information_gain;
use crate::logic::{Atom, Rule};

/// Longest body an induced rule may have.
pub const MAX_BODY_LITERALS: usize = 3;

struct Scored<'a> {
    pred: &'a str,
    gain: f64,
    covered_pos: usize,
    is_type: bool,
}

impl Scored<'_> {
    /// Higher gain, then wider positive coverage, then type predicates,
    /// then the lexicographically smallest name.
    fn better_than(&self, other: &Scored<'_>) -> bool {
        match self.gain.partial_cmp(&other.gain).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => (self.covered_pos, self.is_type, std::cmp::Reverse(self.pred))
                > (other.covered_pos, other.is_type, std::cmp::Reverse(other.pred)),
        }
    }
}

fn best_literal<'a>(task: &'a IlpTask, body: &[&str], pos: &[&Example], neg: &[&Example]) -> Option<Scored<'a>> {
    let mut best: Option<Scored<'a>> = None;
    for pred in task.predicate_list.iter().map(String::as_str) {
        if body.contains(&pred) {
            continue;
        }
        let p1 = pos.iter().filter(|e| e.has(pred)).count();
        if p1 == 0 {
            continue;
        }
        let n1 = neg.iter().filter(|e| e.has(pred)).count();
        let gain = information_gain(pos.len(), neg.len(), p1, n1, p1).expect("p0 >= p1 >= 1");
        let cand = Scored { pred, gain, covered_pos: p1, is_type: task.is_type_predicate(pred) };
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            best = Some(cand);
        }
    }
    best
}

/// Greedy sequential covering with information gain as the literal score.
///
/// Each round starts from the bare goal head and adds the best literal until
/// no negative is covered, no literal has positive gain, or the body reaches
/// [`MAX_BODY_LITERALS`]. When no negatives are left to exclude the first
/// literal is still required (head safety); the zero-gain tie is then broken
/// by positive coverage. Covered positives are removed and the loop repeats.
pub fn induce_rules(task: &IlpTask, next_id: &mut impl FnMut() -> String) -> Result<Vec<Rule>, LearnError> {
    if task.pos.is_empty() {
        return Err(LearnError::NothingToLearn(task.goal.to_string()));
    }
    let head = task.goal.head();
    let mut uncovered: Vec<&Example> = task.pos.iter().collect();
    let mut rules = Vec::new();
    while !uncovered.is_empty() {
        let mut body: Vec<&str> = Vec::new();
        let mut pos = uncovered.clone();
        let mut neg: Vec<&Example> = task.neg.iter().collect();
        while body.len() < MAX_BODY_LITERALS && (body.is_empty() || !neg.is_empty()) {
            let Some(best) = best_literal(task, &body, &pos, &neg) else { break };
            let seeding = body.is_empty() && neg.is_empty();
            if best.gain <= 0.0 && !seeding {
                break;
            }
            body.push(best.pred);
            pos.retain(|e| e.has(best.pred));
            neg.retain(|e| e.has(best.pred));
        }
        if body.is_empty() {
            break;
        }
        let atoms = body.iter().map(|p| Atom::unary_var(p, "X")).collect();
        rules.push(Rule::new(&next_id(), head.clone(), atoms, Vec::new())?);
        uncovered.retain(|e| !e.satisfies(body.iter().copied()));
    }
    Ok(rules)
}
