use super::EpisodeRecord;

/// Reward given to an unrewarded precondition action.
pub const SHAPED_REWARD: f64 = 0.5;

/// `precondition(C)` enables a later `target(_, type(C))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreconditionPair {
    pub precondition: &'static str,
    pub targets: &'static [&'static str],
}

impl PreconditionPair {
    /// `open C` before `insert _ into C` or `put _ on C`.
    pub const OPEN: PreconditionPair = PreconditionPair { precondition: "open", targets: &["insert", "put"] };
}

/// Gives [`SHAPED_REWARD`] to every zero-reward precondition step whose
/// receptacle is the target of a later positively rewarded step.
pub fn shape_rewards(episode: &EpisodeRecord, pairs: &[PreconditionPair]) -> EpisodeRecord {
    let mut out = episode.clone();
    for (i, step) in episode.steps.iter().enumerate() {
        if step.record.reward != 0.0 {
            continue;
        }
        let Some(atom) = &step.record.action else { continue };
        let Some(pair) = pairs.iter().find(|p| p.precondition == atom.pred && atom.arity() == 1) else {
            continue;
        };
        let Some(container) = step.record.facts.type_of(atom.first_arg()) else { continue };
        let enables_reward = episode.steps[i + 1..].iter().any(|later| {
            later.record.reward > 0.0
                && later.record.action.as_ref().is_some_and(|a| {
                    pair.targets.contains(&a.pred.as_str()) && a.second_arg() == Some(container)
                })
        });
        if enables_reward {
            out.steps[i].record.reward = SHAPED_REWARD;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::{EpisodeStep, Provenance, StepRecord};
    use crate::logic::{Atom, FactBase};

    fn step(action: Atom, reward: f64) -> EpisodeStep {
        let mut facts = FactBase::new();
        facts.insert_typed("c1", "fridge").unwrap();
        facts.insert_typed("c2", "wardrobe").unwrap();
        facts.insert_typed("o1", "apple").unwrap();
        EpisodeStep {
            observation: String::new(),
            admissible: Vec::new(),
            record: StepRecord { facts, action_text: action.to_string(), action: Some(action), reward, provenance: Provenance::Neural },
            candidates: Vec::new(),
        }
    }

    fn episode(steps: Vec<EpisodeStep>) -> EpisodeRecord {
        EpisodeRecord { episode: 0, steps, score: 0, max_score: 1 }
    }

    fn rewards(e: &EpisodeRecord) -> Vec<f64> {
        e.steps.iter().map(|s| s.record.reward).collect()
    }

    #[test]
    fn open_before_rewarded_insert() {
        let e = episode(vec![
            step(Atom::fact1("open", "c1"), 0.0),
            step(Atom::fact1("take", "o1"), 0.0),
            step(Atom::fact2("insert", "o1", "fridge"), 1.0),
        ]);
        assert_eq!(rewards(&shape_rewards(&e, &[PreconditionPair::OPEN])), vec![SHAPED_REWARD, 0.0, 1.0]);
    }

    #[test]
    fn no_positive_reward_unchanged() {
        let e = episode(vec![step(Atom::fact1("open", "c1"), 0.0), step(Atom::fact2("insert", "o1", "fridge"), 0.0)]);
        assert_eq!(shape_rewards(&e, &[PreconditionPair::OPEN]), e);
    }

    #[test]
    fn other_container_unchanged() {
        let e = episode(vec![step(Atom::fact1("open", "c1"), 0.0), step(Atom::fact2("insert", "o1", "wardrobe"), 1.0)]);
        assert_eq!(rewards(&shape_rewards(&e, &[PreconditionPair::OPEN])), vec![0.0, 1.0]);
    }

    #[test]
    fn reward_must_come_later() {
        let e = episode(vec![step(Atom::fact2("insert", "o1", "fridge"), 1.0), step(Atom::fact1("open", "c1"), 0.0)]);
        assert_eq!(rewards(&shape_rewards(&e, &[PreconditionPair::OPEN])), vec![1.0, 0.0]);
    }
}
