use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::update_confidence;
use crate::generalize::{get_generalized_rules, GenConfig, GenMode};
use crate::ilp::{
    build_ilp_task, goals, induce_rules, learn_exception_ranked, shape_rewards, EpisodeRecord, Example,
    ExceptionOutcome, ExperienceStore, Goal, LearnError, PreconditionPair,
};
use crate::logic::{Rule, RuleStore};
use crate::taxonomy::Taxonomy;

/// What one call to [`RuleLearner::learn_episode`] changed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnReport {
    pub induced: usize,
    pub generalized: usize,
    pub retired: usize,
    pub exceptions: usize,
}

/// Rule store plus the cumulative experience it is learned from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleLearner {
    pub gen: GenConfig,
    pub rules: RuleStore,
    pub experience: ExperienceStore,
}

fn add_fresh(rules: &mut RuleStore, mut rule: Rule) -> Result<bool, LearnError> {
    if rules.contains_signature(&rule) {
        return Ok(false);
    }
    rule.id = rules.fresh_id();
    Ok(rules.add_rule(rule)?)
}

impl RuleLearner {
    pub fn new(gen: GenConfig) -> Self {
        RuleLearner { gen, rules: RuleStore::new(), experience: ExperienceStore::new() }
    }

    fn example(&self, ex: &Example, taxonomy: &Taxonomy) -> Example {
        ex.with_hypernyms(taxonomy)
    }

    /// End-of-episode update: shape rewards, score the rules that acted,
    /// learn exceptions from their failures, then re-induce and re-lift rules
    /// from all experience so far.
    pub fn learn_episode(&mut self, episode: &EpisodeRecord, taxonomy: &Taxonomy) -> Result<LearnReport, LearnError> {
        let shaped = shape_rewards(episode, &[PreconditionPair::OPEN]);
        let mut report = LearnReport::default();

        for step in &shaped.steps {
            if let Some(id) = step.record.provenance.rule_id() {
                update_confidence(&mut self.rules, id, step.record.reward);
            }
        }
        self.experience.record_episode(&shaped);
        let episode_no = self.experience.iter().last().map(|s| s.episode).unwrap_or(0);

        for (i, step) in shaped.steps.iter().enumerate() {
            let (Some(id), Some(atom)) = (step.record.provenance.rule_id(), &step.record.action) else { continue };
            if step.record.reward > 0.0 || self.rules.get(id).is_none() {
                continue;
            }
            let Some(goal) = Goal::of_action(atom) else { continue };
            let task = build_ilp_task(&self.experience, &goal.action, goal.second.as_deref())?;
            let rule = self.rules.get(id).expect("checked above");
            let body: Vec<String> = rule.body_pos.iter().map(|a| a.pred.clone()).collect();
            let failure =
                self.example(&Example::from_facts(&step.record.facts, atom.first_arg(), episode_no, i), taxonomy);
            let successes: Vec<Example> = task.pos.iter().map(|e| self.example(e, taxonomy)).collect();
            let past: Vec<Example> = task
                .neg
                .iter()
                .map(|e| self.example(e, taxonomy))
                .filter(|e| e.satisfies(body.iter().map(String::as_str)))
                .collect();
            if let ExceptionOutcome::Learned(_) =
                learn_exception_ranked(&mut self.rules, id, &failure, &successes, &past)?
            {
                report.exceptions += 1;
            }
        }

        let mut scratch = 0usize;
        let mut tmp_id = move || {
            scratch += 1;
            format!("t{scratch}")
        };
        for goal in goals(&self.experience) {
            let task = build_ilp_task(&self.experience, &goal.action, goal.second.as_deref())?;
            if task.pos.is_empty() {
                continue;
            }
            for rule in induce_rules(&task, &mut tmp_id)? {
                report.induced += add_fresh(&mut self.rules, rule)? as usize;
            }
        }

        if self.gen.is_active() {
            let lifted = get_generalized_rules(&self.experience, taxonomy, &self.gen, &mut tmp_id);
            if self.gen.mode == GenMode::Ig {
                // one lifted rule per goal: drop winners that lost their place
                let keep: BTreeSet<_> = lifted.iter().map(Rule::signature).collect();
                let heads: BTreeSet<_> = lifted.iter().map(|r| r.head.clone()).collect();
                let stale: Vec<String> = self
                    .rules
                    .rules()
                    .iter()
                    .filter(|r| r.generalized && heads.contains(&r.head) && !keep.contains(&r.signature()))
                    .map(|r| r.id.clone())
                    .collect();
                for id in stale {
                    self.rules.remove_rule(&id);
                    report.retired += 1;
                }
            }
            for rule in lifted {
                report.generalized += add_fresh(&mut self.rules, rule)? as usize;
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::{EpisodeStep, Provenance, StepRecord};
    use crate::logic::{Atom, FactBase};

    fn step(lemma: &str, adjectives: &[&str], target: &str, reward: f64, provenance: Provenance) -> EpisodeStep {
        let mut facts = FactBase::new();
        facts.insert_typed("o1", lemma).unwrap();
        for a in adjectives {
            facts.insert(Atom::fact1(a, "o1")).unwrap();
        }
        facts.insert(Atom::fact1("in_inventory", "o1")).unwrap();
        EpisodeStep {
            observation: String::new(),
            admissible: Vec::new(),
            record: StepRecord {
                facts,
                action_text: format!("insert {lemma} into {target}"),
                action: Some(Atom::fact2("insert", "o1", target)),
                reward,
                provenance,
            },
            candidates: Vec::new(),
        }
    }

    fn episode(steps: Vec<EpisodeStep>) -> EpisodeRecord {
        EpisodeRecord { episode: 0, steps, score: 0, max_score: 1 }
    }

    fn texts(store: &RuleStore) -> Vec<String> {
        store.rules().iter().chain(store.exceptions()).map(Rule::to_string).collect()
    }

    #[test]
    fn default_then_exception() {
        let t = Taxonomy::household();
        let mut l = RuleLearner::new(GenConfig::none());
        l.learn_episode(&episode(vec![step("apple", &["red"], "fridge", 1.0, Provenance::Neural)]), &t).unwrap();
        assert_eq!(texts(&l.rules), vec!["insert(X,fridge) :- apple(X)."]);
        let id = l.rules.rules()[0].id.clone();

        let used = Provenance::Symbolic { rule_id: id.clone(), score: 1.0 };
        let report = l
            .learn_episode(&episode(vec![step("apple", &["red", "rotten"], "fridge", 0.0, used)]), &t)
            .unwrap();
        assert_eq!(report.exceptions, 1);
        assert_eq!(
            texts(&l.rules),
            vec![format!("insert(X,fridge) :- apple(X), not ab_{id}(X)."), format!("ab_{id}(X) :- rotten(X).")]
        );
        assert_eq!(l.rules.rules()[0].stats.uses, 1);
        assert_eq!(l.rules.rules()[0].stats.positive_uses, 0);
    }

    #[test]
    fn ig_lift_added_alongside() {
        let t = Taxonomy::household();
        let mut l = RuleLearner::new(GenConfig::new(GenMode::Ig, 3).unwrap());
        l.learn_episode(
            &episode(vec![
                step("apple", &["red"], "fridge", 1.0, Provenance::Neural),
                step("orange", &["small"], "fridge", 1.0, Provenance::Neural),
                step("shirt", &["blue"], "fridge", 0.0, Provenance::Neural),
            ]),
            &t,
        )
        .unwrap();
        let all = texts(&l.rules);
        assert!(all.contains(&"insert(X,fridge) :- edible_fruit(X).".to_string()), "{all:?}");
        assert!(all.contains(&"insert(X,fridge) :- apple(X).".to_string()), "{all:?}");
        assert!(all.contains(&"insert(X,fridge) :- orange(X).".to_string()), "{all:?}");
    }

    #[test]
    fn no_learning_without_rewards() {
        let t = Taxonomy::household();
        let mut l = RuleLearner::new(GenConfig::new(GenMode::Exhaustive, 3).unwrap());
        l.learn_episode(&episode(vec![step("apple", &[], "wardrobe", 0.0, Provenance::Neural)]), &t).unwrap();
        assert!(l.rules.is_empty());
        assert_eq!(l.experience.len(), 1);
    }
}
