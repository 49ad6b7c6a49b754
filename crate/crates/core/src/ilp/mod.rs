//! Experience collection and rule induction.
//!
//! Steps are logged as (facts, action, reward, provenance). Per goal the log
//! is split by reward into positive and negative examples, a greedy
//! sequential-covering learner induces `action(X[,c]) :- feature(X).` rules,
//! and failures of symbolic steps are turned into abnormality exceptions.

mod exception;
mod induce;
mod shaping;
mod task;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, FactBase};

pub use exception::{learn_exception, learn_exception_ranked, ExceptionOutcome};
pub use induce::{induce_rules, MAX_BODY_LITERALS};
pub use shaping::{shape_rewards, PreconditionPair, SHAPED_REWARD};
pub use task::{build_ilp_task, goals, Example, ExampleKey, Goal, IlpTask, CONTEXT_PREDICATES};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no recorded steps for goal `{0}`")]
    EmptyTask(String),
    #[error("goal `{0}` has no positive examples")]
    NothingToLearn(String),
    #[error(transparent)]
    Logic(#[from] crate::logic::LogicError),
    #[error("experience log line {line}: {source}")]
    Log { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Who chose an action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Symbolic { rule_id: String, score: f64 },
    Neural,
}

impl Provenance {
    pub fn rule_id(&self) -> Option<&str> {
        match self {
            Provenance::Symbolic { rule_id, .. } => Some(rule_id),
            Provenance::Neural => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self, Provenance::Symbolic { .. })
    }
}

/// One state/action/reward triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub facts: FactBase,
    /// Action as text, e.g. `insert red apple into fridge`.
    pub action_text: String,
    /// Action as an atom; `None` for actions without an entity argument.
    pub action: Option<Atom>,
    pub reward: f64,
    pub provenance: Provenance,
}

/// A step as stored in the experience log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedStep {
    pub episode: usize,
    pub step: usize,
    #[serde(flatten)]
    pub record: StepRecord,
}

/// Ordered steps of one episode plus its outcome.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: Vec<EpisodeStep>,
    pub score: u32,
    pub max_score: u32,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn normalized_score(&self) -> f64 {
        if self.max_score == 0 {
            0.0
        } else {
            self.score as f64 / self.max_score as f64
        }
    }
}

/// A scored symbolic candidate as seen at decision time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    pub action: String,
    pub rule_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub observation: String,
    pub admissible: Vec<String>,
    #[serde(flatten)]
    pub record: StepRecord,
    #[serde(default)]
    pub candidates: Vec<CandidateLog>,
}

/// Append-only experience log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperienceStore {
    steps: Vec<LoggedStep>,
    episodes: usize,
    open_step: usize,
}

impl ExperienceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a new episode; subsequent records are numbered from 0.
    pub fn begin_episode(&mut self) -> usize {
        if !self.steps.is_empty() || self.open_step > 0 {
            self.episodes += 1;
        }
        self.open_step = 0;
        self.episodes
    }

    pub fn record_step(&mut self, record: StepRecord) -> &LoggedStep {
        let logged = LoggedStep { episode: self.episodes, step: self.open_step, record };
        self.open_step += 1;
        self.steps.push(logged);
        self.steps.last().expect("just pushed")
    }

    /// Appends a finished episode as its own log episode.
    pub fn record_episode(&mut self, episode: &EpisodeRecord) {
        self.begin_episode();
        for s in &episode.steps {
            self.record_step(s.record.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LoggedStep> {
        self.steps.iter()
    }

    pub fn episode_count(&self) -> usize {
        self.steps.iter().map(|s| s.episode).collect::<BTreeSet<_>>().len()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), LearnError> {
        for s in &self.steps {
            let line = serde_json::to_string(s).map_err(|e| LearnError::Log { line: 0, source: e })?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, LearnError> {
        let mut store = ExperienceStore::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let step: LoggedStep =
                serde_json::from_str(&line).map_err(|e| LearnError::Log { line: idx + 1, source: e })?;
            store.episodes = step.episode;
            store.open_step = step.step + 1;
            store.steps.push(step);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(reward: f64) -> StepRecord {
        let mut facts = FactBase::new();
        facts.insert_typed("o1", "apple").unwrap();
        StepRecord {
            facts,
            action_text: "take apple".into(),
            action: Some(Atom::fact1("take", "o1")),
            reward,
            provenance: Provenance::Neural,
        }
    }

    #[test]
    fn append_only_order() {
        let mut store = ExperienceStore::new();
        store.begin_episode();
        assert_eq!(store.record_step(step(1.0)).step, 0);
        assert_eq!(store.len(), 1);
        for i in 1..50 {
            let logged = store.record_step(step(i as f64));
            assert_eq!(logged.step, i);
        }
        assert_eq!(store.len(), 50);
        assert!(store.iter().enumerate().all(|(i, s)| s.step == i && s.episode == 0));
        store.begin_episode();
        assert_eq!(store.record_step(step(0.0)).episode, 1);
    }

    #[test]
    fn zero_reward_stored_verbatim() {
        let mut store = ExperienceStore::new();
        store.record_step(step(0.0));
        assert_eq!(store.iter().next().unwrap().record, step(0.0));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut store = ExperienceStore::new();
        store.begin_episode();
        store.record_step(step(1.0));
        let mut s = step(0.0);
        s.provenance = Provenance::Symbolic { rule_id: "r1".into(), score: 1.5 };
        store.record_step(s);
        store.begin_episode();
        store.record_step(step(0.5));
        let mut buf = Vec::new();
        store.write_jsonl(&mut buf).unwrap();
        let back = ExperienceStore::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.iter().collect::<Vec<_>>(), store.iter().collect::<Vec<_>>());
        assert_eq!(back.episode_count(), 2);
    }
}
