//! Training/evaluation loop, experiment orchestration and reporting.

mod report;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{augment_with_hypernyms, observation_tokens, select_action, symbolic_candidates, ExplorationPolicy, RuleLearner};
use crate::env::{
    derive_seed, make_split, Catalog, Difficulty, EnvError, GameConfig, GameFactory, ObservationParser, Split,
    DEFAULT_MAX_STEPS, DEFAULT_SPLIT_SEED,
};
use crate::generalize::{GenConfig, GenMode};
use crate::ilp::{shape_rewards, EpisodeRecord, EpisodeStep, LearnError, PreconditionPair, StepRecord};
use crate::logic::text::{parse_rules, render_rules};
use crate::logic::{LogicError, RuleStore};
use crate::taxonomy::{Taxonomy, TaxonomyError};

pub use report::{mean_sd, MetricsReport, MetricsRow, ReportFormat, AGGREGATION_NOTE};

/// Evaluation games per (difficulty, split, seed).
pub const TEST_GAMES: usize = 10;
pub const DEFAULT_EPISODES: usize = 100;

const TRAIN_SALT: u64 = 0x7261_696e;
const TEST_SALT: u64 = 0x7465_7374;
const POLICY_SALT: u64 = 0x706f_6c69;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("rule file: {0}")]
    Rules(#[from] LogicError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
    #[error("episode {episode} (seed {seed}): {source}")]
    Episode { episode: usize, seed: u64, source: Box<HarnessError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    TextOnly,
    ExplorerWoGen,
    ExplorerExhaustive,
    ExplorerIg2,
    ExplorerIg3,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::TextOnly, Variant::ExplorerWoGen, Variant::ExplorerExhaustive, Variant::ExplorerIg2, Variant::ExplorerIg3];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::TextOnly => "text_only",
            Variant::ExplorerWoGen => "explorer_wo_gen",
            Variant::ExplorerExhaustive => "explorer_exhaustive",
            Variant::ExplorerIg2 => "explorer_ig2",
            Variant::ExplorerIg3 => "explorer_ig3",
        }
    }

    /// Whether the rule pipeline runs at all.
    pub fn symbolic(&self) -> bool {
        *self != Variant::TextOnly
    }

    pub fn gen_config(&self) -> GenConfig {
        let cfg = |mode, level| GenConfig::new(mode, level).expect("level 2 or 3");
        match self {
            Variant::TextOnly | Variant::ExplorerWoGen => GenConfig::none(),
            Variant::ExplorerExhaustive => cfg(GenMode::Exhaustive, 3),
            Variant::ExplorerIg2 => cfg(GenMode::Ig, 2),
            Variant::ExplorerIg3 => cfg(GenMode::Ig, 3),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected one of {})", Variant::ALL.map(|v| v.as_str()).join(", ")))
    }
}

/// Catalog, entity split and taxonomy shared by every game of a run.
#[derive(Debug, Clone)]
pub struct World {
    pub factory: GameFactory,
    pub taxonomy: Taxonomy,
}

impl World {
    pub fn new(catalog: Catalog, taxonomy: Taxonomy, split_seed: u64) -> Self {
        let split = make_split(&catalog, &taxonomy, split_seed);
        World { factory: GameFactory::new(catalog, split), taxonomy }
    }

    pub fn household() -> Self {
        World::new(Catalog::household(), Taxonomy::household(), DEFAULT_SPLIT_SEED)
    }

    /// Loads optional replacement files, falling back to the bundled ones.
    pub fn load(taxonomy: Option<&Path>, catalog: Option<&Path>) -> Result<Self, HarnessError> {
        let taxonomy = match taxonomy {
            Some(p) => Taxonomy::parse(&read(p)?)?,
            None => Taxonomy::household(),
        };
        let catalog = match catalog {
            Some(p) => Catalog::parse(&read(p)?)?,
            None => Catalog::household(),
        };
        Ok(World::new(catalog, taxonomy, DEFAULT_SPLIT_SEED))
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// Everything an agent carries between episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub variant: Variant,
    pub learner: RuleLearner,
    pub policy: ExplorationPolicy,
    pub episodes_trained: usize,
}

impl AgentState {
    pub fn new(variant: Variant) -> Self {
        AgentState {
            variant,
            learner: RuleLearner::new(variant.gen_config()),
            policy: ExplorationPolicy::default(),
            episodes_trained: 0,
        }
    }

    pub fn rules(&self) -> &RuleStore {
        &self.learner.rules
    }
}

/// Plays one game without changing the agent. Training games explore with
/// the scheduled epsilon, evaluation games with its floor.
pub fn play_episode(agent: &AgentState, world: &World, game: &GameConfig, training: bool) -> Result<EpisodeRecord, HarnessError> {
    let (mut state, mut obs) = world.factory.new_game(game)?;
    let mut parser = ObservationParser::default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(game.seed, POLICY_SALT ^ agent.episodes_trained as u64));
    let schedule = agent.policy.schedule;
    let epsilon = if training { schedule.epsilon(agent.episodes_trained) } else { schedule.min };
    let locations = agent.learner.gen.generalize_locations;
    // symbolic actions that already went unrewarded this episode
    let mut failed: BTreeSet<String> = BTreeSet::new();
    // (observation, action) pairs already tried this episode; repeating one
    // cannot reveal anything new
    let mut tried: BTreeSet<(String, String)> = BTreeSet::new();
    let mut steps = Vec::new();

    while !obs.done {
        let facts = parser.parse(&obs);
        let admissible: Vec<_> = obs.admissible.iter().map(|a| (a.clone(), parser.action_atom(a))).collect();
        let candidates = if agent.variant.symbolic() {
            let lifted = augment_with_hypernyms(&facts, &world.taxonomy, locations);
            let mut c = symbolic_candidates(&agent.learner.rules, &lifted, &admissible);
            c.retain(|c| !failed.contains(&c.action));
            c
        } else {
            Vec::new()
        };
        let tokens = observation_tokens(&obs.text, &obs.inventory_text);
        let seen = obs.full_text();
        let fresh: Vec<String> =
            obs.admissible.iter().filter(|a| !tried.contains(&(seen.clone(), (*a).clone()))).cloned().collect();
        let pool = if fresh.is_empty() { &obs.admissible } else { &fresh };
        let decision = select_action(candidates, &agent.policy, &tokens, pool, epsilon, &mut rng);
        tried.insert((seen, decision.action.clone()));
        let next = state.step(&decision.action)?;
        if decision.provenance.is_symbolic() && next.reward_last <= 0.0 {
            failed.insert(decision.action.clone());
        }
        let atom = admissible.iter().find(|(a, _)| *a == decision.action).and_then(|(_, atom)| atom.clone());
        steps.push(EpisodeStep {
            observation: obs.full_text(),
            admissible: obs.admissible.clone(),
            record: StepRecord {
                facts,
                action_text: decision.action,
                action: atom,
                reward: next.reward_last,
                provenance: decision.provenance,
            },
            candidates: decision.candidates,
        });
        obs = next;
    }
    Ok(EpisodeRecord { episode: agent.episodes_trained, steps, score: state.score, max_score: state.max_score })
}

/// Plays one game; with `learn`, updates rules and policy from it afterwards.
pub fn run_episode(agent: &mut AgentState, world: &World, game: &GameConfig, learn: bool) -> Result<EpisodeRecord, HarnessError> {
    let record = play_episode(agent, world, game, learn)?;
    if learn {
        if agent.variant.symbolic() {
            agent.learner.learn_episode(&record, &world.taxonomy)?;
            agent.policy.update(&shape_rewards(&record, &[PreconditionPair::OPEN]));
        } else {
            agent.policy.update(&record);
        }
        agent.episodes_trained += 1;
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub difficulty: Difficulty,
    /// Evaluation splits; training always uses IN games.
    pub splits: Vec<Split>,
    pub episodes: usize,
    pub max_steps: usize,
    pub seeds: Vec<u64>,
    pub test_games: usize,
}

impl ExperimentConfig {
    pub fn new(variant: Variant, difficulty: Difficulty, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            variant,
            difficulty,
            splits: vec![Split::In, Split::Out],
            episodes: DEFAULT_EPISODES,
            max_steps: DEFAULT_MAX_STEPS,
            seeds,
            test_games: TEST_GAMES,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.episodes == 0 {
            return bad("episodes must be at least 1");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.test_games == 0 {
            return bad("test_games must be at least 1");
        }
        if self.splits.is_empty() {
            return bad("at least one evaluation split is required");
        }
        Ok(())
    }

    fn train_game(&self, seed: u64, episode: usize) -> GameConfig {
        GameConfig {
            difficulty: self.difficulty,
            split: Split::In,
            seed: derive_seed(seed, TRAIN_SALT.wrapping_add(episode as u64)),
            max_steps: self.max_steps,
        }
    }

    fn test_game(&self, seed: u64, split: Split, index: usize) -> GameConfig {
        GameConfig {
            difficulty: self.difficulty,
            split,
            seed: derive_seed(seed, TEST_SALT.wrapping_add(index as u64)),
            max_steps: self.max_steps,
        }
    }
}

/// Per-split evaluation of one trained agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub split: Split,
    pub steps: f64,
    pub score: f64,
    pub symbolic_steps: usize,
    pub total_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub train_scores: Vec<f64>,
    pub train_steps: Vec<usize>,
    pub evals: Vec<SplitEval>,
    pub rule_count: usize,
    pub exception_count: usize,
}

/// Trained agents and evaluation transcripts, for callers that want more
/// than the aggregate report.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub outcome: SeedOutcome,
    pub agent: AgentState,
    pub transcripts: Vec<(Split, EpisodeRecord)>,
}

/// Trains one agent on IN games for `cfg.episodes`, then evaluates it on
/// `cfg.test_games` fresh games per split.
pub fn run_seed(cfg: &ExperimentConfig, world: &World, seed: u64) -> Result<SeedRun, HarnessError> {
    let mut agent = AgentState::new(cfg.variant);
    let mut train_scores = Vec::with_capacity(cfg.episodes);
    let mut train_steps = Vec::with_capacity(cfg.episodes);
    for ep in 0..cfg.episodes {
        let rec = run_episode(&mut agent, world, &cfg.train_game(seed, ep), true)
            .map_err(|e| HarnessError::Episode { episode: ep, seed, source: Box::new(e) })?;
        train_scores.push(rec.normalized_score());
        train_steps.push(rec.len());
    }
    let mut evals = Vec::new();
    let mut transcripts = Vec::new();
    for &split in &cfg.splits {
        let mut steps = 0usize;
        let mut score = 0.0;
        let mut symbolic = 0usize;
        for i in 0..cfg.test_games {
            let rec = play_episode(&agent, world, &cfg.test_game(seed, split, i), false)
                .map_err(|e| HarnessError::Episode { episode: i, seed, source: Box::new(e) })?;
            steps += rec.len();
            score += rec.normalized_score();
            symbolic += rec.steps.iter().filter(|s| s.record.provenance.is_symbolic()).count();
            transcripts.push((split, rec));
        }
        let n = cfg.test_games as f64;
        evals.push(SplitEval { split, steps: steps as f64 / n, score: score / n, symbolic_steps: symbolic, total_steps: steps });
    }
    let outcome = SeedOutcome {
        seed,
        train_scores,
        train_steps,
        evals,
        rule_count: agent.rules().rules().len(),
        exception_count: agent.rules().exceptions().len(),
    };
    Ok(SeedRun { outcome, agent, transcripts })
}

/// Runs every seed (in parallel) and keeps the full per-seed results.
pub fn run_seeds(cfg: &ExperimentConfig, world: &World) -> Result<Vec<SeedRun>, HarnessError> {
    cfg.validate()?;
    cfg.seeds.par_iter().map(|&seed| run_seed(cfg, world, seed)).collect()
}

/// Mean and sample SD over seeds of per-seed means, one row per split.
pub fn run_experiment(cfg: &ExperimentConfig, world: &World) -> Result<MetricsReport, HarnessError> {
    let runs = run_seeds(cfg, world)?;
    let outcomes: Vec<SeedOutcome> = runs.into_iter().map(|r| r.outcome).collect();
    Ok(MetricsReport::from_outcomes(cfg, &outcomes))
}

/// Runs every (difficulty, variant) pair and merges the rows.
pub fn run_bench(
    variants: &[Variant],
    difficulties: &[Difficulty],
    base: &ExperimentConfig,
    world: &World,
) -> Result<MetricsReport, HarnessError> {
    let mut report = MetricsReport::default();
    for &difficulty in difficulties {
        for &variant in variants {
            let cfg = ExperimentConfig { variant, difficulty, ..base.clone() };
            report.rows.extend(run_experiment(&cfg, world)?.rows);
        }
    }
    report.sort_rows();
    Ok(report)
}

pub fn save_rules(store: &RuleStore, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, render_rules(store)).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

pub fn load_rules(path: &Path) -> Result<RuleStore, HarnessError> {
    Ok(parse_rules(&read(path)?)?)
}
