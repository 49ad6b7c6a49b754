//! End-to-end behaviour across simulator, parser, learner and harness.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nesy_tbg::agent::RuleLearner;
use nesy_tbg::env::{display_lemma, Difficulty, EnvError, GameConfig, Location, ObservationParser, Split};
use nesy_tbg::generalize::GenConfig;
use nesy_tbg::harness::{
    load_rules, play_episode, run_episode, run_seeds, save_rules, AgentState, ExperimentConfig, HarnessError, Variant,
    World,
};
use nesy_tbg::ilp::{EpisodeRecord, EpisodeStep, Provenance, StepRecord};
use nesy_tbg::logic::text::STORE_HEADER;
use nesy_tbg::logic::{ground_query, Atom, LogicError, RuleStore};

fn games() -> impl Iterator<Item = GameConfig> {
    Difficulty::ALL
        .iter()
        .flat_map(|&d| Split::ALL.iter().flat_map(move |&s| (0..15).map(move |seed| GameConfig::new(d, s, seed))))
}

#[test]
fn parsed_facts_cover_visible_entities() {
    let world = World::household();
    for game in games() {
        let (state, obs) = world.factory.new_game(&game).unwrap();
        let mut parser = ObservationParser::default();
        let facts = parser.parse(&obs);
        for o in state.objects.iter().filter(|o| match o.location {
            Location::Floor(r) => r == state.agent_room,
            Location::On(i) | Location::In(i) => state.receptacles[i].room == state.agent_room && state.receptacles[i].open,
            Location::Inventory => true,
        }) {
            let id = parser.registry().lookup_object(&o.display_name()).unwrap_or_else(|| panic!("{game:?}: {o:?}"));
            assert_eq!(facts.type_of(id), Some(o.lemma.as_str()), "{game:?}");
            for adj in &o.adjectives {
                assert!(facts.contains(&Atom::fact1(adj, id)), "{game:?}: {adj}({id})");
            }
        }
        let here: Vec<&str> = facts.types().filter(|(e, _)| e.starts_with('c')).map(|(_, l)| l).collect();
        for r in state.receptacles.iter().filter(|r| r.room == state.agent_room) {
            assert!(here.contains(&r.lemma.as_str()), "{game:?}: {} missing from {here:?}", r.lemma);
        }
    }
}

#[test]
fn replay_is_deterministic() {
    let world = World::household();
    for game in games().step_by(7) {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let (mut state, mut obs) = world.factory.new_game(&game).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(game.seed);
            let mut trace = vec![obs.clone()];
            while !obs.done {
                let a = obs.admissible.choose(&mut rng).unwrap().clone();
                obs = state.step(&a).unwrap();
                trace.push(obs.clone());
            }
            runs.push((state, trace));
        }
        assert_eq!(runs[0], runs[1], "{game:?}");
    }
}

#[test]
fn admissible_actions_always_execute() {
    let world = World::household();
    for game in games() {
        let (mut state, mut obs) = world.factory.new_game(&game).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(game.seed ^ 0x5eed);
        while !obs.done {
            assert!(!obs.admissible.is_empty());
            for a in &obs.admissible {
                let mut probe = state.clone();
                probe.step(a).unwrap_or_else(|e| panic!("{game:?}: `{a}` rejected: {e}"));
            }
            assert!(matches!(state.clone().step("dance wildly"), Err(EnvError::Inadmissible(_))));
            let a = obs.admissible.choose(&mut rng).unwrap().clone();
            obs = state.step(&a).unwrap();
            assert!(state.steps <= game.max_steps);
            assert!((0.0..=1.0).contains(&state.normalized_score()));
        }
        assert!(matches!(state.step("look"), Err(EnvError::Finished)));
    }
}

/// Plays `take`, `open` (if needed) and `insert` for the first apple bound
/// for the fridge, returning the logged steps.
fn place_apple(world: &World) -> EpisodeRecord {
    for seed in 0..500 {
        let game = GameConfig::new(Difficulty::Easy, Split::In, seed);
        let (mut state, mut obs) = world.factory.new_game(&game).unwrap();
        let Some(apple) = state
            .objects
            .iter()
            .find(|o| o.lemma == "apple" && state.receptacles[o.goal].lemma == "fridge")
            .map(|o| o.display_name())
        else {
            continue;
        };
        let fridge_open = state.receptacles.iter().any(|r| r.lemma == "fridge" && r.open);
        let mut plan = vec![format!("take {apple}")];
        if !fridge_open {
            plan.push(format!("open {}", display_lemma("fridge")));
        }
        plan.push(format!("insert {apple} into fridge"));

        let mut parser = ObservationParser::default();
        let mut steps = Vec::new();
        for action in plan {
            let facts = parser.parse(&obs);
            let atom = parser.action_atom(&action);
            let next = state.step(&action).unwrap();
            steps.push(EpisodeStep {
                observation: obs.full_text(),
                admissible: obs.admissible.clone(),
                record: StepRecord { facts, action_text: action, action: atom, reward: next.reward_last, provenance: Provenance::Neural },
                candidates: Vec::new(),
            });
            obs = next;
        }
        return EpisodeRecord { episode: 0, steps, score: state.score, max_score: state.max_score };
    }
    panic!("no IN game with a fridge-bound apple");
}

#[test]
fn rewarded_apple_insert_yields_fridge_rule() {
    let world = World::household();
    let record = place_apple(&world);
    assert_eq!(record.steps.last().unwrap().record.reward, 1.0);
    let mut learner = RuleLearner::new(GenConfig::none());
    learner.learn_episode(&record, &world.taxonomy).unwrap();

    let last = &record.steps.last().unwrap().record;
    let oid = last.action.as_ref().unwrap().first_arg().to_string();
    let derived = ground_query(&learner.rules, &last.facts);
    assert!(
        derived.iter().any(|(a, _)| *a == Atom::fact2("insert", &oid, "fridge")),
        "rules {:?} derive {derived:?}",
        learner.rules.rules()
    );
}

#[test]
fn text_only_never_acts_symbolically() {
    let world = World::household();
    let cfg = ExperimentConfig { episodes: 15, test_games: 3, ..ExperimentConfig::new(Variant::TextOnly, Difficulty::Medium, vec![0, 1]) };
    for run in run_seeds(&cfg, &world).unwrap() {
        assert!(run.agent.rules().is_empty());
        assert!(run.outcome.evals.iter().all(|e| e.symbolic_steps == 0));
        for (_, rec) in &run.transcripts {
            assert!(rec.steps.iter().all(|s| s.record.provenance == Provenance::Neural && s.candidates.is_empty()));
        }
    }
}

#[test]
fn evaluation_is_read_only_and_bounded() {
    let world = World::household();
    let mut agent = AgentState::new(Variant::ExplorerIg3);
    for ep in 0..20 {
        run_episode(&mut agent, &world, &GameConfig::new(Difficulty::Medium, Split::In, ep), true).unwrap();
    }
    let before = agent.clone();
    for seed in 100..110 {
        let game = GameConfig { max_steps: 20, ..GameConfig::new(Difficulty::Hard, Split::Out, seed) };
        let rec = play_episode(&agent, &world, &game, false).unwrap();
        assert!(rec.len() <= 20);
        assert!((0.0..=1.0).contains(&rec.normalized_score()));
    }
    assert_eq!(agent, before);
}

#[test]
fn rule_files_round_trip() {
    let world = World::household();
    let mut agent = AgentState::new(Variant::ExplorerIg3);
    for ep in 0..40 {
        run_episode(&mut agent, &world, &GameConfig::new(Difficulty::Medium, Split::In, ep), true).unwrap();
    }
    let store = agent.rules();
    assert!(store.rules().iter().any(|r| r.generalized), "no lifted rule after 40 episodes");
    assert!(store.rules().iter().any(|r| r.stats.uses > 0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rules.lp");
    save_rules(store, &path).unwrap();
    assert_eq!(&load_rules(&path).unwrap(), store);

    save_rules(&RuleStore::new(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{STORE_HEADER}\n"));
    assert!(load_rules(&path).unwrap().is_empty());

    std::fs::write(&path, "% header\ninsert(X,fridge) :- apple(X).\ninsert(X fridge) :- apple(X).\n").unwrap();
    match load_rules(&path) {
        Err(HarnessError::Rules(LogicError::Syntax { line, .. })) => assert_eq!(line, 3),
        other => panic!("expected a syntax error, got {other:?}"),
    }
    assert!(matches!(load_rules(&dir.path().join("missing.lp")), Err(HarnessError::Io { .. })));
}

#[test]
fn explorer_training_curves_rise() {
    let world = World::household();
    for variant in [Variant::ExplorerWoGen, Variant::ExplorerIg3] {
        let cfg = ExperimentConfig { splits: vec![Split::In], test_games: 1, ..ExperimentConfig::new(variant, Difficulty::Medium, (0..5).collect()) };
        let runs = run_seeds(&cfg, &world).unwrap();
        let mean = |f: &dyn Fn(&[f64]) -> &[f64]| {
            runs.iter().map(|r| f(&r.outcome.train_scores).iter().sum::<f64>() / 20.0).sum::<f64>() / runs.len() as f64
        };
        let first = mean(&|s| &s[..20]);
        let last = mean(&|s| &s[s.len() - 20..]);
        assert!(last >= first, "{variant}: last-20 {last:.3} < first-20 {first:.3}");
    }
}
