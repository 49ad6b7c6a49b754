//! Deterministic object-placement game simulator.
//!
//! A game is a handful of rooms from the catalog laid out east to west,
//! with objects scattered on floors and supporters. The agent must move each
//! object into or onto its goal receptacle; each correct placement scores 1.
//! Observations are rendered from fixed templates and parsed back into facts
//! by [`ObservationParser`].

mod catalog;
mod parse;
mod render;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{
    make_split, Catalog, EntitySplit, ObjectSpec, ReceptacleKind, ReceptacleSpec, RoomSpec, DEFAULT_SPLIT_SEED,
    HOUSEHOLD_CATALOG,
};
pub use parse::{ActionTemplate, EntityRegistry, ObservationParser, Slot, DEFAULT_TEMPLATES};
pub use render::{display_lemma, parse_lemma};

pub const DEFAULT_MAX_STEPS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("inadmissible action `{0}`")]
    Inadmissible(String),
    #[error("game is over")]
    Finished,
}

/// Mixes a salt into a seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident = $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "expected one of {}, got `{s}`",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(Difficulty { Easy = "easy", Medium = "medium", Hard = "hard" });
keyword_enum!(Split { In = "in", Out = "out" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameConfig {
    pub difficulty: Difficulty,
    pub split: Split,
    pub seed: u64,
    pub max_steps: usize,
}

impl GameConfig {
    pub fn new(difficulty: Difficulty, split: Split, seed: u64) -> Self {
        GameConfig { difficulty, split, seed, max_steps: DEFAULT_MAX_STEPS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at", content = "index", rename_all = "snake_case")]
pub enum Location {
    Floor(usize),
    On(usize),
    In(usize),
    Inventory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    /// Direction -> room index.
    pub exits: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receptacle {
    pub lemma: String,
    pub kind: ReceptacleKind,
    pub room: usize,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Object {
    pub lemma: String,
    /// State adjective first (if any), then the neutral one.
    pub adjectives: Vec<String>,
    pub location: Location,
    /// Goal receptacle index.
    pub goal: usize,
    pub placed: bool,
}

impl Object {
    pub fn display_name(&self) -> String {
        let mut words = self.adjectives.clone();
        words.push(display_lemma(&self.lemma));
        words.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    pub config: GameConfig,
    pub rooms: Vec<Room>,
    pub receptacles: Vec<Receptacle>,
    pub objects: Vec<Object>,
    pub agent_room: usize,
    pub steps: usize,
    pub score: u32,
    pub max_score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub inventory_text: String,
    pub admissible: Vec<String>,
    pub done: bool,
    pub reward_last: f64,
}

impl Observation {
    /// Room description and inventory as one string.
    pub fn full_text(&self) -> String {
        format!("{}\n{}", self.text, self.inventory_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Act {
    Look,
    Go(usize),
    Take(usize),
    Open(usize),
    Place(usize, usize),
}

/// Samples games for one catalog and entity split.
#[derive(Debug, Clone)]
pub struct GameFactory {
    pub catalog: Catalog,
    pub split: EntitySplit,
}

/// (lemma, state adjective, goal receptacle name, sampling weight)
type Candidate<'a> = (&'a ObjectSpec, Option<&'a str>, &'a str, u32);

const BASE_WEIGHT: u32 = 3;
const VARIANT_WEIGHT: u32 = 1;
const WORLD_ATTEMPTS: usize = 64;

impl GameFactory {
    pub fn new(catalog: Catalog, split: EntitySplit) -> Self {
        GameFactory { catalog, split }
    }

    fn shape(difficulty: Difficulty, rng: &mut ChaCha8Rng) -> (usize, usize) {
        match difficulty {
            Difficulty::Easy => (1, rng.gen_range(1..=3)),
            Difficulty::Medium => (rng.gen_range(1..=2), rng.gen_range(4..=5)),
            Difficulty::Hard => {
                if rng.gen_bool(0.5) {
                    (rng.gen_range(1..=2), rng.gen_range(6..=7))
                } else {
                    (rng.gen_range(3..=4), rng.gen_range(4..=5))
                }
            }
        }
    }

    fn candidates<'a>(&'a self, split: Split, rooms: &[&'a RoomSpec]) -> Vec<Candidate<'a>> {
        let here = |goal: &str| rooms.iter().any(|r| r.receptacles.iter().any(|x| x.name == goal));
        let pool = self.split.pool(split);
        let mut out = Vec::new();
        for o in self.catalog.objects.iter().filter(|o| pool.contains(&o.name)) {
            if here(&o.goal) {
                out.push((o, None, o.goal.as_str(), BASE_WEIGHT));
            }
            for (adj, goal) in &o.variants {
                if here(goal) {
                    out.push((o, Some(adj.as_str()), goal.as_str(), VARIANT_WEIGHT));
                }
            }
        }
        out
    }

    /// Samples a world from `cfg.seed`; equal configs give equal games.
    pub fn new_game(&self, cfg: &GameConfig) -> Result<(GameState, Observation), EnvError> {
        if cfg.max_steps == 0 {
            return Err(EnvError::Config("max_steps must be at least 1".into()));
        }
        let salt = (cfg.difficulty as u64) << 8 | cfg.split as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, salt));
        let (n_rooms, n_objects) = Self::shape(cfg.difficulty, &mut rng);
        if self.catalog.rooms.len() < n_rooms {
            return Err(EnvError::Config(format!("{} needs {n_rooms} rooms", cfg.difficulty)));
        }
        for _ in 0..WORLD_ATTEMPTS {
            let mut rooms: Vec<&RoomSpec> = self.catalog.rooms.choose_multiple(&mut rng, n_rooms).collect();
            rooms.shuffle(&mut rng);
            if let Some(state) = self.populate(cfg, &rooms, n_objects, &mut rng) {
                let obs = state.observe(0.0);
                return Ok((state, obs));
            }
        }
        Err(EnvError::Config(format!(
            "catalog cannot supply {n_objects} distinct {} objects for a {} game",
            cfg.split, cfg.difficulty
        )))
    }

    fn populate(&self, cfg: &GameConfig, rooms: &[&RoomSpec], n: usize, rng: &mut ChaCha8Rng) -> Option<GameState> {
        let cands = self.candidates(cfg.split, rooms);
        if cands.is_empty() {
            return None;
        }
        let mut world_rooms: Vec<Room> =
            rooms.iter().map(|r| Room { name: r.name.clone(), exits: BTreeMap::new() }).collect();
        for i in 1..world_rooms.len() {
            world_rooms[i - 1].exits.insert("east".into(), i);
            world_rooms[i].exits.insert("west".into(), i - 1);
        }
        let receptacles: Vec<Receptacle> = rooms
            .iter()
            .enumerate()
            .flat_map(|(ri, r)| {
                r.receptacles.iter().map(move |x| Receptacle {
                    lemma: x.name.clone(),
                    kind: x.kind,
                    room: ri,
                    open: x.kind == ReceptacleKind::Supporter,
                })
            })
            .collect();
        let index_of = |name: &str| receptacles.iter().position(|r| r.lemma == name).expect("goal is in the world");

        let mut objects: Vec<Object> = Vec::new();
        let mut tries = 0;
        while objects.len() < n {
            tries += 1;
            if tries > 50 * n {
                return None;
            }
            let &(spec, state, goal, _) = cands.choose_weighted(rng, |c| c.3).ok()?;
            let neutral = spec.features.choose(rng)?.clone();
            let adjectives: Vec<String> = state.map(str::to_string).into_iter().chain([neutral]).collect();
            if objects.iter().any(|o| o.lemma == spec.name && o.adjectives == adjectives) {
                continue;
            }
            let goal = index_of(goal);
            let room = rng.gen_range(0..rooms.len());
            let supporters: Vec<usize> = (0..receptacles.len())
                .filter(|&i| receptacles[i].room == room && receptacles[i].kind == ReceptacleKind::Supporter && i != goal)
                .collect();
            let location = match supporters.choose(rng) {
                Some(&s) if rng.gen_bool(0.4) => Location::On(s),
                _ => Location::Floor(room),
            };
            objects.push(Object { lemma: spec.name.clone(), adjectives, location, goal, placed: false });
        }
        Some(GameState {
            config: *cfg,
            rooms: world_rooms,
            receptacles,
            objects,
            agent_room: 0,
            steps: 0,
            score: 0,
            max_score: n as u32,
        })
    }
}

impl GameState {
    pub fn is_done(&self) -> bool {
        self.score == self.max_score || self.steps >= self.config.max_steps
    }

    pub fn normalized_score(&self) -> f64 {
        if self.max_score == 0 {
            0.0
        } else {
            self.score as f64 / self.max_score as f64
        }
    }

    fn object_visible(&self, o: &Object) -> bool {
        match o.location {
            Location::Floor(r) => r == self.agent_room,
            Location::On(i) => self.receptacles[i].room == self.agent_room,
            Location::In(i) => self.receptacles[i].room == self.agent_room && self.receptacles[i].open,
            Location::Inventory => false,
        }
    }

    fn acts(&self) -> Vec<(String, Act)> {
        if self.is_done() {
            return Vec::new();
        }
        let mut out = vec![("look".to_string(), Act::Look)];
        for (dir, &to) in &self.rooms[self.agent_room].exits {
            out.push((format!("go {dir}"), Act::Go(to)));
        }
        let here: Vec<usize> = (0..self.receptacles.len()).filter(|&i| self.receptacles[i].room == self.agent_room).collect();
        for &i in &here {
            let r = &self.receptacles[i];
            if r.kind == ReceptacleKind::Container && !r.open {
                out.push((format!("open {}", display_lemma(&r.lemma)), Act::Open(i)));
            }
        }
        for (oi, o) in self.objects.iter().enumerate() {
            if !o.placed && self.object_visible(o) {
                out.push((format!("take {}", o.display_name()), Act::Take(oi)));
            }
            if o.location != Location::Inventory {
                continue;
            }
            for &i in &here {
                let r = &self.receptacles[i];
                let text = match r.kind {
                    ReceptacleKind::Container if r.open => format!("insert {} into {}", o.display_name(), display_lemma(&r.lemma)),
                    ReceptacleKind::Supporter => format!("put {} on {}", o.display_name(), display_lemma(&r.lemma)),
                    _ => continue,
                };
                out.push((text, Act::Place(oi, i)));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Actions executable now, sorted; empty once the game is over.
    pub fn admissible_actions(&self) -> Vec<String> {
        self.acts().into_iter().map(|(s, _)| s).collect()
    }

    pub fn observe(&self, reward_last: f64) -> Observation {
        let done = self.is_done();
        Observation {
            text: render::room_text(self),
            inventory_text: render::inventory_text(self),
            admissible: self.admissible_actions(),
            done,
            reward_last,
        }
    }

    /// Executes one admissible action.
    pub fn step(&mut self, action: &str) -> Result<Observation, EnvError> {
        if self.is_done() {
            return Err(EnvError::Finished);
        }
        let act = self
            .acts()
            .into_iter()
            .find(|(s, _)| s == action)
            .map(|(_, a)| a)
            .ok_or_else(|| EnvError::Inadmissible(action.to_string()))?;
        let mut reward = 0.0;
        match act {
            Act::Look => {}
            Act::Go(to) => self.agent_room = to,
            Act::Take(o) => self.objects[o].location = Location::Inventory,
            Act::Open(r) => self.receptacles[r].open = true,
            Act::Place(o, r) => {
                let obj = &mut self.objects[o];
                obj.location = match self.receptacles[r].kind {
                    ReceptacleKind::Container => Location::In(r),
                    ReceptacleKind::Supporter => Location::On(r),
                };
                if obj.goal == r {
                    obj.placed = true;
                    self.score += 1;
                    reward = 1.0;
                }
            }
        }
        self.steps += 1;
        Ok(self.observe(reward))
    }

    /// Goal receptacle lemma of every object, by display name.
    pub fn goal_map(&self) -> BTreeMap<String, String> {
        self.objects
            .iter()
            .map(|o| (o.display_name(), self.receptacles[o.goal].lemma.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::Taxonomy;

    fn factory() -> GameFactory {
        let c = Catalog::household();
        let s = make_split(&c, &Taxonomy::household(), DEFAULT_SPLIT_SEED);
        GameFactory::new(c, s)
    }

    #[test]
    fn keyword_parsing() {
        assert_eq!("hard".parse::<Difficulty>(), Ok(Difficulty::Hard));
        assert_eq!("out".parse::<Split>(), Ok(Split::Out));
        assert!("extreme".parse::<Difficulty>().is_err());
    }

    #[test]
    fn same_seed_same_world() {
        let f = factory();
        let cfg = GameConfig::new(Difficulty::Easy, Split::In, 7);
        assert_eq!(f.new_game(&cfg).unwrap(), f.new_game(&cfg).unwrap());
    }

    #[test]
    fn difficulty_shapes() {
        let f = factory();
        for seed in 0..200 {
            for split in [Split::In, Split::Out] {
                let (s, _) = f.new_game(&GameConfig::new(Difficulty::Easy, split, seed)).unwrap();
                assert_eq!(s.rooms.len(), 1);
                assert!((1..=3).contains(&s.objects.len()));
                let (s, _) = f.new_game(&GameConfig::new(Difficulty::Medium, split, seed)).unwrap();
                assert!((1..=2).contains(&s.rooms.len()) && (4..=5).contains(&s.objects.len()));
                let (s, _) = f.new_game(&GameConfig::new(Difficulty::Hard, split, seed)).unwrap();
                let (r, o) = (s.rooms.len(), s.objects.len());
                assert!(((1..=2).contains(&r) && (6..=7).contains(&o)) || ((3..=4).contains(&r) && (4..=5).contains(&o)));
            }
        }
    }

    #[test]
    fn objects_come_from_their_pool() {
        let f = factory();
        for seed in 0..50 {
            for split in [Split::In, Split::Out] {
                let (s, _) = f.new_game(&GameConfig::new(Difficulty::Hard, split, seed)).unwrap();
                assert!(s.objects.iter().all(|o| f.split.pool(split).contains(&o.lemma)));
                assert!(s.objects.iter().all(|o| o.location != Location::On(o.goal)));
                assert_eq!(s.max_score as usize, s.objects.len());
            }
        }
    }

    fn held_apple_world() -> GameState {
        let cfg = GameConfig::new(Difficulty::Easy, Split::In, 0);
        let rooms = vec![Room { name: "kitchen".into(), exits: BTreeMap::new() }];
        let receptacles = vec![
            Receptacle { lemma: "fridge".into(), kind: ReceptacleKind::Container, room: 0, open: false },
            Receptacle { lemma: "counter".into(), kind: ReceptacleKind::Supporter, room: 0, open: true },
        ];
        let objects = vec![
            Object { lemma: "apple".into(), adjectives: vec!["red".into()], location: Location::Inventory, goal: 0, placed: false },
            Object { lemma: "knife".into(), adjectives: vec!["sharp".into()], location: Location::Floor(0), goal: 1, placed: false },
        ];
        GameState { config: cfg, rooms, receptacles, objects, agent_room: 0, steps: 0, score: 0, max_score: 2 }
    }

    #[test]
    fn closed_container_blocks_insertion() {
        let s = held_apple_world();
        let acts = s.admissible_actions();
        assert!(acts.contains(&"open fridge".to_string()));
        assert!(!acts.iter().any(|a| a.starts_with("insert")));
        assert!(acts.contains(&"put red apple on counter".to_string()));
        let mut sorted = acts.clone();
        sorted.sort();
        assert_eq!(acts, sorted);
    }

    #[test]
    fn goal_placement_rewarded_once() {
        let mut s = held_apple_world();
        assert_eq!(s.step("open fridge").unwrap().reward_last, 0.0);
        let obs = s.step("insert red apple into fridge").unwrap();
        assert_eq!(obs.reward_last, 1.0);
        assert_eq!(s.score, 1);
        // placed objects can no longer be picked up
        assert!(!obs.admissible.contains(&"take red apple".to_string()));
        assert!(!obs.done);
        s.step("take sharp knife").unwrap();
        let obs = s.step("put sharp knife on counter").unwrap();
        assert!(obs.done && obs.admissible.is_empty());
        assert_eq!(s.score, s.max_score);
        assert_eq!(s.step("look"), Err(EnvError::Finished));
    }

    #[test]
    fn wrong_receptacle_unrewarded_and_retakeable() {
        let mut s = held_apple_world();
        let obs = s.step("put red apple on counter").unwrap();
        assert_eq!(obs.reward_last, 0.0);
        assert!(obs.admissible.contains(&"take red apple".to_string()));
    }

    #[test]
    fn look_only_advances_the_clock() {
        let mut s = held_apple_world();
        let before = s.clone();
        let obs = s.step("look").unwrap();
        assert_eq!(obs.reward_last, 0.0);
        assert_eq!(s.steps, 1);
        s.steps = 0;
        assert_eq!(s, before);
    }

    #[test]
    fn inadmissible_rejected() {
        let mut s = held_apple_world();
        assert_eq!(
            s.step("insert red apple into fridge"),
            Err(EnvError::Inadmissible("insert red apple into fridge".into()))
        );
        assert_eq!(s.steps, 0);
    }

    #[test]
    fn step_budget_ends_game() {
        let mut s = held_apple_world();
        s.config.max_steps = 3;
        for _ in 0..2 {
            assert!(!s.step("look").unwrap().done);
        }
        assert!(s.step("look").unwrap().done);
    }
}
