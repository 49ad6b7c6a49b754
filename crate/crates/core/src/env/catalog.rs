use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::taxonomy::{is_lemma, Taxonomy};

/// The catalog shipped with the crate.
pub const HOUSEHOLD_CATALOG: &str = include_str!("../../data/catalog.toml");

/// Seed of the default entity split. With the bundled catalog it leaves
/// apple and orange in training and holds banana out.
pub const DEFAULT_SPLIT_SEED: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceptacleKind {
    /// Must be opened before anything goes in.
    Container,
    /// Always accessible.
    Supporter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptacleSpec {
    pub name: String,
    pub kind: ReceptacleKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub name: String,
    pub receptacles: Vec<ReceptacleSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub goal: String,
    pub features: Vec<String>,
    /// State adjective -> goal receptacle for instances carrying it.
    #[serde(default)]
    pub variants: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(rename = "room")]
    pub rooms: Vec<RoomSpec>,
    #[serde(rename = "object")]
    pub objects: Vec<ObjectSpec>,
}

impl Catalog {
    pub fn parse(source: &str) -> Result<Self, EnvError> {
        let catalog: Catalog = toml::from_str(source).map_err(|e| EnvError::Catalog(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn household() -> Self {
        Self::parse(HOUSEHOLD_CATALOG).expect("bundled catalog is valid")
    }

    fn validate(&self) -> Result<(), EnvError> {
        let bad = |what: String| Err(EnvError::Catalog(what));
        let mut receptacles = BTreeSet::new();
        for room in &self.rooms {
            if !is_lemma(&room.name) {
                return bad(format!("invalid room name `{}`", room.name));
            }
            for r in &room.receptacles {
                if !is_lemma(&r.name) {
                    return bad(format!("invalid receptacle name `{}`", r.name));
                }
                if !receptacles.insert(r.name.as_str()) {
                    return bad(format!("receptacle `{}` appears twice", r.name));
                }
            }
        }
        let mut names = BTreeSet::new();
        for o in &self.objects {
            if !is_lemma(&o.name) || !names.insert(o.name.as_str()) {
                return bad(format!("invalid or duplicate object `{}`", o.name));
            }
            if o.features.is_empty() {
                return bad(format!("object `{}` has no features", o.name));
            }
            for f in o.features.iter().chain(o.variants.keys()) {
                if !is_lemma(f) || f == "open" || f == "closed" {
                    return bad(format!("object `{}` has invalid feature `{f}`", o.name));
                }
            }
            for goal in std::iter::once(&o.goal).chain(o.variants.values()) {
                if !receptacles.contains(goal.as_str()) {
                    return bad(format!("object `{}` targets unknown receptacle `{goal}`", o.name));
                }
            }
        }
        Ok(())
    }

    pub fn object(&self, name: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn room(&self, name: &str) -> Option<&RoomSpec> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn receptacle(&self, name: &str) -> Option<(&RoomSpec, &ReceptacleSpec)> {
        self.rooms
            .iter()
            .find_map(|room| room.receptacles.iter().find(|r| r.name == name).map(|r| (room, r)))
    }
}

/// Training (IN) and held-out (OUT) object lemmas.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySplit {
    pub in_entities: BTreeSet<String>,
    pub out_entities: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl EntitySplit {
    pub fn pool(&self, split: super::Split) -> &BTreeSet<String> {
        match split {
            super::Split::In => &self.in_entities,
            super::Split::Out => &self.out_entities,
        }
    }
}

/// Partitions object lemmas into IN and OUT pools.
///
/// Objects are grouped by (goal receptacle, direct hypernym). A third of each
/// group (at least one lemma) is held out, chosen by a seeded shuffle, so
/// every OUT lemma shares its direct hypernym with an IN lemma. Singleton
/// groups stay IN and are reported in `warnings`.
pub fn make_split(catalog: &Catalog, taxonomy: &Taxonomy, seed: u64) -> EntitySplit {
    let mut groups: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for o in &catalog.objects {
        let parent = taxonomy.parents_of(&o.name).next().unwrap_or("").to_string();
        groups.entry((o.goal.clone(), parent)).or_default().push(o.name.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = EntitySplit::default();
    for ((goal, parent), mut lemmas) in groups {
        lemmas.sort();
        if lemmas.len() < 2 || parent.is_empty() {
            split.warnings.push(format!(
                "`{}` ({goal}) has no sibling to hold out; kept in training",
                lemmas.join(", ")
            ));
            split.in_entities.extend(lemmas);
            continue;
        }
        lemmas.shuffle(&mut rng);
        let n_out = (lemmas.len() / 3).max(1);
        split.out_entities.extend(lemmas.drain(..n_out));
        split.in_entities.extend(lemmas);
    }
    split
}
