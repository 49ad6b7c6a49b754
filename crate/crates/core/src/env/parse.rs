use std::collections::BTreeMap;

use regex::Regex;

use super::render::parse_lemma;
use super::Observation;
use crate::logic::{Atom, FactBase};

/// Action templates known to the agent before play.
pub const DEFAULT_TEMPLATES: &[&str] = &["look", "go D", "take O", "open S", "insert O into S", "put O on S"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Object,
    Receptacle,
    Direction,
}

impl Slot {
    fn from_letter(s: &str) -> Option<Slot> {
        match s {
            "O" => Some(Slot::Object),
            "S" => Some(Slot::Receptacle),
            "D" => Some(Slot::Direction),
            _ => None,
        }
    }
}

/// A pattern such as `insert O into S` whose capital letters are typed slots.
#[derive(Debug, Clone)]
pub struct ActionTemplate {
    pub pattern: String,
    pub verb: String,
    pub slots: Vec<Slot>,
    regex: Regex,
}

impl ActionTemplate {
    pub fn new(pattern: &str) -> Result<Self, String> {
        let mut slots = Vec::new();
        let mut parts = Vec::new();
        for word in pattern.split_whitespace() {
            match Slot::from_letter(word) {
                Some(slot) => {
                    slots.push(slot);
                    parts.push("(.+?)".to_string());
                }
                None if word.chars().all(|c| c.is_ascii_lowercase()) => parts.push(regex::escape(word)),
                None => return Err(format!("bad template word `{word}` in `{pattern}`")),
            }
        }
        let verb = pattern.split_whitespace().next().ok_or("empty template")?.to_string();
        if Slot::from_letter(&verb).is_some() {
            return Err(format!("template `{pattern}` must start with a verb"));
        }
        let regex = Regex::new(&format!("^{}$", parts.join(" "))).map_err(|e| e.to_string())?;
        Ok(ActionTemplate { pattern: pattern.to_string(), verb, slots, regex })
    }

    pub fn defaults() -> Vec<ActionTemplate> {
        DEFAULT_TEMPLATES.iter().map(|p| ActionTemplate::new(p).expect("valid default template")).collect()
    }

    /// Slot fillers of `action`, if it instantiates this template.
    pub fn fill<'a>(&self, action: &'a str) -> Option<Vec<(Slot, &'a str)>> {
        let caps = self.regex.captures(action)?;
        Some(self.slots.iter().zip(caps.iter().skip(1)).map(|(s, m)| (*s, m.expect("slot group").as_str())).collect())
    }
}

/// Per-episode entity ids: `o<n>` for objects (keyed by full name) and
/// `c<n>` for receptacles, in order of first mention.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityRegistry {
    objects: BTreeMap<String, String>,
    receptacles: BTreeMap<String, String>,
}

impl EntityRegistry {
    pub fn object_id(&mut self, name: &str) -> String {
        let n = self.objects.len() + 1;
        self.objects.entry(name.to_string()).or_insert_with(|| format!("o{n}")).clone()
    }

    pub fn receptacle_id(&mut self, lemma: &str) -> String {
        let n = self.receptacles.len() + 1;
        self.receptacles.entry(lemma.to_string()).or_insert_with(|| format!("c{n}")).clone()
    }

    pub fn lookup_object(&self, name: &str) -> Option<&str> {
        self.objects.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.objects.len() + self.receptacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Inverts the observation templates into facts.
#[derive(Debug, Clone)]
pub struct ObservationParser {
    templates: Vec<ActionTemplate>,
    registry: EntityRegistry,
}

impl Default for ObservationParser {
    fn default() -> Self {
        ObservationParser::new(ActionTemplate::defaults())
    }
}

fn strip_article(item: &str) -> &str {
    item.strip_prefix("an ").or_else(|| item.strip_prefix("a ")).unwrap_or(item)
}

fn split_list(list: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for chunk in list.split(", ") {
        match chunk.rsplit_once(" and ") {
            Some((a, b)) => {
                out.push(strip_article(a));
                out.push(strip_article(b));
            }
            None => out.push(strip_article(chunk)),
        }
    }
    out.retain(|s| !s.is_empty());
    out
}

impl ObservationParser {
    pub fn new(templates: Vec<ActionTemplate>) -> Self {
        ObservationParser { templates, registry: EntityRegistry::default() }
    }

    /// Forgets all entity ids; call at the start of every episode.
    pub fn reset(&mut self) {
        self.registry = EntityRegistry::default();
    }

    pub fn registry(&self) -> &EntityRegistry {
        &self.registry
    }

    fn object(&mut self, facts: &mut FactBase, name: &str) -> String {
        let id = self.registry.object_id(name);
        let mut words: Vec<&str> = name.split(' ').collect();
        if let Some(noun) = words.pop() {
            let _ = facts.insert_typed(&id, &parse_lemma(noun));
        }
        for adj in words {
            let _ = facts.insert(Atom::fact1(adj, &id));
        }
        id
    }

    fn receptacle(&mut self, facts: &mut FactBase, name: &str) -> String {
        let lemma = parse_lemma(name);
        let id = self.registry.receptacle_id(&lemma);
        let _ = facts.insert_typed(&id, &lemma);
        id
    }

    /// Facts of one observation: entity types and adjectives, `at_room`,
    /// `in_inventory`, `is_open`/`is_closed`, and `in`/`on` placements.
    pub fn parse(&mut self, obs: &Observation) -> FactBase {
        let mut facts = FactBase::new();
        for raw in obs.text.lines() {
            let line = raw.trim().trim_end_matches('.');
            if let Some(room) = line.strip_prefix("You are in the ") {
                let _ = facts.insert(Atom::fact1("at_room", &room.replace(' ', "_")));
            } else if let Some(list) = line.strip_prefix("You see ") {
                for item in split_list(list) {
                    let (state, name) = match item.split_once(' ') {
                        Some((s @ ("open" | "closed"), rest)) => (Some(s), rest),
                        _ => (None, item),
                    };
                    let id = self.receptacle(&mut facts, name);
                    if let Some(s) = state {
                        let _ = facts.insert(Atom::fact1(if s == "open" { "is_open" } else { "is_closed" }, &id));
                    }
                }
            } else if let Some((head, list)) = line.split_once(" you see ") {
                let (rel, place) = match head.split_once(" the ") {
                    Some(("On", p)) => ("on", p),
                    Some(("In", p)) => ("in", p),
                    _ => continue,
                };
                let holder = (place != "floor").then(|| self.receptacle(&mut facts, place));
                for item in split_list(list) {
                    let id = self.object(&mut facts, item);
                    if let Some(c) = &holder {
                        let _ = facts.insert(Atom::fact2(rel, &id, c));
                    }
                }
            }
        }
        if let Some(list) = obs.inventory_text.trim().trim_end_matches('.').strip_prefix("You are carrying: ") {
            for item in split_list(list) {
                let id = self.object(&mut facts, item);
                let _ = facts.insert(Atom::fact1("in_inventory", &id));
            }
        }
        for action in &obs.admissible {
            let Some(filled) = self.templates.iter().find_map(|t| t.fill(action)) else { continue };
            for (slot, text) in filled {
                match slot {
                    Slot::Object => {
                        self.object(&mut facts, text);
                    }
                    Slot::Receptacle => {
                        self.receptacle(&mut facts, text);
                    }
                    Slot::Direction => {}
                }
            }
        }
        facts
    }

    /// The atom the rule engine uses for `action`: `verb(object_id)`,
    /// `verb(receptacle_id)` or `verb(object_id, receptacle_lemma)`.
    /// Actions without an entity slot map to `None`.
    pub fn action_atom(&mut self, action: &str) -> Option<Atom> {
        let (verb, filled) = self.templates.iter().find_map(|t| t.fill(action).map(|f| (t.verb.clone(), f)))?;
        match filled.as_slice() {
            [(Slot::Object, o)] => Some(Atom::fact1(&verb, &self.registry.object_id(o))),
            [(Slot::Receptacle, s)] => Some(Atom::fact1(&verb, &self.registry.receptacle_id(&parse_lemma(s)))),
            [(Slot::Object, o), (Slot::Receptacle, s)] => {
                Some(Atom::fact2(&verb, &self.registry.object_id(o), &parse_lemma(s)))
            }
            _ => None,
        }
    }
}
