//! Sense-free hypernym (IS-A) taxonomy.
//!
//! Each lemma is a single node; a lemma may have several parents, so the
//! graph is a DAG and distances are always the minimal edge count.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// The household fixture shipped with the crate.
pub const HOUSEHOLD_TSV: &str = include_str!("../data/household.tsv");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("hypernym cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

/// A hypernym reached from a query lemma.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HypernymHit {
    pub distance: usize,
    pub lemma: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    parents: BTreeMap<String, BTreeSet<String>>,
    lemmas: BTreeSet<String>,
}

pub(crate) fn is_lemma(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl Taxonomy {
    /// Parses `child<TAB>parent` lines. Blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Result<Self, TaxonomyError> {
        let mut tax = Taxonomy::default();
        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(TaxonomyError::Malformed {
                    line: line_no,
                    reason: format!("expected `child<TAB>parent`, found {} field(s)", fields.len()),
                });
            }
            let (child, parent) = (fields[0].trim(), fields[1].trim());
            for lemma in [child, parent] {
                if !is_lemma(lemma) {
                    return Err(TaxonomyError::Malformed {
                        line: line_no,
                        reason: format!("invalid lemma `{lemma}`"),
                    });
                }
            }
            if child == parent {
                return Err(TaxonomyError::Cycle(vec![child.to_string(), parent.to_string()]));
            }
            tax.insert_edge(child, parent);
        }
        if let Some(cycle) = tax.find_cycle() {
            return Err(TaxonomyError::Cycle(cycle));
        }
        Ok(tax)
    }

    /// The bundled household fixture.
    pub fn household() -> Self {
        Self::parse(HOUSEHOLD_TSV).expect("bundled taxonomy is valid")
    }

    fn insert_edge(&mut self, child: &str, parent: &str) {
        self.lemmas.insert(child.to_string());
        self.lemmas.insert(parent.to_string());
        self.parents
            .entry(child.to_string())
            .or_default()
            .insert(parent.to_string());
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit<'a>(
            tax: &'a Taxonomy,
            node: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            path: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            match marks.get(node) {
                Some(Mark::Done) => return None,
                Some(Mark::Open) => {
                    let start = path.iter().position(|n| *n == node).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(node.to_string());
                    return Some(cycle);
                }
                None => {}
            }
            marks.insert(node, Mark::Open);
            path.push(node);
            if let Some(ps) = tax.parents.get(node) {
                for p in ps {
                    if let Some(c) = visit(tax, p, marks, path) {
                        return Some(c);
                    }
                }
            }
            path.pop();
            marks.insert(node, Mark::Done);
            None
        }
        let mut marks = BTreeMap::new();
        for lemma in &self.lemmas {
            let mut path = Vec::new();
            if let Some(c) = visit(self, lemma, &mut marks, &mut path) {
                return Some(c);
            }
        }
        None
    }

    pub fn edge_count(&self) -> usize {
        self.parents.values().map(BTreeSet::len).sum()
    }

    pub fn lemma_count(&self) -> usize {
        self.lemmas.len()
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(lemma)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.lemmas.iter().map(String::as_str)
    }

    pub fn parents_of(&self, lemma: &str) -> impl Iterator<Item = &str> {
        self.parents
            .get(lemma)
            .into_iter()
            .flat_map(|ps| ps.iter().map(String::as_str))
    }

    /// Sorted `(child, parent)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parents
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (c.as_str(), p.as_str())))
    }

    /// Minimal distance to every ancestor within `max_level` edges, sorted by
    /// `(distance, lemma)`. Unknown lemmas have no hypernyms.
    pub fn hypernyms_up_to(&self, lemma: &str, max_level: usize) -> Vec<HypernymHit> {
        let mut best: BTreeMap<&str, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([(lemma, 0usize)]);
        while let Some((node, d)) = queue.pop_front() {
            if d == max_level {
                continue;
            }
            for p in self.parents_of(node) {
                if !best.contains_key(p) {
                    best.insert(p, d + 1);
                    queue.push_back((p, d + 1));
                }
            }
        }
        let mut hits: Vec<HypernymHit> = best
            .into_iter()
            .map(|(l, d)| HypernymHit { distance: d, lemma: l.to_string() })
            .collect();
        hits.sort();
        hits
    }

    /// Every ancestor regardless of depth.
    pub fn all_hypernyms(&self, lemma: &str) -> Vec<HypernymHit> {
        self.hypernyms_up_to(lemma, usize::MAX)
    }

    /// Minimal number of upward edges from `lemma` to `ancestor`.
    pub fn path_distance(&self, lemma: &str, ancestor: &str) -> Option<usize> {
        if lemma == ancestor {
            return Some(0);
        }
        self.all_hypernyms(lemma)
            .into_iter()
            .find(|h| h.lemma == ancestor)
            .map(|h| h.distance)
    }

    /// Serializes back to the tab-separated format, edges sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (c, p) in self.edges() {
            out.push_str(c);
            out.push('\t');
            out.push_str(p);
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())
    }
}
