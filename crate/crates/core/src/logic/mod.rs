//! Default rules with negation-as-failure exceptions over a finite fact base.
//!
//! The evaluator covers the function-free, stratified fragment the agent
//! learns: exception rules (heads `ab_<rule_id>/1`, no negation) form the
//! lower stratum and default rules the upper one.

mod eval;
pub mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use eval::{check_rule_body, derive_abnormals, ground_query, match_body, Binding};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogicError {
    #[error("atom `{pred}` has arity {arity}, expected 1 or 2")]
    Arity { pred: String, arity: usize },
    #[error("invalid name `{0}`")]
    Name(String),
    #[error("fact `{0}` is not ground")]
    NotGround(String),
    #[error("rule `{rule}` is unsafe: variable {var} does not occur in a positive body literal")]
    Unsafe { rule: String, var: String },
    #[error("variable {0} is unbound")]
    Unbound(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("duplicate rule id `{0}`")]
    DuplicateId(String),
    #[error("exception rule `{0}` must not contain negated literals")]
    Unstratified(String),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(name.to_string())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Entity identifiers live in their own namespace: a one-letter prefix
/// (`o` objects, `c` receptacles) followed by digits.
pub fn is_entity_id(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('o' | 'c'))
        && s.len() >= 2
        && chars.all(|c| c.is_ascii_digit())
}

fn is_const_name(s: &str) -> bool {
    crate::taxonomy::is_lemma(s) && s.starts_with(|c: char| c.is_ascii_lowercase() || c.is_ascii_digit())
}

fn is_var_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Result<Self, LogicError> {
        if !is_const_name(pred) {
            return Err(LogicError::Name(pred.to_string()));
        }
        if !(1..=2).contains(&args.len()) {
            return Err(LogicError::Arity { pred: pred.to_string(), arity: args.len() });
        }
        for a in &args {
            let ok = match a {
                Term::Var(v) => is_var_name(v),
                Term::Const(c) => is_const_name(c),
            };
            if !ok {
                return Err(LogicError::Name(a.name().to_string()));
            }
        }
        Ok(Atom { pred: pred.to_string(), args })
    }

    /// `pred(X)` with a variable argument.
    pub fn unary_var(pred: &str, var: &str) -> Self {
        Atom::new(pred, vec![Term::var(var)]).expect("valid unary atom")
    }

    /// Ground unary atom.
    pub fn fact1(pred: &str, arg: &str) -> Self {
        Atom::new(pred, vec![Term::constant(arg)]).expect("valid ground atom")
    }

    /// Ground binary atom.
    pub fn fact2(pred: &str, a: &str, b: &str) -> Self {
        Atom::new(pred, vec![Term::constant(a), Term::constant(b)]).expect("valid ground atom")
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Replaces bound variables; unbound ones are left in place.
    pub fn substitute(&self, binding: &Binding) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => binding
                        .get(v)
                        .map(|c| Term::Const(c.clone()))
                        .unwrap_or_else(|| t.clone()),
                    Term::Const(_) => t.clone(),
                })
                .collect(),
        }
    }

    pub fn first_arg(&self) -> &str {
        self.args[0].name()
    }

    pub fn second_arg(&self) -> Option<&str> {
        self.args.get(1).map(Term::name)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl std::str::FromStr for Atom {
    type Err = LogicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        text::parse_atom(s)
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Usage counters behind a rule's confidence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleStats {
    pub uses: u32,
    pub positive_uses: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub head: Atom,
    pub body_pos: Vec<Atom>,
    pub body_naf: Vec<Atom>,
    pub generalized: bool,
    /// Entity-to-hypernym distance of a generalized rule.
    pub gen_distance: Option<u32>,
    pub stats: RuleStats,
}

impl Rule {
    pub fn new(id: &str, head: Atom, body_pos: Vec<Atom>, body_naf: Vec<Atom>) -> Result<Self, LogicError> {
        let rule = Rule {
            id: id.to_string(),
            head,
            body_pos,
            body_naf,
            generalized: false,
            gen_distance: None,
            stats: RuleStats::default(),
        };
        rule.check_safety()?;
        Ok(rule)
    }

    pub fn check_safety(&self) -> Result<(), LogicError> {
        let bound: BTreeSet<&str> = self.body_pos.iter().flat_map(Atom::vars).collect();
        for v in self.head.vars().chain(self.body_naf.iter().flat_map(Atom::vars)) {
            if !bound.contains(v) {
                return Err(LogicError::Unsafe { rule: self.to_string(), var: v.to_string() });
            }
        }
        Ok(())
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        std::iter::once(&self.head)
            .chain(&self.body_pos)
            .chain(&self.body_naf)
            .flat_map(Atom::vars)
            .collect()
    }

    /// Head and positive body, the identity used to detect duplicate rules.
    pub fn signature(&self) -> (Atom, Vec<Atom>) {
        let mut body = self.body_pos.clone();
        body.sort();
        (self.head.clone(), body)
    }

    pub fn is_exception(&self) -> bool {
        self.head.pred.starts_with("ab_")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body_pos.is_empty() || !self.body_naf.is_empty() {
            f.write_str(" :- ")?;
            let lits = self
                .body_pos
                .iter()
                .map(|a| a.to_string())
                .chain(self.body_naf.iter().map(|a| format!("not {a}")));
            for (i, l) in lits.enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                f.write_str(&l)?;
            }
        }
        f.write_str(".")
    }
}

/// Abnormality predicate guarding the default with this id.
pub fn abnormal_predicate(rule_id: &str) -> String {
    format!("ab_{rule_id}")
}

/// Ground facts of one observation, plus the type lemma of each entity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactBase {
    facts: BTreeSet<Atom>,
    #[serde(default)]
    types: BTreeMap<String, String>,
}

impl FactBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, atom: Atom) -> Result<bool, LogicError> {
        if !atom.is_ground() {
            return Err(LogicError::NotGround(atom.to_string()));
        }
        Ok(self.facts.insert(atom))
    }

    /// Records `lemma(entity)` and remembers `lemma` as the entity's type.
    pub fn insert_typed(&mut self, entity: &str, lemma: &str) -> Result<(), LogicError> {
        self.insert(Atom::new(lemma, vec![Term::constant(entity)])?)?;
        self.types.insert(entity.to_string(), lemma.to_string());
        Ok(())
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.facts.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.facts.iter()
    }

    pub fn with_pred<'a>(&'a self, pred: &'a str) -> impl Iterator<Item = &'a Atom> + 'a {
        let start = Atom { pred: pred.to_string(), args: Vec::new() };
        self.facts.range(start..).take_while(move |a| a.pred == pred)
    }

    pub fn type_of(&self, entity: &str) -> Option<&str> {
        self.types.get(entity).map(String::as_str)
    }

    pub fn types(&self) -> impl Iterator<Item = (&str, &str)> {
        self.types.iter().map(|(e, t)| (e.as_str(), t.as_str()))
    }

    /// Entity ids occurring anywhere in the facts.
    pub fn entities(&self) -> BTreeSet<&str> {
        self.facts
            .iter()
            .flat_map(|a| a.args.iter().map(Term::name))
            .filter(|n| is_entity_id(n))
            .collect()
    }

    /// Unary predicates holding of `entity`.
    pub fn unary_of(&self, entity: &str) -> BTreeSet<String> {
        self.facts
            .iter()
            .filter(|a| a.arity() == 1 && a.first_arg() == entity)
            .map(|a| a.pred.clone())
            .collect()
    }
}

impl FromIterator<Atom> for FactBase {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        let mut fb = FactBase::new();
        for a in iter {
            fb.insert(a).expect("ground fact");
        }
        fb
    }
}

/// Default rules and their exception rules.
#[derive(Debug, Clone, Default)]
pub struct RuleStore {
    rules: Vec<Rule>,
    exceptions: Vec<Rule>,
    next_id: u32,
}

impl PartialEq for RuleStore {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules && self.exceptions == other.exceptions
    }
}

impl Eq for RuleStore {}

impl RuleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn exceptions(&self) -> &[Rule] {
        &self.exceptions
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.exceptions.is_empty()
    }

    pub fn fresh_id(&mut self) -> String {
        loop {
            self.next_id += 1;
            let id = format!("r{}", self.next_id);
            if !self.has_id(&id) {
                return id;
            }
        }
    }

    fn has_id(&self, id: &str) -> bool {
        self.rules.iter().chain(&self.exceptions).any(|r| r.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Rule> {
        self.rules.iter_mut().find(|r| r.id == id)
    }

    pub fn contains_signature(&self, rule: &Rule) -> bool {
        let sig = rule.signature();
        self.rules.iter().chain(&self.exceptions).any(|r| r.signature() == sig)
    }

    /// Adds a default rule. Returns `false` when an identical head/body pair is
    /// already stored.
    pub fn add_rule(&mut self, rule: Rule) -> Result<bool, LogicError> {
        rule.check_safety()?;
        if self.has_id(&rule.id) {
            return Err(LogicError::DuplicateId(rule.id));
        }
        if self.contains_signature(&rule) {
            return Ok(false);
        }
        if let Some(n) = rule.id.strip_prefix('r').and_then(|n| n.parse::<u32>().ok()) {
            self.next_id = self.next_id.max(n);
        }
        self.rules.push(rule);
        Ok(true)
    }

    /// Adds `ab_<rule_id>(X) :- body` and guards the default with
    /// `not ab_<rule_id>(X)`. `body` must use the variable of the default's
    /// first head argument.
    pub fn add_exception(&mut self, rule_id: &str, body: Vec<Atom>) -> Result<bool, LogicError> {
        let default = self.get(rule_id).ok_or_else(|| LogicError::UnknownRule(rule_id.to_string()))?;
        let var = default.head.args[0].clone();
        let ab_head = Atom::new(&abnormal_predicate(rule_id), vec![var])?;
        let n = self.exceptions.iter().filter(|e| e.head.pred == ab_head.pred).count();
        let exc = Rule::new(&format!("{rule_id}_e{}", n + 1), ab_head.clone(), body, Vec::new())?;
        self.insert_exception(exc)
    }

    /// Inserts an already built exception rule and links its default.
    pub fn insert_exception(&mut self, exc: Rule) -> Result<bool, LogicError> {
        if !exc.body_naf.is_empty() {
            return Err(LogicError::Unstratified(exc.to_string()));
        }
        exc.check_safety()?;
        let rule_id = exc
            .head
            .pred
            .strip_prefix("ab_")
            .ok_or_else(|| LogicError::Name(exc.head.pred.clone()))?
            .to_string();
        if self.get(&rule_id).is_none() {
            return Err(LogicError::UnknownRule(rule_id));
        }
        if self.contains_signature(&exc) {
            return Ok(false);
        }
        if self.has_id(&exc.id) {
            return Err(LogicError::DuplicateId(exc.id));
        }
        let head = exc.head.clone();
        self.exceptions.push(exc);
        let default = self.get_mut(&rule_id).expect("checked above");
        if !default.body_naf.contains(&head) {
            default.body_naf.push(head);
        }
        Ok(true)
    }

    pub fn exceptions_of(&self, rule_id: &str) -> impl Iterator<Item = &Rule> {
        let pred = abnormal_predicate(rule_id);
        self.exceptions.iter().filter(move |e| e.head.pred == pred)
    }

    /// Removes a default rule together with its exceptions.
    pub fn remove_rule(&mut self, rule_id: &str) -> Option<Rule> {
        let pos = self.rules.iter().position(|r| r.id == rule_id)?;
        let pred = abnormal_predicate(rule_id);
        self.exceptions.retain(|e| e.head.pred != pred);
        Some(self.rules.remove(pos))
    }

    pub(crate) fn push_raw(&mut self, rule: Rule) {
        self.rules.push(rule);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_validation() {
        assert!(Atom::new("insert", vec![Term::var("X"), Term::constant("fridge")]).is_ok());
        assert!(matches!(Atom::new("p", vec![]), Err(LogicError::Arity { .. })));
        assert!(Atom::new("Bad", vec![Term::var("X")]).is_err());
        assert!(Atom::new("p", vec![Term::constant("has space")]).is_err());
    }

    #[test]
    fn entity_namespace() {
        assert!(is_entity_id("o1"));
        assert!(is_entity_id("c12"));
        assert!(!is_entity_id("fridge"));
        assert!(!is_entity_id("o"));
        assert!(!is_entity_id("orange"));
    }

    #[test]
    fn unsafe_rule_rejected() {
        let err = Rule::new("r1", Atom::unary_var("take", "X"), vec![], vec![]).unwrap_err();
        assert!(matches!(err, LogicError::Unsafe { .. }));
        let err = Rule::new(
            "r1",
            Atom::unary_var("take", "X"),
            vec![Atom::unary_var("apple", "X")],
            vec![Atom::unary_var("ab_r1", "Y")],
        )
        .unwrap_err();
        assert!(matches!(err, LogicError::Unsafe { .. }));
    }

    #[test]
    fn exception_links_default_once() {
        let mut store = RuleStore::new();
        let r = Rule::new("r1", Atom::unary_var("take", "X"), vec![Atom::unary_var("apple", "X")], vec![]).unwrap();
        store.add_rule(r).unwrap();
        assert!(store.add_exception("r1", vec![Atom::unary_var("rotten", "X")]).unwrap());
        assert!(store.add_exception("r1", vec![Atom::unary_var("dirty", "X")]).unwrap());
        assert!(!store.add_exception("r1", vec![Atom::unary_var("rotten", "X")]).unwrap());
        assert_eq!(store.get("r1").unwrap().body_naf.len(), 1);
        assert_eq!(store.exceptions_of("r1").count(), 2);
        assert_eq!(store.get("r1").unwrap().to_string(), "take(X) :- apple(X), not ab_r1(X).");
        assert!(store.add_exception("r9", vec![Atom::unary_var("x", "X")]).is_err());
    }

    #[test]
    fn duplicate_signature_ignored() {
        let mut store = RuleStore::new();
        let mk = |id: &str| Rule::new(id, Atom::unary_var("take", "X"), vec![Atom::unary_var("apple", "X")], vec![]).unwrap();
        assert!(store.add_rule(mk("r1")).unwrap());
        assert!(!store.add_rule(mk("r2")).unwrap());
        assert!(matches!(store.add_rule(mk("r1")), Err(LogicError::DuplicateId(_))));
        assert_eq!(store.fresh_id(), "r2");
    }

    #[test]
    fn fact_base_queries() {
        let mut fb = FactBase::new();
        fb.insert_typed("o1", "apple").unwrap();
        fb.insert(Atom::fact1("rotten", "o1")).unwrap();
        fb.insert(Atom::fact2("in", "o1", "c1")).unwrap();
        fb.insert_typed("c1", "fridge").unwrap();
        assert_eq!(fb.type_of("o1"), Some("apple"));
        assert_eq!(fb.entities().into_iter().collect::<Vec<_>>(), vec!["c1", "o1"]);
        assert_eq!(fb.unary_of("o1").into_iter().collect::<Vec<_>>(), vec!["apple", "rotten"]);
        assert_eq!(fb.with_pred("in").count(), 1);
        assert!(fb.insert(Atom::unary_var("apple", "X")).is_err());
    }
}
