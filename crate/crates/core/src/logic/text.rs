//! Line-oriented rule text format.
//!
//! ```text
//! % rule store
//! insert(X,fridge) :- apple(X), not ab_r1(X). % id=r1 uses=4 pos=3
//! ab_r1(X) :- rotten(X). % id=r1_e1
//! insert(X,fridge) :- edible_fruit(X). % gen d=1 id=r2 uses=0 pos=0
//! ```
//!
//! Facts are bodiless ground clauses (`apple(o1).`). `<-` is accepted as a
//! synonym for `:-`. Everything after a clause's `%` is an annotation.

use super::{Atom, FactBase, LogicError, Rule, RuleStats, RuleStore, Term};

/// A parsed clause before it is turned into a [`Rule`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub head: Atom,
    pub body_pos: Vec<Atom>,
    pub body_naf: Vec<Atom>,
    pub annotation: Option<String>,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), String> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(format!("expected `{tok}` at `{}`", self.rest()))
        }
    }

    fn ident(&mut self) -> Result<&'a str, String> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(format!("expected a name at `{}`", self.rest()));
        }
        let id = &self.rest()[..len];
        self.pos += len;
        Ok(id)
    }

    fn atom(&mut self) -> Result<Atom, String> {
        let pred = self.ident()?;
        self.expect("(")?;
        let mut args = Vec::new();
        loop {
            let name = self.ident()?;
            args.push(if name.starts_with(|c: char| c.is_ascii_uppercase()) {
                Term::Var(name.to_string())
            } else {
                Term::Const(name.to_string())
            });
            if self.eat(")") {
                break;
            }
            self.expect(",")?;
        }
        Atom::new(pred, args).map_err(|e| e.to_string())
    }

    fn literal(&mut self) -> Result<(bool, Atom), String> {
        self.skip_ws();
        let negated = self.rest().starts_with("not ") || self.rest().starts_with("not\t");
        if negated {
            self.pos += 3;
        }
        Ok((negated, self.atom()?))
    }

    fn clause(&mut self) -> Result<Clause, String> {
        let head = self.atom()?;
        let mut body_pos = Vec::new();
        let mut body_naf = Vec::new();
        if self.eat(":-") || self.eat("<-") {
            loop {
                let (neg, a) = self.literal()?;
                if neg {
                    body_naf.push(a);
                } else {
                    body_pos.push(a);
                }
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(".")?;
        self.skip_ws();
        let annotation = match self.rest() {
            "" => None,
            r if r.starts_with('%') => Some(r[1..].trim().to_string()),
            r => return Err(format!("unexpected trailing input `{r}`")),
        };
        Ok(Clause { head, body_pos, body_naf, annotation })
    }
}

pub fn parse_atom(s: &str) -> Result<Atom, LogicError> {
    let mut c = Cursor::new(s);
    let atom = c.atom().map_err(|reason| LogicError::Syntax { line: 1, reason })?;
    c.skip_ws();
    if !c.rest().is_empty() {
        return Err(LogicError::Syntax { line: 1, reason: format!("trailing input `{}`", c.rest()) });
    }
    Ok(atom)
}

/// Parses one clause line (without line-number context).
pub fn parse_clause(line: &str) -> Result<Clause, String> {
    Cursor::new(line).clause()
}

fn clauses(text: &str) -> Result<Vec<(usize, Clause)>, LogicError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let clause = parse_clause(line).map_err(|reason| LogicError::Syntax { line: idx + 1, reason })?;
        out.push((idx + 1, clause));
    }
    Ok(out)
}

/// Parses a file of ground facts.
pub fn parse_facts(text: &str) -> Result<FactBase, LogicError> {
    let mut fb = FactBase::new();
    for (line, c) in clauses(text)? {
        if !c.body_pos.is_empty() || !c.body_naf.is_empty() {
            return Err(LogicError::Syntax { line, reason: "facts cannot have a body".into() });
        }
        fb.insert(c.head).map_err(|e| LogicError::Syntax { line, reason: e.to_string() })?;
    }
    Ok(fb)
}

pub fn render_facts(facts: &FactBase) -> String {
    facts.iter().map(|a| format!("{a}.\n")).collect()
}

#[derive(Debug, Default)]
struct Annotation {
    id: Option<String>,
    generalized: bool,
    distance: Option<u32>,
    stats: RuleStats,
}

fn parse_annotation(text: &str) -> Result<Annotation, String> {
    let mut ann = Annotation::default();
    for tok in text.split_whitespace() {
        match tok.split_once('=') {
            None if tok == "gen" => ann.generalized = true,
            Some(("id", v)) => ann.id = Some(v.to_string()),
            Some(("d", v)) => ann.distance = Some(v.parse().map_err(|_| format!("bad distance `{v}`"))?),
            Some(("uses", v)) => ann.stats.uses = v.parse().map_err(|_| format!("bad count `{v}`"))?,
            Some(("pos", v)) => ann.stats.positive_uses = v.parse().map_err(|_| format!("bad count `{v}`"))?,
            _ => return Err(format!("unknown annotation `{tok}`")),
        }
    }
    Ok(ann)
}

/// One line per rule with a trailing annotation carrying id, provenance
/// and usage counts.
pub fn render_rule(rule: &Rule) -> String {
    let mut ann = String::new();
    if rule.generalized {
        ann.push_str("gen ");
        if let Some(d) = rule.gen_distance {
            ann.push_str(&format!("d={d} "));
        }
    }
    ann.push_str(&format!("id={}", rule.id));
    if !rule.is_exception() {
        ann.push_str(&format!(" uses={} pos={}", rule.stats.uses, rule.stats.positive_uses));
    }
    format!("{rule} % {ann}")
}

pub const STORE_HEADER: &str = "% rule store: defaults first, then ab_<rule_id> exceptions";

pub fn render_rules(store: &RuleStore) -> String {
    let mut out = String::from(STORE_HEADER);
    out.push('\n');
    for r in store.rules().iter().chain(store.exceptions()) {
        out.push_str(&render_rule(r));
        out.push('\n');
    }
    out
}

/// Inverse of [`render_rules`]. Clauses without an `id=` annotation receive
/// fresh ids.
pub fn parse_rules(text: &str) -> Result<RuleStore, LogicError> {
    let mut store = RuleStore::new();
    let mut pending = Vec::new();
    let mut unnamed = Vec::new();
    for (line, c) in clauses(text)? {
        let syntax = |reason: String| LogicError::Syntax { line, reason };
        let ann = parse_annotation(c.annotation.as_deref().unwrap_or("")).map_err(syntax)?;
        let is_exc = c.head.pred.starts_with("ab_");
        let id = ann.id.clone();
        let mut rule = Rule::new(id.as_deref().unwrap_or("_"), c.head, c.body_pos, c.body_naf)
            .map_err(|e| syntax(e.to_string()))?;
        rule.generalized = ann.generalized;
        rule.gen_distance = ann.distance;
        rule.stats = ann.stats;
        if is_exc {
            pending.push((line, rule, id.is_none()));
        } else if id.is_none() {
            unnamed.push((line, rule));
        } else {
            if store.get(&rule.id).is_some() {
                return Err(syntax(format!("duplicate rule id `{}`", rule.id)));
            }
            store.push_raw(rule);
        }
    }
    for (line, mut rule) in unnamed {
        rule.id = store.fresh_id();
        store.add_rule(rule).map_err(|e| LogicError::Syntax { line, reason: e.to_string() })?;
    }
    // keep fresh ids clear of loaded ones
    let max = store
        .rules()
        .iter()
        .filter_map(|r| r.id.strip_prefix('r').and_then(|n| n.parse::<u32>().ok()))
        .max()
        .unwrap_or(0);
    store.bump_next_id(max);
    for (line, mut rule, unnamed) in pending {
        let err = |e: LogicError| LogicError::Syntax { line, reason: e.to_string() };
        if unnamed {
            let default = rule.head.pred.trim_start_matches("ab_").to_string();
            let n = store.exceptions_of(&default).count();
            rule.id = format!("{default}_e{}", n + 1);
        }
        store.insert_exception(rule).map_err(err)?;
    }
    Ok(store)
}

impl RuleStore {
    pub(crate) fn bump_next_id(&mut self, n: u32) {
        self.next_id = self.next_id.max(n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clause_round_trip() {
        for line in [
            "insert(X,fridge) :- apple(X), not ab_r1(X).",
            "take(X) :- apple(X).",
            "apple(o1).",
            "in(o1,c2).",
        ] {
            let c = parse_clause(line).unwrap();
            let r = Rule::new("r1", c.head, c.body_pos, c.body_naf).unwrap();
            assert_eq!(r.to_string(), line);
        }
    }

    #[test]
    fn whitespace_and_arrow_tolerated() {
        let c = parse_clause("insert( X , fridge )  <-  apple(X) ,  not ab(X) .").unwrap();
        assert_eq!(c.head.to_string(), "insert(X,fridge)");
        assert_eq!(c.body_naf[0].to_string(), "ab(X)");
    }

    #[test]
    fn syntax_errors_carry_line() {
        let err = parse_rules("% header\ntake(X) :- apple(X).\ntake(X :- apple(X).\n").unwrap_err();
        assert!(matches!(err, LogicError::Syntax { line: 3, .. }), "{err:?}");
        assert!(parse_facts("apple(X).").is_err());
        assert!(parse_facts("apple(o1) :- b(o1).").is_err());
    }

    #[test]
    fn store_round_trip() {
        let text = "\
% rule store
insert(X,fridge) :- apple(X), not ab_r1(X). % id=r1 uses=10 pos=7
insert(X,fridge) :- edible_fruit(X). % gen d=1 id=r2 uses=2 pos=2
ab_r1(X) :- rotten(X). % id=r1_e1
";
        let store = parse_rules(text).unwrap();
        assert_eq!(store.rules().len(), 2);
        assert_eq!(store.exceptions().len(), 1);
        let r2 = store.get("r2").unwrap();
        assert!(r2.generalized);
        assert_eq!(r2.gen_distance, Some(1));
        assert_eq!(store.get("r1").unwrap().stats, RuleStats { uses: 10, positive_uses: 7 });
        let again = parse_rules(&render_rules(&store)).unwrap();
        assert_eq!(again, store);
    }

    #[test]
    fn unnamed_rules_get_ids() {
        let store = parse_rules("take(X) :- apple(X).\nab_r1(X) :- rotten(X).\n").unwrap();
        assert_eq!(store.rules()[0].id, "r1");
        assert_eq!(store.exceptions()[0].id, "r1_e1");
        assert_eq!(store.rules()[0].body_naf.len(), 1);
    }

    #[test]
    fn empty_store_renders_header() {
        let s = render_rules(&RuleStore::new());
        assert_eq!(s, format!("{STORE_HEADER}\n"));
        assert!(parse_rules(&s).unwrap().is_empty());
    }

    #[test]
    fn facts_round_trip() {
        let fb = parse_facts("apple(o1).\nrotten(o1).\nin(o1,c1).\n% comment\n").unwrap();
        assert_eq!(fb.len(), 3);
        assert_eq!(parse_facts(&render_facts(&fb)).unwrap(), fb);
    }
}
