use std::collections::{BTreeMap, BTreeSet};

use super::{is_entity_id, Atom, FactBase, LogicError, Rule, RuleStore, Term};

/// Variable name to constant.
pub type Binding = BTreeMap<String, String>;

fn unify(pattern: &Atom, fact: &Atom, binding: &Binding) -> Option<Binding> {
    if pattern.pred != fact.pred || pattern.args.len() != fact.args.len() {
        return None;
    }
    let mut out = binding.clone();
    for (p, f) in pattern.args.iter().zip(&fact.args) {
        let value = f.name();
        match p {
            Term::Const(c) if c == value => {}
            Term::Const(_) => return None,
            Term::Var(v) => match out.get(v) {
                Some(bound) if bound == value => {}
                Some(_) => return None,
                None if is_entity_id(value) => {
                    out.insert(v.clone(), value.to_string());
                }
                // Variables range over entity ids only.
                None => return None,
            },
        }
    }
    Some(out)
}

/// All extensions of `binding` under which every atom of `body` is a fact.
/// `extra` holds additional derived atoms (abnormals) to match against.
pub fn match_body(body: &[Atom], facts: &FactBase, extra: &BTreeSet<Atom>, binding: &Binding) -> Vec<Binding> {
    let Some((first, rest)) = body.split_first() else {
        return vec![binding.clone()];
    };
    let lit = first.substitute(binding);
    let mut out = Vec::new();
    let candidates = facts
        .with_pred(&lit.pred)
        .chain(extra.iter().filter(|a| a.pred == lit.pred));
    for fact in candidates {
        if let Some(b) = unify(&lit, fact, binding) {
            out.extend(match_body(rest, facts, extra, &b));
        }
    }
    out
}

/// Least fixpoint of the exception rules over `facts`.
pub fn derive_abnormals(store: &RuleStore, facts: &FactBase) -> BTreeSet<Atom> {
    let mut derived = BTreeSet::new();
    loop {
        let mut changed = false;
        for exc in store.exceptions() {
            debug_assert!(exc.body_naf.is_empty(), "exception rules are negation-free");
            for b in match_body(&exc.body_pos, facts, &derived, &Binding::new()) {
                let head = exc.head.substitute(&b);
                if head.is_ground() && !derived.contains(&head) {
                    derived.insert(head);
                    changed = true;
                }
            }
        }
        if !changed {
            return derived;
        }
    }
}

/// Whether `rule`'s body holds under a complete `binding`.
pub fn check_rule_body(
    rule: &Rule,
    facts: &FactBase,
    abnormals: &BTreeSet<Atom>,
    binding: &Binding,
) -> Result<bool, LogicError> {
    if let Some(v) = rule.vars().into_iter().find(|v| !binding.contains_key(*v)) {
        return Err(LogicError::Unbound(v.to_string()));
    }
    let pos_ok = rule.body_pos.iter().all(|a| facts.contains(&a.substitute(binding)));
    let naf_ok = rule.body_naf.iter().all(|a| {
        let g = a.substitute(binding);
        !abnormals.contains(&g) && !facts.contains(&g)
    });
    Ok(pos_ok && naf_ok)
}

/// Every ground default head derivable from `facts`, paired with the id of
/// the rule deriving it, sorted by `(predicate, args, rule_id)`.
pub fn ground_query(store: &RuleStore, facts: &FactBase) -> Vec<(Atom, String)> {
    let abnormals = derive_abnormals(store, facts);
    let empty = BTreeSet::new();
    let mut out: BTreeSet<(Atom, String)> = BTreeSet::new();
    for rule in store.rules() {
        for b in match_body(&rule.body_pos, facts, &empty, &Binding::new()) {
            let blocked = rule.body_naf.iter().any(|a| {
                let g = a.substitute(&b);
                abnormals.contains(&g) || facts.contains(&g)
            });
            if blocked {
                continue;
            }
            let head = rule.head.substitute(&b);
            if head.is_ground() {
                out.insert((head, rule.id.clone()));
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn insert_fridge_rule() -> Rule {
        Rule::new(
            "r1",
            Atom::new("insert", vec![Term::var("X"), Term::constant("fridge")]).unwrap(),
            vec![Atom::unary_var("apple", "X")],
            vec![],
        )
        .unwrap()
    }

    fn store_with_exception() -> RuleStore {
        let mut store = RuleStore::new();
        store.add_rule(insert_fridge_rule()).unwrap();
        store.add_exception("r1", vec![Atom::unary_var("rotten", "X")]).unwrap();
        store
    }

    fn facts(atoms: &[(&str, &str)]) -> FactBase {
        atoms.iter().map(|(p, a)| Atom::fact1(p, a)).collect()
    }

    #[test]
    fn abnormals_from_exception() {
        let store = store_with_exception();
        let ab = derive_abnormals(&store, &facts(&[("rotten", "o1")]));
        assert_eq!(ab.into_iter().collect::<Vec<_>>(), vec![Atom::fact1("ab_r1", "o1")]);
        assert!(derive_abnormals(&store, &facts(&[("apple", "o2")])).is_empty());
        assert!(derive_abnormals(&RuleStore::new(), &facts(&[("rotten", "o1")])).is_empty());
    }

    #[test]
    fn body_check() {
        let store = store_with_exception();
        let rule = store.get("r1").unwrap();
        let bind = |x: &str| Binding::from([("X".to_string(), x.to_string())]);
        assert!(check_rule_body(rule, &facts(&[("apple", "o2")]), &BTreeSet::new(), &bind("o2")).unwrap());
        let fb = facts(&[("apple", "o1"), ("rotten", "o1")]);
        let ab = BTreeSet::from([Atom::fact1("ab_r1", "o1")]);
        assert!(!check_rule_body(rule, &fb, &ab, &bind("o1")).unwrap());
        assert_eq!(
            check_rule_body(rule, &fb, &ab, &Binding::new()).unwrap_err(),
            LogicError::Unbound("X".into())
        );
    }

    #[test]
    fn vacuous_body_holds() {
        let rule = Rule::new("r1", Atom::fact1("go", "east"), vec![], vec![]).unwrap();
        assert!(check_rule_body(&rule, &FactBase::new(), &BTreeSet::new(), &Binding::new()).unwrap());
    }

    #[test]
    fn query_blocks_exceptions() {
        let store = store_with_exception();
        let fb = facts(&[("apple", "o1"), ("rotten", "o1"), ("apple", "o2")]);
        assert_eq!(
            ground_query(&store, &fb),
            vec![(Atom::fact2("insert", "o2", "fridge"), "r1".to_string())]
        );
        assert!(ground_query(&RuleStore::new(), &fb).is_empty());
    }

    #[test]
    fn multiplicity_preserved() {
        let mut store = RuleStore::new();
        store.add_rule(insert_fridge_rule()).unwrap();
        let r2 = Rule::new(
            "r2",
            Atom::new("insert", vec![Term::var("X"), Term::constant("fridge")]).unwrap(),
            vec![Atom::unary_var("edible_fruit", "X")],
            vec![],
        )
        .unwrap();
        store.add_rule(r2).unwrap();
        let fb = facts(&[("apple", "o2"), ("edible_fruit", "o2")]);
        let got = ground_query(&store, &fb);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].1, "r1");
        assert_eq!(got[1].1, "r2");
    }

    #[test]
    fn variables_range_over_entities_only() {
        let rule = Rule::new(
            "r1",
            Atom::unary_var("take", "X"),
            vec![Atom::unary_var("apple", "X")],
            vec![],
        )
        .unwrap();
        let mut store = RuleStore::new();
        store.add_rule(rule).unwrap();
        let fb = facts(&[("apple", "fridge")]);
        assert!(ground_query(&store, &fb).is_empty());
    }

    #[test]
    fn binary_join() {
        let rule = Rule::new(
            "r1",
            Atom::unary_var("take", "X"),
            vec![Atom::unary_var("apple", "X"), Atom::new("in", vec![Term::var("X"), Term::var("C")]).unwrap(), Atom::unary_var("is_open", "C")],
            vec![],
        )
        .unwrap();
        let mut store = RuleStore::new();
        store.add_rule(rule).unwrap();
        let mut fb = facts(&[("apple", "o1"), ("apple", "o2"), ("is_open", "c1")]);
        fb.insert(Atom::fact2("in", "o1", "c1")).unwrap();
        fb.insert(Atom::fact2("in", "o2", "c2")).unwrap();
        let got = ground_query(&store, &fb);
        assert_eq!(got, vec![(Atom::fact1("take", "o1"), "r1".to_string())]);
    }
}
