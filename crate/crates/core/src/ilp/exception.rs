use super::{Example, LearnError};
use crate::generalize::information_gain;
use crate::logic::{Atom, Rule, RuleStore};

#[derive(Debug, Clone, PartialEq)]
pub enum ExceptionOutcome {
    Learned(Rule),
    /// The best exception would block at least as many examples as the
    /// default covers.
    Rejected { literal: String, exception_cover: usize, default_cover: usize },
    /// No feature of the failure separates it from the successes.
    NoDiscriminator,
}

/// Learns `ab_<rule_id>(X) :- f(X).` from a failed application of a default.
///
/// `f` is the feature of `failure` with the highest information gain for
/// separating the failure from `successes`; ties go to the smallest name.
/// Coverage is counted over `successes` plus the failure: the exception is
/// kept only if it covers strictly fewer of those examples than the default.
pub fn learn_exception(
    store: &mut RuleStore,
    rule_id: &str,
    failure: &Example,
    successes: &[Example],
) -> Result<ExceptionOutcome, LearnError> {
    learn_exception_ranked(store, rule_id, failure, successes, &[])
}

/// As [`learn_exception`], but equal-gain literals are first ranked by how
/// many of `past_failures` (earlier unrewarded examples of the same goal)
/// carry them.
pub fn learn_exception_ranked(
    store: &mut RuleStore,
    rule_id: &str,
    failure: &Example,
    successes: &[Example],
    past_failures: &[Example],
) -> Result<ExceptionOutcome, LearnError> {
    let default = store
        .get(rule_id)
        .ok_or_else(|| crate::logic::LogicError::UnknownRule(rule_id.to_string()))?;
    let body: Vec<&str> = default.body_pos.iter().map(|a| a.pred.as_str()).collect();

    let n0 = successes.len();
    let mut best: Option<(f64, usize, &str)> = None;
    for f in &failure.features {
        if body.contains(&f.as_str()) {
            continue;
        }
        let n1 = successes.iter().filter(|e| e.has(f)).count();
        let gain = information_gain(1, n0, 1, n1, 1).expect("failure covers itself");
        let support = past_failures.iter().filter(|e| e.has(f)).count();
        if gain > 0.0 && best.is_none_or(|(g, s, _)| gain > g || (gain == g && support > s)) {
            best = Some((gain, support, f));
        }
    }
    let Some((_, _, literal)) = best else {
        return Ok(ExceptionOutcome::NoDiscriminator);
    };

    let universe = successes.iter().chain(std::iter::once(failure));
    let (mut default_cover, mut exception_cover) = (0, 0);
    for e in universe {
        if e.satisfies(body.iter().copied()) {
            default_cover += 1;
            if e.has(literal) {
                exception_cover += 1;
            }
        }
    }
    if exception_cover >= default_cover {
        return Ok(ExceptionOutcome::Rejected { literal: literal.to_string(), exception_cover, default_cover });
    }

    let var = default.head.args[0].name().to_string();
    let literal = literal.to_string();
    store.add_exception(rule_id, vec![Atom::unary_var(&literal, &var)])?;
    let exc = store
        .exceptions_of(rule_id)
        .find(|e| e.body_pos.len() == 1 && e.body_pos[0].pred == literal)
        .cloned()
        .expect("exception just added or already present");
    Ok(ExceptionOutcome::Learned(exc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::ExampleKey;
    use crate::logic::{ground_query, FactBase, Term};

    fn ex(entity: &str, features: &[&str]) -> Example {
        Example {
            key: ExampleKey { entity: entity.into(), episode: 0, step: 0 },
            type_lemma: features.first().map(|s| s.to_string()),
            features: features.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn store() -> RuleStore {
        let mut s = RuleStore::new();
        let head = Atom::new("insert", vec![Term::var("X"), Term::constant("fridge")]).unwrap();
        s.add_rule(Rule::new("r1", head, vec![Atom::unary_var("apple", "X")], vec![]).unwrap()).unwrap();
        s
    }

    #[test]
    fn rotten_apple_exception() {
        let mut s = store();
        let out = learn_exception(&mut s, "r1", &ex("o1", &["apple", "rotten"]), &[ex("o2", &["apple"])]).unwrap();
        let ExceptionOutcome::Learned(rule) = out else { panic!("{out:?}") };
        assert_eq!(rule.to_string(), "ab_r1(X) :- rotten(X).");
        assert_eq!(s.get("r1").unwrap().to_string(), "insert(X,fridge) :- apple(X), not ab_r1(X).");

        // the triggering entity no longer derives the head
        let facts: FactBase = [Atom::fact1("apple", "o1"), Atom::fact1("rotten", "o1"), Atom::fact1("apple", "o2")]
            .into_iter()
            .collect();
        let heads: Vec<String> = ground_query(&s, &facts).into_iter().map(|(a, _)| a.to_string()).collect();
        assert_eq!(heads, vec!["insert(o2,fridge)"]);
    }

    #[test]
    fn no_discriminating_feature() {
        let mut s = store();
        let before = s.clone();
        let out = learn_exception(&mut s, "r1", &ex("o1", &["apple"]), &[ex("o2", &["apple", "red"]), ex("o3", &["apple"])])
            .unwrap();
        assert_eq!(out, ExceptionOutcome::NoDiscriminator);
        assert_eq!(s, before);
    }

    #[test]
    fn coverage_constraint_rejects() {
        // the only success lies outside the default, so any exception would
        // block everything the default covers
        let mut s = store();
        let before = s.clone();
        let out = learn_exception(&mut s, "r1", &ex("o1", &["apple", "rotten"]), &[ex("o2", &["banana"])]).unwrap();
        assert!(matches!(out, ExceptionOutcome::Rejected { exception_cover: 1, default_cover: 1, .. }), "{out:?}");
        assert_eq!(s, before);
    }

    #[test]
    fn past_failures_break_ties() {
        let failure = ex("o1", &["apple", "green", "rotten"]);
        let successes = [ex("o2", &["apple", "red"])];
        let mut s = store();
        let out = learn_exception(&mut s, "r1", &failure, &successes).unwrap();
        let ExceptionOutcome::Learned(rule) = out else { panic!("{out:?}") };
        assert_eq!(rule.body_pos[0].pred, "green");

        let mut s = store();
        let past = [ex("o5", &["apple", "red", "rotten"])];
        let out = learn_exception_ranked(&mut s, "r1", &failure, &successes, &past).unwrap();
        let ExceptionOutcome::Learned(rule) = out else { panic!("{out:?}") };
        assert_eq!(rule.body_pos[0].pred, "rotten");
    }

    #[test]
    fn unknown_rule() {
        let mut s = store();
        assert!(learn_exception(&mut s, "r7", &ex("o1", &["apple"]), &[]).is_err());
    }
}
