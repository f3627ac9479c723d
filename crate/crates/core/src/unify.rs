//! One-sided unification against ground terms and precondition matching.

use crate::term::{Predicate, State, Substitution, Term};

/// Unifies a pattern with a ground term, extending `sigma`.
///
/// Returns `None` when the two cannot be made equal. Because `ground` has no
/// variables, no occurs check is needed; the debug assertion documents that.
pub fn unify_term(pattern: &Term, ground: &Term, sigma: &Substitution) -> Option<Substitution> {
    debug_assert!(ground.is_ground(), "right-hand side of unify must be ground");
    let mut out = sigma.clone();
    unify_into(pattern, ground, &mut out).then_some(out)
}

/// Predicate-level unification: functor and arity must match exactly.
pub fn unify(pattern: &Predicate, ground: &Predicate, sigma: &Substitution) -> Option<Substitution> {
    let mut out = sigma.clone();
    unify_predicate_into(pattern, ground, &mut out).then_some(out)
}

fn unify_predicate_into(pattern: &Predicate, ground: &Predicate, sigma: &mut Substitution) -> bool {
    debug_assert!(ground.is_ground(), "right-hand side of unify must be ground");
    pattern.functor == ground.functor
        && pattern.args.len() == ground.args.len()
        && pattern.args.iter().zip(&ground.args).all(|(p, g)| unify_into(p, g, sigma))
}

fn unify_into(pattern: &Term, ground: &Term, sigma: &mut Substitution) -> bool {
    match (pattern, ground) {
        (Term::Variable(v), _) => match sigma.get(v) {
            Some(bound) => bound == ground,
            None => {
                sigma.bind(v.clone(), ground.clone());
                true
            }
        },
        (Term::Compound(fp, ap), Term::Compound(fg, ag)) => {
            fp == fg && ap.len() == ag.len() && ap.iter().zip(ag).all(|(p, g)| unify_into(p, g, sigma))
        }
        (Term::Number(a), Term::Number(b)) => a == b,
        (Term::Literal(a), Term::Literal(b)) => a == b,
        _ => false,
    }
}

/// Every substitution under which all precondition predicates occur in the
/// state. Empty preconditions yield a single empty substitution.
///
/// Matching is not injective: two precondition predicates may land on the
/// same state predicate. Enumeration backtracks over precondition predicates
/// in the order given and over candidate state predicates in canonical
/// order, so the result order is deterministic.
pub fn match_precondition<'a, I>(precondition: I, state: &State) -> Vec<Substitution>
where
    I: IntoIterator<Item = &'a Predicate>,
{
    match_precondition_from(precondition, state, &Substitution::new())
}

/// As [`match_precondition`], starting from existing bindings.
pub fn match_precondition_from<'a, I>(
    precondition: I,
    state: &State,
    seed: &Substitution,
) -> Vec<Substitution>
where
    I: IntoIterator<Item = &'a Predicate>,
{
    let pre: Vec<&Predicate> = precondition.into_iter().collect();
    let mut out = Vec::new();
    let mut sigma = seed.clone();
    search(&pre, state, &mut sigma, &mut out);
    out
}

fn search(pre: &[&Predicate], state: &State, sigma: &mut Substitution, out: &mut Vec<Substitution>) {
    let Some((first, rest)) = pre.split_first() else {
        out.push(sigma.clone());
        return;
    };
    for candidate in state.with_signature(&first.functor, first.arity()) {
        let mut next = sigma.clone();
        if unify_predicate_into(first, candidate, &mut next) {
            search(rest, state, &mut next, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_predicate;

    fn p(text: &str) -> Predicate {
        parse_predicate(text).unwrap()
    }

    fn state(items: &[&str]) -> State {
        items.iter().map(|t| p(t)).collect()
    }

    #[test]
    fn forced_binding() {
        let s = unify(&p("at(P, bs1)"), &p("at(p1, bs1)"), &Substitution::new()).unwrap();
        assert_eq!(s.to_string(), "{P=p1}");
    }

    #[test]
    fn literal_mismatch_fails() {
        assert!(unify(&p("at(p1, bs1)"), &p("at(p1, bs2)"), &Substitution::new()).is_none());
    }

    #[test]
    fn destructures_compound() {
        let s = unify(&p("waiting(P, min(T))"), &p("waiting(p1, min(2))"), &Substitution::new()).unwrap();
        assert_eq!(s.to_string(), "{P=p1, T=2}");
    }

    #[test]
    fn functor_and_arity_must_match() {
        let empty = Substitution::new();
        assert!(unify(&p("at(X)"), &p("at(a, b)"), &empty).is_none());
        assert!(unify(&p("on(X, Y)"), &p("at(a, b)"), &empty).is_none());
        assert!(unify(&p("f(g(X))"), &p("f(h(a))"), &empty).is_none());
        assert!(unify(&p("f(X, X)"), &p("f(a, b)"), &empty).is_none());
        assert!(unify(&p("f(X)"), &p("f(2)"), &empty).is_some());
    }

    #[test]
    fn respects_incoming_bindings() {
        let sigma = unify(&p("a(X)"), &p("a(k)"), &Substitution::new()).unwrap();
        assert!(unify(&p("b(X)"), &p("b(j)"), &sigma).is_none());
        assert!(unify(&p("b(X)"), &p("b(k)"), &sigma).is_some());
    }

    #[test]
    fn matches_each_passenger() {
        let s = state(&["is_passenger(p1)", "is_passenger(p2)"]);
        let pre = [p("is_passenger(P)")];
        let got: Vec<String> = match_precondition(&pre, &s).iter().map(|s| s.to_string()).collect();
        assert_eq!(got, vec!["{P=p1}", "{P=p2}"]);
    }

    #[test]
    fn empty_precondition_matches_once() {
        let got = match_precondition(&[], &state(&["x(1)"]));
        assert_eq!(got, vec![Substitution::new()]);
        assert_eq!(match_precondition(&[], &State::new()), vec![Substitution::new()]);
    }

    #[test]
    fn join_on_shared_variable() {
        let s = state(&["at(b25, bs1)", "is_bus(b25)", "at(p1, bs1)"]);
        let pre = [p("at(P, S)"), p("is_bus(P)")];
        let got: Vec<String> = match_precondition(&pre, &s).iter().map(|s| s.to_string()).collect();
        assert_eq!(got, vec!["{P=b25, S=bs1}"]);
    }

    #[test]
    fn matching_is_not_injective() {
        let s = state(&["p(a)"]);
        let pre = [p("p(X)"), p("p(Y)")];
        let got: Vec<String> = match_precondition(&pre, &s).iter().map(|s| s.to_string()).collect();
        assert_eq!(got, vec!["{X=a, Y=a}"]);
    }

    #[test]
    fn no_match_is_empty() {
        assert!(match_precondition(&[p("q(X)")], &state(&["p(a)"])).is_empty());
    }
}
