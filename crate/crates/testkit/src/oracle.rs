//! Exhaustive reference semantics.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use kbplan_core::{ActionKind, FunctionCall, Number, Predicate, State, Term, TransitionSpec};
use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};

pub type Bindings = BTreeMap<String, Term>;

/// One successor in a form independent of the engine's types.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleStep {
    pub transition: String,
    pub bindings: Vec<(String, Term)>,
    pub destination: State,
}

fn subterms(t: &Term, out: &mut BTreeSet<Term>) {
    out.insert(t.clone());
    if let Term::Compound(_, args) = t {
        for a in args {
            subterms(a, out);
        }
    }
}

/// Every term occurring at any depth under a predicate of `state`.
pub fn universe(state: &State) -> Vec<Term> {
    let mut out = BTreeSet::new();
    for p in state.iter() {
        for a in &p.args {
            subterms(a, &mut out);
        }
    }
    out.into_iter().collect()
}

fn term_vars(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Variable(v) => {
            out.insert(v.to_string());
        }
        Term::Compound(_, args) => args.iter().for_each(|a| term_vars(a, out)),
        _ => {}
    }
}

fn predicate_vars<'a>(ps: impl IntoIterator<Item = &'a Predicate>) -> Vec<String> {
    let mut out = BTreeSet::new();
    for p in ps {
        p.args.iter().for_each(|a| term_vars(a, &mut out));
    }
    out.into_iter().collect()
}

fn instantiate(t: &Term, b: &Bindings) -> Term {
    match t {
        Term::Variable(v) => b.get(&**v).cloned().unwrap_or_else(|| t.clone()),
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| instantiate(a, b)).collect()),
        _ => t.clone(),
    }
}

fn instantiate_predicate(p: &Predicate, b: &Bindings) -> Predicate {
    Predicate { functor: p.functor.clone(), args: p.args.iter().map(|a| instantiate(a, b)).collect() }
}

/// All total assignments of the precondition's variables to universe terms
/// under which every instantiated precondition predicate is in `state`.
/// Depth-first over variables in name order; a predicate is checked as soon
/// as all its variables are assigned, which prunes without changing the
/// result.
pub fn brute_force_matches<'a>(pre: impl IntoIterator<Item = &'a Predicate> + Clone, state: &State) -> Vec<Bindings> {
    let vars = predicate_vars(pre.clone());
    let pool = universe(state);
    // checks[k]: predicates whose last variable (in `vars` order) is vars[k].
    let mut checks: Vec<Vec<&Predicate>> = vec![Vec::new(); vars.len() + 1];
    for p in pre {
        let mut own = BTreeSet::new();
        p.args.iter().for_each(|a| term_vars(a, &mut own));
        let last = own.iter().map(|v| vars.iter().position(|w| w == v).unwrap() + 1).max().unwrap_or(0);
        checks[last].push(p);
    }
    let mut out = Vec::new();
    let mut b = Bindings::new();
    extend(0, &vars, &pool, &checks, state, &mut b, &mut out);
    out
}

fn extend(
    depth: usize,
    vars: &[String],
    pool: &[Term],
    checks: &[Vec<&Predicate>],
    state: &State,
    b: &mut Bindings,
    out: &mut Vec<Bindings>,
) {
    if !checks[depth].iter().all(|p| state.contains(&instantiate_predicate(p, b))) {
        return;
    }
    if depth == vars.len() {
        out.push(b.clone());
        return;
    }
    for t in pool {
        b.insert(vars[depth].clone(), t.clone());
        extend(depth + 1, vars, pool, checks, state, b, out);
    }
    b.remove(&vars[depth]);
}

fn rational(t: &Term) -> Option<Rational64> {
    match t {
        Term::Number(n) => Some(Rational64::new(n.numer(), n.denom())),
        _ => None,
    }
}

fn number(r: Rational64) -> Term {
    Term::Number(Number::from_ratio(*r.numer(), *r.denom()).expect("reduced ratio"))
}

enum Eval {
    Test(bool),
    Value(Term),
    Fail,
}

fn eval_call(name: &str, inputs: &[Term]) -> Eval {
    let test = |f: fn(&Rational64, &Rational64) -> bool| match (rational(&inputs[0]), rational(&inputs[1])) {
        (Some(a), Some(b)) => Eval::Test(f(&a, &b)),
        _ => Eval::Fail,
    };
    let value = |f: fn(&Rational64, &Rational64) -> Option<Rational64>| match (rational(&inputs[0]), rational(&inputs[1])) {
        (Some(a), Some(b)) => f(&a, &b).map_or(Eval::Fail, |r| Eval::Value(number(r))),
        _ => Eval::Fail,
    };
    match name {
        "equal" => Eval::Test(inputs[0] == inputs[1]),
        "not_equal" => Eval::Test(inputs[0] != inputs[1]),
        "less_than" => test(|a, b| a < b),
        "less_or_equal" => test(|a, b| a <= b),
        "greater_than" => test(|a, b| a > b),
        "greater_or_equal" => test(|a, b| a >= b),
        "add" => value(|a, b| a.checked_add(b)),
        "subtract" => value(|a, b| a.checked_sub(b)),
        "multiply" => value(|a, b| a.checked_mul(b)),
        "divide" => value(|a, b| if b.is_zero() { None } else { a.checked_div(b) }),
        "min" => value(|a, b| Some(*a.min(b))),
        "max" => value(|a, b| Some(*a.max(b))),
        "abs" => match rational(&inputs[0]) {
            Some(a) if *a.numer() != i64::MIN => Eval::Value(number(a.abs())),
            _ => Eval::Fail,
        },
        other => panic!("oracle: unknown function {other}"),
    }
}

fn is_test(name: &str) -> bool {
    matches!(name, "equal" | "not_equal" | "less_than" | "less_or_equal" | "greater_than" | "greater_or_equal")
}

/// Runs the computation under `b`; `None` when some call has no tuple.
pub fn run_computation(calls: &[FunctionCall], b: &Bindings) -> Option<Bindings> {
    let mut b = b.clone();
    for call in calls {
        let n_inputs = if is_test(&call.functor) { call.args.len() } else { call.args.len() - 1 };
        let inputs: Vec<Term> = call.args[..n_inputs].iter().map(|a| instantiate(a, &b)).collect();
        match eval_call(&call.functor, &inputs) {
            Eval::Test(true) => {}
            Eval::Test(false) | Eval::Fail => return None,
            Eval::Value(v) => match &call.args[n_inputs] {
                Term::Variable(name) => match b.get(&**name) {
                    Some(existing) if *existing != v => return None,
                    Some(_) => {}
                    None => {
                        b.insert(name.to_string(), v);
                    }
                },
                slot => {
                    if *slot != v {
                        return None;
                    }
                }
            },
        }
    }
    Some(b)
}

/// Ordered add/delete fold of the instantiated action list.
pub fn run_actions(source: &State, t: &TransitionSpec, b: &Bindings) -> State {
    let mut facts: BTreeSet<Predicate> = source.iter().cloned().collect();
    for a in &t.action {
        let p = instantiate_predicate(&a.predicate, b);
        match a.kind {
            ActionKind::Add => {
                facts.insert(p);
            }
            ActionKind::Delete => {
                facts.remove(&p);
            }
        }
    }
    facts.into_iter().collect()
}

/// Every (transition, bindings, destination) triple out of `state`.
pub fn brute_force_successors<'a>(state: &State, transitions: impl IntoIterator<Item = &'a TransitionSpec>) -> BTreeSet<OracleStep> {
    let mut out = BTreeSet::new();
    for t in transitions {
        for b in brute_force_matches(&t.precondition, state) {
            if let Some(b) = run_computation(&t.computation, &b) {
                let destination = run_actions(state, t, &b);
                out.insert(OracleStep { transition: t.name.clone(), bindings: b.into_iter().collect(), destination });
            }
        }
    }
    out
}

/// Whether some assignment embeds `goal` into `state`.
pub fn goal_holds(state: &State, goal: &State) -> bool {
    !brute_force_matches(goal.predicates(), state).is_empty()
}

/// Shortest plan length by exhaustive BFS, exploring at most `limit`
/// distinct states.
pub fn bfs_plan_length(initial: &State, goal: &State, transitions: &[&TransitionSpec], limit: usize) -> Option<usize> {
    let mut seen: HashMap<State, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(initial.clone(), 0);
    queue.push_back(initial.clone());
    while let Some(s) = queue.pop_front() {
        let d = seen[&s];
        if goal_holds(&s, goal) {
            return Some(d);
        }
        for step in brute_force_successors(&s, transitions.iter().copied()) {
            if seen.len() >= limit {
                return None;
            }
            if !seen.contains_key(&step.destination) {
                seen.insert(step.destination.clone(), d + 1);
                queue.push_back(step.destination);
            }
        }
    }
    None
}

/// Number of states reachable from `initial`, or `None` beyond `limit`.
pub fn reachable_count(initial: &State, transitions: &[&TransitionSpec], limit: usize) -> Option<usize> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([initial.clone()]);
    seen.insert(initial.clone());
    while let Some(s) = queue.pop_front() {
        for step in brute_force_successors(&s, transitions.iter().copied()) {
            if seen.insert(step.destination.clone()) {
                if seen.len() > limit {
                    return None;
                }
                queue.push_back(step.destination);
            }
        }
    }
    Some(seen.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use kbplan_core::parse_model;

    #[test]
    fn matches_are_not_injective() {
        let m = parse_model("state s { p(a). }\ntransition t { pre { p(X). p(Y). } }").unwrap();
        let found = brute_force_matches(&m.transitions["t"].precondition, &m.states["s"]);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0]["X"], Term::lit("a"));
        assert_eq!(found[0]["Y"], Term::lit("a"));
    }

    #[test]
    fn computation_filters_and_binds() {
        let m = parse_model(
            "state s { cap(b, 0). cap(c, 2). }
transition t { pre { cap(V, C). } compute { greater_than(C, 0). subtract(C, 1, D). } action { delete(cap(V, C)). add(cap(V, D)). } }",
        )
        .unwrap();
        let steps = brute_force_successors(&m.states["s"], m.transitions.values());
        assert_eq!(steps.len(), 1);
        let step = steps.into_iter().next().unwrap();
        assert!(step.destination.contains(&Predicate::new("cap", vec![Term::lit("c"), Term::num(1)])));
    }

    #[test]
    fn bfs_finds_shortest_distance() {
        let m = parse_model(
            "state s { at(a). e(a, b). e(b, c). e(a, c). }
state g { at(c). }
transition go { pre { at(X). e(X, Y). } action { delete(at(X)). add(at(Y)). } }",
        )
        .unwrap();
        let ts: Vec<_> = m.transitions.values().collect();
        assert_eq!(bfs_plan_length(&m.states["s"], &m.states["g"], &ts, 100), Some(1));
        assert_eq!(reachable_count(&m.states["s"], &ts, 100), Some(3));
    }
}
