//! Seeded random generators for models and scenario edits.

use kbplan_core::builtins::{BuiltinKind, LIBRARY};
use kbplan_core::{ActionPredicate, FunctionCall, Model, Number, Predicate, State, Term, TransitionSpec};
use rand::seq::SliceRandom;
use rand::Rng;

const LITERALS: &[&str] = &["a", "b", "c"];
const VARIABLES: &[&str] = &["X", "Y", "Z"];
/// (functor, arity); the second argument of `cap` is numeric.
const FUNCTORS: &[(&str, usize)] = &[("p", 1), ("q", 2), ("cap", 2), ("flag", 0)];

/// Size limits of [`small_model`].
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub state_predicates: usize,
    pub precondition_predicates: usize,
    pub transitions: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { state_predicates: 6, precondition_predicates: 4, transitions: 3 }
    }
}

fn ground_arg<R: Rng>(rng: &mut R, functor: &str, position: usize) -> Term {
    if functor == "cap" && position == 1 {
        return Term::num(rng.gen_range(0..4));
    }
    match rng.gen_range(0..6) {
        0 => Term::num(rng.gen_range(0..4)),
        1 => Term::compound("w", vec![Term::lit(LITERALS.choose(rng).unwrap())]),
        _ => Term::lit(LITERALS.choose(rng).unwrap()),
    }
}

fn ground_predicate<R: Rng>(rng: &mut R) -> Predicate {
    let (f, n) = *FUNCTORS.choose(rng).unwrap();
    Predicate::new(f, (0..n).map(|i| ground_arg(rng, f, i)).collect())
}

pub fn small_state<R: Rng>(rng: &mut R, max: usize) -> State {
    let mut s = State::new();
    for _ in 0..rng.gen_range(1..=max.max(1)) {
        s.insert(ground_predicate(rng));
    }
    s
}

/// Replaces some arguments of a ground predicate by variables.
fn generalize<R: Rng>(rng: &mut R, p: &Predicate) -> Predicate {
    let args = p
        .args
        .iter()
        .map(|a| match (rng.gen_range(0..3), a) {
            (0, _) => a.clone(),
            (1, Term::Compound(f, _)) => Term::compound(f, vec![Term::var(VARIABLES.choose(rng).unwrap())]),
            _ => Term::var(VARIABLES.choose(rng).unwrap()),
        })
        .collect();
    Predicate { functor: p.functor.clone(), args }
}

fn bound_or_constant<R: Rng>(rng: &mut R, bound: &[String]) -> Term {
    if !bound.is_empty() && rng.gen_bool(0.7) {
        Term::var(bound.choose(rng).unwrap())
    } else if rng.gen_bool(0.7) {
        Term::num(rng.gen_range(0..4))
    } else {
        Term::lit(LITERALS.choose(rng).unwrap())
    }
}

/// A well-formed transition over the generator's vocabulary. Preconditions
/// are biased towards generalized copies of `state` so matches are common.
pub fn small_transition<R: Rng>(rng: &mut R, name: &str, state: &State, max_pre: usize) -> TransitionSpec {
    let mut t = TransitionSpec::new(name);
    let facts: Vec<&Predicate> = state.iter().collect();
    for _ in 0..rng.gen_range(0..=max_pre) {
        let picked = facts.choose(rng).copied();
        let p = match picked {
            Some(f) if rng.gen_bool(0.85) => generalize(rng, f),
            _ => {
                let g = ground_predicate(rng);
                generalize(rng, &g)
            }
        };
        t.precondition.insert(p);
    }
    let mut bound: Vec<String> = t.precondition_variables().iter().map(|v| v.to_string()).collect();
    for i in 0..rng.gen_range(0..=2) {
        let spec = LIBRARY.choose(rng).unwrap();
        let inputs = match spec.kind {
            BuiltinKind::Test => spec.arity,
            BuiltinKind::Value => spec.arity - 1,
        };
        let mut args: Vec<Term> = (0..inputs).map(|_| bound_or_constant(rng, &bound)).collect();
        if spec.kind == BuiltinKind::Value {
            if rng.gen_bool(0.8) {
                let result = format!("R{i}");
                args.push(Term::var(&result));
                bound.push(result);
            } else {
                args.push(Term::num(rng.gen_range(0..4)));
            }
        }
        t.computation.push(FunctionCall::new(spec.name, args));
    }
    for _ in 0..rng.gen_range(0..=3) {
        let (f, n) = *FUNCTORS.choose(rng).unwrap();
        let p = Predicate::new(f, (0..n).map(|_| bound_or_constant(rng, &bound)).collect());
        t.action.push(if rng.gen_bool(0.5) { ActionPredicate::add(p) } else { ActionPredicate::delete(p) });
    }
    t
}

/// A model with one initial state `s0` and up to `limits.transitions`
/// transitions.
pub fn small_model<R: Rng>(rng: &mut R, limits: Limits) -> Model {
    let s0 = small_state(rng, limits.state_predicates);
    let mut m = Model::new();
    for i in 0..rng.gen_range(1..=limits.transitions) {
        let t = small_transition(rng, &format!("t{i}"), &s0, limits.precondition_predicates);
        m.transitions.insert(t.name.clone(), t);
    }
    m.states.insert("s0".into(), s0);
    m.initial = Some("s0".into());
    m
}

fn fuzz_number<R: Rng>(rng: &mut R) -> Number {
    match rng.gen_range(0..4) {
        0 => Number::from_ratio(rng.gen_range(-999..1000), *[2, 4, 5, 8, 10, 3, 7].choose(rng).unwrap()).unwrap(),
        1 => Number::from_int(rng.gen_range(i64::MIN / 2..i64::MAX / 2)),
        _ => Number::from_int(rng.gen_range(-50..50)),
    }
}

fn fuzz_name<R: Rng>(rng: &mut R, upper: bool) -> String {
    let first = if upper { rng.gen_range(b'A'..=b'Z') } else { rng.gen_range(b'a'..=b'z') };
    let mut s = String::from(first as char);
    let tail = b"abcxyz019_";
    for _ in 0..rng.gen_range(0..6) {
        s.push(*tail.choose(rng).unwrap() as char);
    }
    s
}

fn fuzz_term<R: Rng>(rng: &mut R, depth: u32, variables: bool) -> Term {
    match rng.gen_range(0..if depth == 0 { 3 } else { 4 }) {
        0 => Term::Number(fuzz_number(rng)),
        1 if variables => Term::var(&fuzz_name(rng, true)),
        3 => {
            let args = (0..rng.gen_range(1..4)).map(|_| fuzz_term(rng, depth - 1, variables)).collect();
            Term::compound(&fuzz_name(rng, false), args)
        }
        _ => Term::lit(&fuzz_name(rng, false)),
    }
}

fn fuzz_predicate<R: Rng>(rng: &mut R, variables: bool) -> Predicate {
    let args = (0..rng.gen_range(0..4)).map(|_| fuzz_term(rng, 2, variables)).collect();
    Predicate::new(&fuzz_name(rng, false), args)
}

fn block_name<R: Rng>(rng: &mut R) -> String {
    let upper = rng.gen_bool(0.3);
    let mut s = fuzz_name(rng, upper);
    if rng.gen_bool(0.3) {
        s.push('-');
        s.push_str(&fuzz_name(rng, false));
    }
    s
}

/// A valid model exercising the whole surface syntax: decimals, ratios,
/// nested compounds, a possibly non-ground goal, every builtin.
pub fn fuzz_model<R: Rng>(rng: &mut R) -> Model {
    let mut m = Model::new();
    for _ in 0..rng.gen_range(0..4) {
        let mut s = State::new();
        for _ in 0..rng.gen_range(0..6) {
            s.insert(fuzz_predicate(rng, false));
        }
        m.states.insert(block_name(rng), s);
    }
    let names: Vec<String> = m.states.keys().cloned().collect();
    if rng.gen_bool(0.5) {
        m.name = Some(block_name(rng));
    }
    if !names.is_empty() && rng.gen_bool(0.7) {
        m.initial = names.choose(rng).cloned();
    }
    if rng.gen_bool(0.5) {
        let goal = block_name(rng);
        let mut s = State::new();
        for _ in 0..rng.gen_range(0..3) {
            s.insert(fuzz_predicate(rng, true));
        }
        if m.initial.as_deref() != Some(goal.as_str()) {
            m.states.insert(goal.clone(), s);
            m.goal = Some(goal);
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        let mut t = TransitionSpec::new(&block_name(rng));
        for _ in 0..rng.gen_range(0..4) {
            t.precondition.insert(fuzz_predicate(rng, true));
        }
        let mut bound: Vec<String> = t.precondition_variables().iter().map(|v| v.to_string()).collect();
        for i in 0..rng.gen_range(0..3) {
            let spec = LIBRARY.choose(rng).unwrap();
            let inputs = if spec.kind == BuiltinKind::Test { spec.arity } else { spec.arity - 1 };
            let mut args: Vec<Term> = (0..inputs)
                .map(|_| match bound.choose(rng).cloned() {
                    Some(v) if rng.gen_bool(0.5) => Term::var(&v),
                    _ => Term::Number(fuzz_number(rng)),
                })
                .collect();
            if spec.kind == BuiltinKind::Value {
                let result = format!("Out{i}");
                args.push(Term::var(&result));
                bound.push(result);
            }
            t.computation.push(FunctionCall::new(spec.name, args));
        }
        for _ in 0..rng.gen_range(0..4) {
            let mut p = fuzz_predicate(rng, false);
            if let (Some(v), Some(slot)) = (bound.choose(rng), p.args.first_mut()) {
                *slot = Term::var(v);
            }
            t.action.push(if rng.gen_bool(0.5) { ActionPredicate::add(p) } else { ActionPredicate::delete(p) });
        }
        m.transitions.insert(t.name.clone(), t);
    }
    m
}

/// One scenario edit used by the index monotonicity properties.
#[derive(Debug, Clone)]
pub enum Addition {
    /// Copy of a library entry under a fresh name; only adds reused entities.
    Reused(Entry),
    /// Entry over fresh functors; only adds custom entities.
    Custom(Entry),
}

#[derive(Debug, Clone)]
pub enum Entry {
    State(String, State),
    Transition(TransitionSpec),
}

impl Addition {
    pub fn apply(&self, m: &mut Model) {
        let (Addition::Reused(e) | Addition::Custom(e)) = self;
        match e {
            Entry::State(name, s) => {
                m.states.insert(name.clone(), s.clone());
            }
            Entry::Transition(t) => {
                m.transitions.insert(t.name.clone(), t.clone());
            }
        }
    }
}

/// A random edit; `serial` makes names and custom functors fresh.
pub fn random_addition<R: Rng>(
    rng: &mut R,
    library_states: &[State],
    library_transitions: &[TransitionSpec],
    serial: usize,
) -> Addition {
    let reused = rng.gen_bool(0.5);
    let as_state = rng.gen_bool(0.5);
    let name = format!("added-{serial}");
    if reused {
        if as_state && !library_states.is_empty() {
            return Addition::Reused(Entry::State(name, library_states.choose(rng).unwrap().clone()));
        }
        if let Some(t) = library_transitions.choose(rng) {
            let mut t = t.clone();
            t.name = name;
            return Addition::Reused(Entry::Transition(t));
        }
    }
    let functor = format!("custom_{serial}");
    let fact = Predicate::new(&functor, vec![Term::lit(LITERALS.choose(rng).unwrap())]);
    if as_state {
        return Addition::Custom(Entry::State(name, [fact].into_iter().collect()));
    }
    let mut t = TransitionSpec::new(&name);
    t.precondition.insert(Predicate::new(&functor, vec![Term::var("X")]));
    t.action.push(ActionPredicate::delete(Predicate::new(&functor, vec![Term::var("X")])));
    Addition::Custom(Entry::Transition(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kbplan_core::model::validate_transition;
    use rand::SeedableRng;

    #[test]
    fn generated_models_are_valid_and_within_limits() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let m = small_model(&mut rng, Limits::default());
            m.validate().unwrap();
            assert!(m.states["s0"].len() <= 6);
            for t in m.transitions.values() {
                assert!(t.precondition.len() <= 4);
                assert!(t.precondition_variables().len() <= 3);
                validate_transition(t).unwrap();
            }
            fuzz_model(&mut rng).validate().unwrap();
        }
    }
}
