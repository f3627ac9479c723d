//! Executable transition semantics: computations, actions and successors.

use crate::builtins::{self, BuiltinKind, Outcome};
use crate::term::{ActionKind, FunctionCall, State, Substitution, Term, TransitionSpec};
use crate::unify::{match_precondition, unify_term};

/// Failures that are not ordinary "transition does not apply" outcomes.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{name}` takes {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("argument of `{call}` is not ground after substitution")]
    NonGroundArgument { call: String },
    #[error("action `{action}` is not ground after substitution")]
    NonGroundAction { action: String },
}

/// One element of the labelled transition relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransitionStep {
    pub source: State,
    pub transition: String,
    pub substitution: Substitution,
    pub destination: State,
}

/// Evaluates calls in order, threading bindings through.
///
/// `Ok(None)` means the computation failed (some call had no tuple, or a test
/// returned false). Unknown functions and non-ground inputs are hard errors.
pub fn eval_computation(
    calls: &[FunctionCall],
    sigma: &Substitution,
) -> Result<Option<Substitution>, EngineError> {
    let mut sigma = sigma.clone();
    for call in calls {
        let spec = builtins::lookup(&call.functor)
            .ok_or_else(|| EngineError::UnknownFunction(call.functor.to_string()))?;
        if call.args.len() != spec.arity {
            return Err(EngineError::Arity {
                name: spec.name.to_string(),
                expected: spec.arity,
                got: call.args.len(),
            });
        }
        let input_count = match spec.kind {
            BuiltinKind::Test => spec.arity,
            BuiltinKind::Value => spec.arity - 1,
        };
        let inputs: Vec<Term> = call.args[..input_count].iter().map(|a| sigma.apply(a)).collect();
        if !inputs.iter().all(Term::is_ground) {
            return Err(EngineError::NonGroundArgument { call: call.to_string() });
        }
        match spec.builtin.eval(&inputs) {
            Outcome::Holds(true) => {}
            Outcome::Holds(false) | Outcome::Undefined => return Ok(None),
            Outcome::Value(value) => {
                let slot = &call.args[input_count];
                match unify_term(slot, &value, &sigma) {
                    Some(next) => sigma = next,
                    None => return Ok(None),
                }
            }
        }
    }
    Ok(Some(sigma))
}

/// Copies `source` and folds the action list over it in order: `add` inserts
/// the instantiated predicate, `delete` removes it (absent is a no-op).
pub fn apply_transition(
    source: &State,
    transition: &TransitionSpec,
    sigma: &Substitution,
) -> Result<State, EngineError> {
    let mut dest = source.clone();
    for action in &transition.action {
        let p = sigma.apply_predicate(&action.predicate);
        if !p.is_ground() {
            return Err(EngineError::NonGroundAction { action: action.to_string() });
        }
        match action.kind {
            ActionKind::Add => {
                dest.insert(p);
            }
            ActionKind::Delete => {
                dest.remove(&p);
            }
        }
    }
    Ok(dest)
}

/// Steps of one transition from `state`, one per precondition match whose
/// computation succeeds.
pub fn transition_steps(
    state: &State,
    transition: &TransitionSpec,
) -> Result<Vec<TransitionStep>, EngineError> {
    let mut out = Vec::new();
    for sigma in match_precondition(&transition.precondition, state) {
        if let Some(sigma) = eval_computation(&transition.computation, &sigma)? {
            let destination = apply_transition(state, transition, &sigma)?;
            out.push(TransitionStep {
                source: state.clone(),
                transition: transition.name.clone(),
                substitution: sigma,
                destination,
            });
        }
    }
    Ok(out)
}

/// All steps out of `state`, transitions in the order given, matches in
/// canonical order within each transition.
pub fn successors<'a, I>(state: &State, transitions: I) -> Result<Vec<TransitionStep>, EngineError>
where
    I: IntoIterator<Item = &'a TransitionSpec>,
{
    let mut out = Vec::new();
    for t in transitions {
        out.extend(transition_steps(state, t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_model, parse_predicate};
    use crate::term::{sym, ActionPredicate, Predicate};

    fn p(text: &str) -> Predicate {
        parse_predicate(text).unwrap()
    }

    fn call(text: &str) -> FunctionCall {
        match p(text).to_term() {
            Term::Compound(functor, args) => FunctionCall { functor, args },
            _ => unreachable!(),
        }
    }

    #[test]
    fn computation_examples() {
        let empty = Substitution::new();
        assert_eq!(eval_computation(&[call("less_than(2, 20)")], &empty), Ok(Some(Substitution::new())));
        let got = eval_computation(&[call("subtract(23, 1, C2)")], &empty).unwrap().unwrap();
        assert_eq!(got.to_string(), "{C2=22}");
        assert_eq!(eval_computation(&[call("greater_than(0, 5)")], &empty), Ok(None));
        assert_eq!(eval_computation(&[call("divide(1, 0, X)")], &empty), Ok(None));
    }

    #[test]
    fn results_feed_later_calls() {
        let calls = [call("add(1, 2, X)"), call("multiply(X, X, Y)"), call("equal(Y, 9)")];
        let got = eval_computation(&calls, &Substitution::new()).unwrap().unwrap();
        assert_eq!(got.to_string(), "{X=3, Y=9}");
    }

    #[test]
    fn bound_result_slot_is_checked() {
        assert_eq!(eval_computation(&[call("add(1, 2, 4)")], &Substitution::new()), Ok(None));
        assert!(eval_computation(&[call("add(1, 2, 3)")], &Substitution::new()).unwrap().is_some());
    }

    #[test]
    fn hard_errors() {
        let empty = Substitution::new();
        assert_eq!(
            eval_computation(&[call("frob(1)")], &empty),
            Err(EngineError::UnknownFunction("frob".into()))
        );
        assert!(matches!(
            eval_computation(&[call("less_than(X, 1)")], &empty),
            Err(EngineError::NonGroundArgument { .. })
        ));
        assert!(matches!(eval_computation(&[call("abs(1, 2, 3)")], &empty), Err(EngineError::Arity { .. })));
    }

    #[test]
    fn add_and_delete_are_set_operations() {
        let s: State = [p("a(1)")].into_iter().collect();
        let mut t = TransitionSpec::new("t");
        t.action.push(ActionPredicate::add(p("a(1)")));
        assert_eq!(apply_transition(&s, &t, &Substitution::new()).unwrap(), s);
        t.action = vec![ActionPredicate::delete(p("b(1)"))];
        assert_eq!(apply_transition(&s, &t, &Substitution::new()).unwrap(), s);
    }

    #[test]
    fn action_order_matters() {
        let s = State::new();
        let mut t = TransitionSpec::new("t");
        t.action = vec![ActionPredicate::delete(p("x")), ActionPredicate::add(p("x"))];
        assert!(apply_transition(&s, &t, &Substitution::new()).unwrap().contains(&p("x")));
        t.action = vec![ActionPredicate::add(p("x")), ActionPredicate::delete(p("x"))];
        assert!(!apply_transition(&s, &t, &Substitution::new()).unwrap().contains(&p("x")));
    }

    #[test]
    fn non_ground_action_is_error() {
        let mut t = TransitionSpec::new("t");
        t.action.push(ActionPredicate::add(p("a(X)")));
        let sigma: Substitution = [(sym("Y"), Term::num(1))].into_iter().collect();
        assert!(matches!(
            apply_transition(&State::new(), &t, &sigma),
            Err(EngineError::NonGroundAction { .. })
        ));
    }

    const BOARD: &str = "
state s {
  is_bus(b25). is_bus_stop(bs1). is_passenger(p1). is_passenger(p2).
  at(b25, bs1). at(p1, bs1). at(p2, bs1).
  capacity(b25, 2). waiting(p1, min(2)). waiting(p2, min(3)).
}
transition board {
  pre { is_bus(B). is_bus_stop(S). is_passenger(P). at(B, S). at(P, S). capacity(B, C). waiting(P, min(T)). }
  compute { less_than(T, 20). greater_than(C, 0). subtract(C, 1, C2). }
  action { delete(waiting(P, min(T))). delete(at(P, S)). add(at(P, B)). delete(capacity(B, C)). add(capacity(B, C2)). }
}";

    #[test]
    fn one_step_per_passenger() {
        let m = parse_model(BOARD).unwrap();
        let steps = successors(&m.states["s"], m.transitions.values()).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].substitution.get("P"), Some(&Term::lit("p1")));
        assert_eq!(steps[1].substitution.get("P"), Some(&Term::lit("p2")));
        assert!(steps[0].destination.contains(&p("capacity(b25, 1)")));
    }

    #[test]
    fn zero_capacity_filters_everything() {
        let m = parse_model(&BOARD.replace("capacity(b25, 2)", "capacity(b25, 0)")).unwrap();
        assert!(successors(&m.states["s"], m.transitions.values()).unwrap().is_empty());
    }

    #[test]
    fn nothing_matches() {
        let m = parse_model(BOARD).unwrap();
        assert!(successors(&State::new(), m.transitions.values()).unwrap().is_empty());
    }
}
