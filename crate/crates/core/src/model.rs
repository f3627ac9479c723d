//! The model container: named states, named transitions, initial and goal.

use std::collections::{BTreeMap, BTreeSet};

use crate::builtins::{self, BuiltinKind};
use crate::term::{Predicate, State, Symbol, Term, TransitionSpec};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    /// Optional `model <name>.` declaration; used as the PDDL domain name.
    pub name: Option<String>,
    pub states: BTreeMap<String, State>,
    pub transitions: BTreeMap<String, TransitionSpec>,
    pub initial: Option<String>,
    pub goal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("undeclared {role} state `{name}`")]
    UnknownState { role: &'static str, name: String },
    #[error("state `{state}` is not ground: {predicate}")]
    NonGroundState { state: String, predicate: String },
    #[error("model has no {0} state declared")]
    Missing(&'static str),
    #[error("transition `{transition}`: {message}")]
    Transition { transition: String, message: String },
}

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("model")
    }

    pub fn initial_state(&self) -> Result<&State, ModelError> {
        let name = self.initial.as_ref().ok_or(ModelError::Missing("initial"))?;
        self.states
            .get(name)
            .ok_or_else(|| ModelError::UnknownState { role: "initial", name: name.clone() })
    }

    pub fn goal_state(&self) -> Result<&State, ModelError> {
        let name = self.goal.as_ref().ok_or(ModelError::Missing("goal"))?;
        self.states
            .get(name)
            .ok_or_else(|| ModelError::UnknownState { role: "goal", name: name.clone() })
    }

    pub fn transition_list(&self) -> Vec<&TransitionSpec> {
        self.transitions.values().collect()
    }

    /// Checks the model-level invariants: referenced states exist and every
    /// state other than the goal is ground; each transition is well formed.
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(name) = &self.initial {
            if !self.states.contains_key(name) {
                return Err(ModelError::UnknownState { role: "initial", name: name.clone() });
            }
        }
        if let Some(name) = &self.goal {
            if !self.states.contains_key(name) {
                return Err(ModelError::UnknownState { role: "goal", name: name.clone() });
            }
        }
        for (name, state) in &self.states {
            if Some(name) == self.goal.as_ref() {
                continue;
            }
            if let Some(p) = state.iter().find(|p| !p.is_ground()) {
                return Err(ModelError::NonGroundState {
                    state: name.clone(),
                    predicate: p.to_string(),
                });
            }
        }
        for t in self.transitions.values() {
            validate_transition(t).map_err(|message| ModelError::Transition {
                transition: t.name.clone(),
                message,
            })?;
        }
        Ok(())
    }
}

/// Static checks on one transition:
/// - every call names a known built-in with the right arity;
/// - call inputs are bound by the precondition or an earlier result;
/// - a value call's result variable is fresh (no shadowing);
/// - every action variable is bound by the precondition or a result.
pub fn validate_transition(t: &TransitionSpec) -> Result<(), String> {
    let mut bound: BTreeSet<Symbol> = t.precondition_variables();
    for call in &t.computation {
        let spec = builtins::lookup(&call.functor)
            .ok_or_else(|| format!("unknown function `{}`", call.functor))?;
        if call.args.len() != spec.arity {
            return Err(format!(
                "`{}` takes {} arguments, got {}",
                call.functor,
                spec.arity,
                call.args.len()
            ));
        }
        let (inputs, result) = match spec.kind {
            BuiltinKind::Test => (&call.args[..], None),
            BuiltinKind::Value => (&call.args[..call.args.len() - 1], call.args.last()),
        };
        for arg in inputs {
            let mut vars = Vec::new();
            arg.collect_variables(&mut vars);
            if let Some(v) = vars.into_iter().find(|v| !bound.contains(*v)) {
                return Err(format!("unbound variable `{v}` in call `{call}`"));
            }
        }
        match result {
            Some(Term::Variable(v)) => {
                if bound.contains(v) {
                    return Err(format!("result variable `{v}` of `{call}` shadows a bound variable"));
                }
                bound.insert(v.clone());
            }
            Some(other) if !other.is_ground() => {
                return Err(format!("result of `{call}` must be a variable or ground term"));
            }
            _ => {}
        }
    }
    for a in &t.action {
        if let Some(v) = a.predicate.variables().into_iter().find(|v| !bound.contains(*v)) {
            return Err(format!("unbound variable `{v}` in action `{a}`"));
        }
    }
    Ok(())
}

/// Functors used both as a predicate and as a compound-term wrapper, e.g.
/// `min` in `waiting(p1, min(2))` alongside a `min(...)` predicate. Allowed,
/// but reported so the overlap is visible.
pub fn lint_functor_overlap(model: &Model) -> Vec<String> {
    let mut predicate_functors = BTreeSet::new();
    let mut compound_functors = BTreeSet::new();
    let mut visit = |p: &Predicate| {
        predicate_functors.insert(p.functor.clone());
        for arg in &p.args {
            collect_compound_functors(arg, &mut compound_functors);
        }
    };
    for state in model.states.values() {
        state.iter().for_each(&mut visit);
    }
    for t in model.transitions.values() {
        t.precondition.iter().for_each(&mut visit);
        t.action.iter().for_each(|a| visit(&a.predicate));
    }
    predicate_functors
        .intersection(&compound_functors)
        .map(|f| format!("functor `{f}` is used both as a predicate and as a compound term"))
        .collect()
}

fn collect_compound_functors(term: &Term, out: &mut BTreeSet<Symbol>) {
    if let Term::Compound(functor, args) = term {
        out.insert(functor.clone());
        args.iter().for_each(|a| collect_compound_functors(a, out));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{ActionPredicate, FunctionCall};

    fn at(a: Term, b: Term) -> Predicate {
        Predicate::new("at", vec![a, b])
    }

    #[test]
    fn unbound_action_variable_rejected() {
        let mut t = TransitionSpec::new("t");
        t.precondition.insert(at(Term::var("X"), Term::lit("a")));
        t.action.push(ActionPredicate::add(at(Term::var("Y"), Term::lit("b"))));
        let err = validate_transition(&t).unwrap_err();
        assert!(err.contains("`Y`"), "{err}");
    }

    #[test]
    fn result_variable_binds_for_action() {
        let mut t = TransitionSpec::new("t");
        t.precondition.insert(Predicate::new("c", vec![Term::var("C")]));
        t.computation.push(FunctionCall::new("subtract", vec![Term::var("C"), Term::num(1), Term::var("C2")]));
        t.action.push(ActionPredicate::add(Predicate::new("c", vec![Term::var("C2")])));
        assert_eq!(validate_transition(&t), Ok(()));
    }

    #[test]
    fn shadowing_rejected() {
        let mut t = TransitionSpec::new("t");
        t.precondition.insert(Predicate::new("c", vec![Term::var("C")]));
        t.computation.push(FunctionCall::new("add", vec![Term::var("C"), Term::num(1), Term::var("C")]));
        assert!(validate_transition(&t).unwrap_err().contains("shadows"));
    }

    #[test]
    fn unknown_function_and_arity() {
        let mut t = TransitionSpec::new("t");
        t.computation.push(FunctionCall::new("frobnicate", vec![Term::num(1)]));
        assert!(validate_transition(&t).unwrap_err().contains("unknown function"));
        t.computation[0] = FunctionCall::new("less_than", vec![Term::num(1)]);
        assert!(validate_transition(&t).unwrap_err().contains("takes 2"));
    }

    #[test]
    fn goal_may_hold_variables_but_other_states_may_not() {
        let mut m = Model::new();
        let open: State = vec![at(Term::var("P"), Term::lit("bs2"))].into_iter().collect();
        m.states.insert("g".into(), open.clone());
        m.goal = Some("g".into());
        assert_eq!(m.validate(), Ok(()));
        m.states.insert("s".into(), open);
        assert!(matches!(m.validate(), Err(ModelError::NonGroundState { .. })));
    }

    #[test]
    fn overlap_lint() {
        let mut m = Model::new();
        let s: State = vec![
            Predicate::new("waiting", vec![Term::lit("p1"), Term::compound("min", vec![Term::num(2)])]),
            Predicate::new("min", vec![Term::num(1)]),
        ]
        .into_iter()
        .collect();
        m.states.insert("s".into(), s);
        assert_eq!(lint_functor_overlap(&m).len(), 1);
    }
}
