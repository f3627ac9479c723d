//! Breadth-first forward search from the initial state to the goal, plan
//! validation, and the diagnosis attached to failed searches.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::engine::{apply_transition, eval_computation, successors, EngineError, TransitionStep};
use crate::model::{Model, ModelError};
use crate::par::{map_ordered, Execution};
use crate::syntax::parse_term;
use crate::term::{Predicate, State, Substitution, TransitionSpec};
use crate::trace::{hash_hex, state_hash};
use crate::unify::match_precondition;

pub const DEFAULT_BOUND: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Maximum number of states whose successors are generated.
    pub bound: usize,
    pub execution: Execution,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { bound: DEFAULT_BOUND, execution: Execution::default() }
    }
}

impl SearchConfig {
    pub fn with_bound(bound: usize) -> Self {
        SearchConfig { bound, ..SearchConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<TransitionStep>,
}

impl Plan {
    pub fn cost(&self) -> usize {
        self.steps.len()
    }

    pub fn final_state<'a>(&'a self, initial: &'a State) -> &'a State {
        self.steps.last().map_or(initial, |s| &s.destination)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// Every reachable state was expanded: no plan exists.
    FrontierExhausted,
    /// The expansion bound was reached first: inconclusive.
    BoundHit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanFailure {
    pub explored: usize,
    pub kind: FailureKind,
    /// Goal predicates never reached together; non-empty whenever the goal
    /// has predicates.
    pub unsatisfied: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutcome {
    Found(Plan),
    Failed(PlanFailure),
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            PlanOutcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("search bound must be at least 1")]
    ZeroBound,
}

/// Existential subset semantics: some substitution maps every goal predicate
/// into the state.
pub fn satisfies_goal(state: &State, goal: &State) -> bool {
    goal_witness(state, goal).is_some()
}

pub fn goal_witness(state: &State, goal: &State) -> Option<Substitution> {
    match_precondition(goal.predicates(), state).into_iter().next()
}

pub fn find_plan(model: &Model, config: &SearchConfig) -> Result<PlanOutcome, PlanError> {
    model.validate()?;
    let initial = model.initial_state()?;
    let goal = model.goal_state()?;
    search(initial, goal, &model.transition_list(), config)
}

struct Node {
    state: State,
    parent: Option<(usize, String, Substitution)>,
}

/// Breadth-first search with duplicate elimination keyed by state hash
/// (states are compared in full on hash collision).
///
/// Layers are expanded with [`map_ordered`] and merged in frontier order, so
/// sequential and parallel execution return identical results.
pub fn search(
    initial: &State,
    goal: &State,
    transitions: &[&TransitionSpec],
    config: &SearchConfig,
) -> Result<PlanOutcome, PlanError> {
    if config.bound == 0 {
        return Err(PlanError::ZeroBound);
    }
    if satisfies_goal(initial, goal) {
        return Ok(PlanOutcome::Found(Plan { steps: Vec::new() }));
    }
    let hash = state_hash(initial);
    let mut nodes = vec![Node { state: initial.clone(), parent: None }];
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::from([(hash, vec![0])]);
    let mut frontier = vec![0usize];
    let mut expanded = 0usize;

    while !frontier.is_empty() {
        let budget = config.bound - expanded;
        if budget == 0 {
            return Ok(failure(&nodes, goal, expanded, FailureKind::BoundHit));
        }
        let truncated = frontier.len() > budget;
        frontier.truncate(budget);
        let layer: Vec<&State> = frontier.iter().map(|&i| &nodes[i].state).collect();
        // Successor generation, hashing and goal tests run per frontier
        // state; only the merge into the closed set is sequential.
        let expansions = map_ordered(&layer, config.execution, |s| {
            successors(s, transitions.iter().copied()).map(|steps| {
                steps
                    .into_iter()
                    .map(|step| {
                        let hash = state_hash(&step.destination);
                        let reached = satisfies_goal(&step.destination, goal);
                        (step, hash, reached)
                    })
                    .collect::<Vec<_>>()
            })
        });
        expanded += frontier.len();

        let mut next = Vec::new();
        for (&parent, steps) in frontier.iter().zip(expansions) {
            for (step, hash, reached) in steps? {
                let bucket = seen.entry(hash).or_default();
                if bucket.iter().any(|&i| nodes[i].state == step.destination) {
                    continue;
                }
                let idx = nodes.len();
                bucket.push(idx);
                nodes.push(Node {
                    state: step.destination,
                    parent: Some((parent, step.transition, step.substitution)),
                });
                if reached {
                    return Ok(PlanOutcome::Found(extract_plan(&nodes, idx)));
                }
                next.push(idx);
            }
        }
        if truncated {
            return Ok(failure(&nodes, goal, expanded, FailureKind::BoundHit));
        }
        frontier = next;
    }
    Ok(failure(&nodes, goal, expanded, FailureKind::FrontierExhausted))
}

fn extract_plan(nodes: &[Node], mut idx: usize) -> Plan {
    let mut steps = Vec::new();
    while let Some((parent, transition, substitution)) = &nodes[idx].parent {
        steps.push(TransitionStep {
            source: nodes[*parent].state.clone(),
            transition: transition.clone(),
            substitution: substitution.clone(),
            destination: nodes[idx].state.clone(),
        });
        idx = *parent;
    }
    steps.reverse();
    Plan { steps }
}

fn failure(nodes: &[Node], goal: &State, explored: usize, kind: FailureKind) -> PlanOutcome {
    PlanOutcome::Failed(PlanFailure {
        explored,
        kind,
        unsatisfied: unsatisfied_goals(nodes.iter().map(|n| &n.state), goal),
    })
}

/// Picks the visited state that individually satisfies the most goal
/// predicates (first in visit order on ties) and reports the goal predicates
/// it misses. If that state satisfies each goal predicate on its own but not
/// all of them under one substitution, the whole goal is reported.
pub fn unsatisfied_goals<'a>(visited: impl IntoIterator<Item = &'a State>, goal: &State) -> Vec<Predicate> {
    let mut best: Option<Vec<bool>> = None;
    for state in visited {
        let sat: Vec<bool> = goal
            .iter()
            .map(|g| !match_precondition(std::iter::once(g), state).is_empty())
            .collect();
        let count = sat.iter().filter(|b| **b).count();
        if best.as_ref().is_none_or(|b| count > b.iter().filter(|x| **x).count()) {
            best = Some(sat);
        }
    }
    let sat = best.unwrap_or_else(|| vec![false; goal.len()]);
    let missing: Vec<Predicate> =
        goal.iter().zip(&sat).filter(|(_, ok)| !**ok).map(|(g, _)| g.clone()).collect();
    if missing.is_empty() {
        goal.iter().cloned().collect()
    } else {
        missing
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationCause {
    /// Step source differs from the initial state or previous destination.
    Chain,
    UnknownTransition(String),
    Precondition,
    Computation,
    DestinationMismatch,
    /// The final state does not satisfy the goal (step index = plan length).
    Goal,
    Engine(EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step {step}: {cause:?}")]
pub struct ValidationError {
    pub step: usize,
    pub cause: ValidationCause,
}

/// Replays every step independently of the search: checks chaining, that
/// the recorded bindings satisfy the precondition, that the computation
/// reproduces the recorded result bindings, that the action yields the
/// recorded destination, and finally that the goal holds.
pub fn validate_plan(model: &Model, plan: &Plan) -> Result<(), ValidationError> {
    let at_start = |cause| ValidationError { step: 0, cause };
    let initial = model.initial_state().map_err(|_| at_start(ValidationCause::Chain))?;
    let goal = model.goal_state().map_err(|_| at_start(ValidationCause::Goal))?;
    validate_steps(initial, goal, &model.transitions, &plan.steps)
}

pub fn validate_steps(
    initial: &State,
    goal: &State,
    transitions: &BTreeMap<String, TransitionSpec>,
    steps: &[TransitionStep],
) -> Result<(), ValidationError> {
    let mut current = initial;
    for (i, step) in steps.iter().enumerate() {
        let fail = |cause| ValidationError { step: i, cause };
        if &step.source != current {
            return Err(fail(ValidationCause::Chain));
        }
        let reproduced = replay_step(current, transitions, &step.transition, &step.substitution)
            .map_err(fail)?;
        if reproduced.substitution != step.substitution {
            return Err(fail(ValidationCause::Computation));
        }
        if reproduced.destination != step.destination {
            return Err(fail(ValidationCause::DestinationMismatch));
        }
        current = &step.destination;
    }
    if !satisfies_goal(current, goal) {
        return Err(ValidationError { step: steps.len(), cause: ValidationCause::Goal });
    }
    Ok(())
}

/// Re-derives one step from its source, transition name and the recorded
/// bindings of the precondition variables.
pub fn replay_step(
    source: &State,
    transitions: &BTreeMap<String, TransitionSpec>,
    transition: &str,
    bindings: &Substitution,
) -> Result<TransitionStep, ValidationCause> {
    let t = transitions
        .get(transition)
        .ok_or_else(|| ValidationCause::UnknownTransition(transition.to_string()))?;
    let pre_vars = t.precondition_variables();
    let sigma = bindings.restrict(&pre_vars);
    if sigma.len() != pre_vars.len() {
        return Err(ValidationCause::Precondition);
    }
    for p in &t.precondition {
        if !source.contains(&sigma.apply_predicate(p)) {
            return Err(ValidationCause::Precondition);
        }
    }
    let sigma = eval_computation(&t.computation, &sigma)
        .map_err(ValidationCause::Engine)?
        .ok_or(ValidationCause::Computation)?;
    let destination = apply_transition(source, t, &sigma).map_err(ValidationCause::Engine)?;
    Ok(TransitionStep {
        source: source.clone(),
        transition: transition.to_string(),
        substitution: sigma,
        destination,
    })
}

/// Wire form of one plan step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDocument {
    pub transition: String,
    pub bindings: BTreeMap<String, String>,
    pub state: String,
}

/// Wire form of a plan or a failed search. Field order is fixed, so the
/// serialized text is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PlanDocument {
    Plan { cost: usize, initial: String, steps: Vec<StepDocument> },
    Failure { reason: FailureKind, explored: usize, unsatisfied: Vec<String> },
}

impl PlanDocument {
    pub fn from_outcome(initial: &State, outcome: &PlanOutcome) -> Self {
        match outcome {
            PlanOutcome::Found(plan) => PlanDocument::Plan {
                cost: plan.cost(),
                initial: hash_hex(state_hash(initial)),
                steps: plan
                    .steps
                    .iter()
                    .map(|s| StepDocument {
                        transition: s.transition.clone(),
                        bindings: s.substitution.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
                        state: hash_hex(state_hash(&s.destination)),
                    })
                    .collect(),
            },
            PlanOutcome::Failed(f) => PlanDocument::Failure {
                reason: f.kind,
                explored: f.explored,
                unsatisfied: f.unsatisfied.iter().map(|p| p.to_string()).collect(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocumentError {
    #[error("document describes a failed search, not a plan")]
    NotAPlan,
    #[error("step {step}: bad binding `{text}`")]
    Binding { step: usize, text: String },
    #[error("step {step}: recorded state hash {recorded} does not match replayed {replayed}")]
    HashMismatch { step: usize, recorded: String, replayed: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Rebuilds a plan from its wire form by replaying it against the model,
/// then validates it. Hashes recorded in the document must match.
pub fn plan_from_document(model: &Model, doc: &PlanDocument) -> Result<Plan, DocumentError> {
    let PlanDocument::Plan { steps, initial: initial_hash, .. } = doc else {
        return Err(DocumentError::NotAPlan);
    };
    let invalid = |step, cause| DocumentError::Invalid(ValidationError { step, cause });
    let initial = model.initial_state().map_err(|_| invalid(0, ValidationCause::Chain))?;
    if &hash_hex(state_hash(initial)) != initial_hash {
        return Err(invalid(0, ValidationCause::Chain));
    }
    let mut current = initial.clone();
    let mut out = Vec::new();
    for (i, step) in steps.iter().enumerate() {
        let mut bindings = Substitution::new();
        for (var, text) in &step.bindings {
            let term = parse_term(text)
                .ok()
                .filter(|t| t.is_ground())
                .ok_or_else(|| DocumentError::Binding { step: i, text: text.clone() })?;
            bindings.bind(crate::term::sym(var), term);
        }
        let replayed = replay_step(&current, &model.transitions, &step.transition, &bindings)
            .map_err(|cause| invalid(i, cause))?;
        let replayed_hash = hash_hex(state_hash(&replayed.destination));
        if replayed_hash != step.state {
            return Err(DocumentError::HashMismatch {
                step: i,
                recorded: step.state.clone(),
                replayed: replayed_hash,
            });
        }
        current = replayed.destination.clone();
        out.push(replayed);
    }
    let plan = Plan { steps: out };
    validate_plan(model, &plan)?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_model, parse_predicate};

    const SHUTTLE: &str = "
model shuttle.
initial s0.
goal done.
state s0 {
  is_vehicle(bus1). is_transportable(p1). is_poi(poi1). is_poi(poi2).
  next(poi1, poi2). next(poi2, poi1).
  at(bus1, poi1). at(p1, poi1). capacity(bus1, 1). waiting(p1, min(3)).
}
state done { at(p1, poi2). }
transition pickup-agent {
  pre { is_vehicle(V). is_transportable(A). is_poi(P). at(V, P). at(A, P). capacity(V, C). waiting(A, min(T)). }
  compute { less_than(T, 20). greater_than(C, 0). subtract(C, 1, C2). }
  action { delete(at(A, P)). add(at(A, V)). delete(capacity(V, C)). add(capacity(V, C2)). delete(waiting(A, min(T))). }
}
transition drop-agent {
  pre { is_vehicle(V). is_transportable(A). is_poi(P). at(V, P). at(A, V). capacity(V, C). }
  compute { add(C, 1, C2). }
  action { delete(at(A, V)). add(at(A, P)). delete(capacity(V, C)). add(capacity(V, C2)). }
}
transition move-to-next-coordinate {
  pre { is_vehicle(V). is_poi(P). is_poi(Q). at(V, P). next(P, Q). }
  action { delete(at(V, P)). add(at(V, Q)). }
}";

    fn p(text: &str) -> Predicate {
        parse_predicate(text).unwrap()
    }

    #[test]
    fn three_step_plan() {
        let m = parse_model(SHUTTLE).unwrap();
        let outcome = find_plan(&m, &SearchConfig::with_bound(100_000)).unwrap();
        let plan = outcome.plan().expect("plan");
        let names: Vec<&str> = plan.steps.iter().map(|s| s.transition.as_str()).collect();
        assert_eq!(names, ["pickup-agent", "move-to-next-coordinate", "drop-agent"]);
        assert_eq!(validate_plan(&m, plan), Ok(()));
    }

    #[test]
    fn zero_capacity_is_unsolvable() {
        let m = parse_model(&SHUTTLE.replace("capacity(bus1, 1)", "capacity(bus1, 0)")).unwrap();
        match find_plan(&m, &SearchConfig::default()).unwrap() {
            PlanOutcome::Failed(f) => {
                assert_eq!(f.kind, FailureKind::FrontierExhausted);
                assert_eq!(f.unsatisfied, vec![p("at(p1, poi2)")]);
                // bus at poi1 or poi2; nothing else moves
                assert_eq!(f.explored, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn satisfied_initial_gives_empty_plan() {
        let m = parse_model(&SHUTTLE.replace("state done { at(p1, poi2). }", "state done { at(p1, poi1). }")).unwrap();
        let outcome = find_plan(&m, &SearchConfig::default()).unwrap();
        assert_eq!(outcome.plan().unwrap().cost(), 0);
    }

    #[test]
    fn bound_hit_is_inconclusive() {
        let m = parse_model(SHUTTLE).unwrap();
        match find_plan(&m, &SearchConfig::with_bound(1)).unwrap() {
            PlanOutcome::Failed(f) => {
                assert_eq!(f.kind, FailureKind::BoundHit);
                assert_eq!(f.explored, 1);
                assert!(!f.unsatisfied.is_empty());
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(find_plan(&m, &SearchConfig::with_bound(0)), Err(PlanError::ZeroBound));
    }

    #[test]
    fn goal_matching() {
        let s: State = [p("is_passenger(p1)"), p("at(p1, bs2)"), p("at(b1, bs1)")].into_iter().collect();
        let goal: State = [p("at(P, bs2)"), p("is_passenger(P)")].into_iter().collect();
        assert_eq!(goal_witness(&s, &goal).unwrap().to_string(), "{P=p1}");
        let miss: State = [p("at(p1, bs2)")].into_iter().collect();
        let elsewhere: State = [p("at(p1, bs1)")].into_iter().collect();
        assert!(!satisfies_goal(&elsewhere, &miss));
        assert!(satisfies_goal(&s, &miss));
    }

    #[test]
    fn validation_catches_tampering() {
        let m = parse_model(SHUTTLE).unwrap();
        let plan = find_plan(&m, &SearchConfig::default()).unwrap().plan().unwrap().clone();

        let mut wrong_pre = plan.clone();
        wrong_pre.steps[0].transition = "drop-agent".into();
        let err = validate_plan(&m, &wrong_pre).unwrap_err();
        assert_eq!(err.step, 0);
        assert_eq!(err.cause, ValidationCause::Precondition);

        let mut tampered = plan.clone();
        tampered.steps[1].destination.insert(p("at(p9, poi1)"));
        let err = validate_plan(&m, &tampered).unwrap_err();
        assert_eq!((err.step, err.cause), (1, ValidationCause::DestinationMismatch));

        let mut short = plan.clone();
        short.steps.pop();
        assert_eq!(validate_plan(&m, &short).unwrap_err().cause, ValidationCause::Goal);

        let mut gap = plan;
        gap.steps.remove(1);
        assert_eq!(validate_plan(&m, &gap).unwrap_err(), ValidationError { step: 1, cause: ValidationCause::Chain });
    }

    #[test]
    fn document_round_trip() {
        let m = parse_model(SHUTTLE).unwrap();
        let outcome = find_plan(&m, &SearchConfig::default()).unwrap();
        let doc = PlanDocument::from_outcome(m.initial_state().unwrap(), &outcome);
        let json = doc.to_json();
        let back: PlanDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        let plan = plan_from_document(&m, &back).unwrap();
        assert_eq!(&plan, outcome.plan().unwrap());
        assert!(json.contains("\"status\": \"plan\""));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let m = parse_model(SHUTTLE).unwrap();
        let seq = find_plan(&m, &SearchConfig { bound: 1000, execution: Execution::Sequential }).unwrap();
        let par = find_plan(&m, &SearchConfig { bound: 1000, execution: Execution::Parallel }).unwrap();
        assert_eq!(seq, par);
    }
}
