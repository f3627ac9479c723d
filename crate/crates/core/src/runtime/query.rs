//! Queries, the expertise table that routes them to solvers, and the
//! bounded reachability checker used for invariant queries.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{eval_computation, successors, EngineError, TransitionStep};
use crate::model::Model;
use crate::par::Execution;
use crate::planner::{find_plan, plan_from_document, PlanDocument, PlanError, SearchConfig, DEFAULT_BOUND};
use crate::syntax::parse_model;
use crate::term::{State, Substitution, TransitionSpec};
use crate::unify::match_precondition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    ReachGoal,
    ValidateTrace,
    CheckInvariant,
}

impl QueryKind {
    pub const ALL: [QueryKind; 3] = [QueryKind::ReachGoal, QueryKind::ValidateTrace, QueryKind::CheckInvariant];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryKind::ReachGoal => "reach-goal",
            QueryKind::ValidateTrace => "validate-trace",
            QueryKind::CheckInvariant => "check-invariant",
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("unknown query kind `{0}`")]
    UnknownKind(String),
    #[error("expertise table: {0}")]
    Table(String),
    #[error("no expertise rule for `{0}`")]
    NoRule(QueryKind),
    #[error("invariant: {0}")]
    Invariant(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl FromStr for QueryKind {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| QueryError::UnknownKind(s.to_string()))
    }
}

/// Kind-specific query arguments; the kind tag selects the required fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryPayload {
    ReachGoal,
    ValidateTrace {
        trace: PlanDocument,
    },
    /// `violation` is a transition whose precondition and computation
    /// describe a forbidden state; its action is ignored.
    CheckInvariant {
        violation: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub model: String,
    #[serde(flatten)]
    pub payload: QueryPayload,
}

impl Query {
    pub fn kind(&self) -> QueryKind {
        match self.payload {
            QueryPayload::ReachGoal => QueryKind::ReachGoal,
            QueryPayload::ValidateTrace { .. } => QueryKind::ValidateTrace,
            QueryPayload::CheckInvariant { .. } => QueryKind::CheckInvariant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Planner,
    PlanValidator,
    ReachabilityChecker,
}

impl SolverKind {
    fn answers(self) -> QueryKind {
        match self {
            SolverKind::Planner => QueryKind::ReachGoal,
            SolverKind::PlanValidator => QueryKind::ValidateTrace,
            SolverKind::ReachabilityChecker => QueryKind::CheckInvariant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionMode {
    Sequential,
    Parallel,
}

impl From<ExecutionMode> for Execution {
    fn from(m: ExecutionMode) -> Self {
        match m {
            ExecutionMode::Sequential => Execution::Sequential,
            ExecutionMode::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertiseRule {
    pub query: QueryKind,
    pub solver: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionMode>,
}

/// Ordered routing rules; the first rule for a query kind wins. Every kind
/// has a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpertiseTable {
    rule: Vec<ExpertiseRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    #[serde(default)]
    rule: Vec<ExpertiseRule>,
}

pub const DEFAULT_EXPERTISE: &str = include_str!("expertise.toml");

impl ExpertiseTable {
    pub fn new(rules: Vec<ExpertiseRule>) -> Result<Self, QueryError> {
        for (i, r) in rules.iter().enumerate() {
            if r.solver.answers() != r.query {
                return Err(QueryError::Table(format!(
                    "rule {}: solver `{}` cannot answer `{}` queries",
                    i + 1,
                    serde_json::to_value(r.solver).expect("solver serializes").as_str().unwrap_or_default(),
                    r.query
                )));
            }
            if r.bound == Some(0) {
                return Err(QueryError::Table(format!("rule {}: bound must be at least 1", i + 1)));
            }
        }
        for kind in QueryKind::ALL {
            if !rules.iter().any(|r| r.query == kind) {
                return Err(QueryError::Table(format!("no rule for `{kind}` queries")));
            }
        }
        Ok(ExpertiseTable { rule: rules })
    }

    pub fn from_toml(text: &str) -> Result<Self, QueryError> {
        let file: TableFile = toml::from_str(text).map_err(|e| QueryError::Table(e.to_string()))?;
        Self::new(file.rule)
    }

    pub fn rules(&self) -> &[ExpertiseRule] {
        &self.rule
    }

    pub fn dispatch(&self, kind: QueryKind) -> Result<SolverInvocation, QueryError> {
        let rule = self.rule.iter().find(|r| r.query == kind).ok_or(QueryError::NoRule(kind))?;
        Ok(SolverInvocation {
            solver: rule.solver,
            bound: rule.bound.unwrap_or(DEFAULT_BOUND),
            execution: rule.execution.unwrap_or(ExecutionMode::Parallel),
        })
    }
}

impl Default for ExpertiseTable {
    fn default() -> Self {
        Self::from_toml(DEFAULT_EXPERTISE).expect("bundled expertise table is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SolverInvocation {
    pub solver: SolverKind,
    pub bound: usize,
    pub execution: ExecutionMode,
}

impl SolverInvocation {
    pub fn search_config(&self) -> SearchConfig {
        SearchConfig { bound: self.bound, execution: self.execution.into() }
    }
}

/// Routes a query kind given by name.
pub fn dispatch(kind: &str, table: &ExpertiseTable) -> Result<SolverInvocation, QueryError> {
    table.dispatch(kind.parse()?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantOutcome {
    /// No reachable state within the bound matches the violation.
    /// `exhaustive` means every reachable state was examined.
    Holds { explored: usize, exhaustive: bool },
    /// `trace` leads from the initial state to the violating state.
    Violated { explored: usize, trace: Vec<TransitionStep>, witness: Substitution },
}

fn violation_witness(state: &State, violation: &TransitionSpec) -> Result<Option<Substitution>, EngineError> {
    for sigma in match_precondition(&violation.precondition, state) {
        if let Some(sigma) = eval_computation(&violation.computation, &sigma)? {
            return Ok(Some(sigma));
        }
    }
    Ok(None)
}

/// Breadth-first reachability from `initial`, checking every discovered
/// state against `violation`. At most `bound` states are expanded.
pub fn check_invariant(
    initial: &State,
    transitions: &[&TransitionSpec],
    violation: &TransitionSpec,
    bound: usize,
) -> Result<InvariantOutcome, EngineError> {
    let mut states = vec![initial.clone()];
    let mut parent: Vec<Option<(usize, TransitionStep)>> = vec![None];
    let mut index: HashMap<State, usize> = HashMap::from([(initial.clone(), 0)]);
    let mut queue = VecDeque::from([0usize]);
    let trace_to = |parent: &[Option<(usize, TransitionStep)>], mut i: usize| {
        let mut trace = Vec::new();
        while let Some((p, step)) = &parent[i] {
            trace.push(step.clone());
            i = *p;
        }
        trace.reverse();
        trace
    };
    if let Some(witness) = violation_witness(initial, violation)? {
        return Ok(InvariantOutcome::Violated { explored: 0, trace: Vec::new(), witness });
    }
    let mut explored = 0;
    while let Some(i) = queue.pop_front() {
        if explored == bound {
            return Ok(InvariantOutcome::Holds { explored, exhaustive: false });
        }
        explored += 1;
        let source = states[i].clone();
        for step in successors(&source, transitions.iter().copied())? {
            if index.contains_key(&step.destination) {
                continue;
            }
            let j = states.len();
            index.insert(step.destination.clone(), j);
            states.push(step.destination.clone());
            let witness = violation_witness(&step.destination, violation)?;
            parent.push(Some((i, step)));
            if let Some(witness) = witness {
                return Ok(InvariantOutcome::Violated { explored, trace: trace_to(&parent, j), witness });
            }
            queue.push_back(j);
        }
    }
    Ok(InvariantOutcome::Holds { explored, exhaustive: true })
}

/// Parses the single transition of an invariant violation document.
pub fn parse_violation(text: &str) -> Result<TransitionSpec, QueryError> {
    let m = parse_model(text).map_err(|e| QueryError::Invariant(e.to_string()))?;
    let mut ts = m.transitions.into_values();
    match (ts.next(), ts.next()) {
        (Some(t), None) => Ok(t),
        _ => Err(QueryError::Invariant("expected exactly one transition describing the violation".into())),
    }
}

/// Solver output for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "answer", rename_all = "kebab-case")]
pub enum Answer {
    Plan { document: PlanDocument },
    Trace { valid: bool, #[serde(skip_serializing_if = "Option::is_none")] error: Option<String> },
    Invariant {
        holds: bool,
        explored: usize,
        exhaustive: bool,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        counterexample: Vec<String>,
    },
}

/// Dispatches `q` through `table` and runs the chosen solver on `m`.
pub fn answer(q: &Query, m: &Model, table: &ExpertiseTable) -> Result<Answer, QueryError> {
    let inv = table.dispatch(q.kind())?;
    match &q.payload {
        QueryPayload::ReachGoal => {
            let outcome = find_plan(m, &inv.search_config())?;
            let initial = m.initial_state().map_err(PlanError::from)?;
            Ok(Answer::Plan { document: PlanDocument::from_outcome(initial, &outcome) })
        }
        QueryPayload::ValidateTrace { trace } => match plan_from_document(m, trace) {
            Ok(_) => Ok(Answer::Trace { valid: true, error: None }),
            Err(e) => Ok(Answer::Trace { valid: false, error: Some(e.to_string()) }),
        },
        QueryPayload::CheckInvariant { violation } => {
            let violation = parse_violation(violation)?;
            let initial = m.initial_state().map_err(PlanError::from)?;
            let outcome = check_invariant(initial, &m.transition_list(), &violation, inv.bound)?;
            Ok(match outcome {
                InvariantOutcome::Holds { explored, exhaustive } => {
                    Answer::Invariant { holds: true, explored, exhaustive, counterexample: Vec::new() }
                }
                InvariantOutcome::Violated { explored, trace, .. } => Answer::Invariant {
                    holds: false,
                    explored,
                    exhaustive: false,
                    counterexample: trace.iter().map(crate::trace::dump_step).collect(),
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = "
initial s.
goal g.
state s { count(0). }
state g { count(3). }
transition inc {
  pre { count(N). }
  compute { less_than(N, 3). add(N, 1, M). }
  action { delete(count(N)). add(count(M)). }
}
";

    #[test]
    fn default_table_routes_each_kind() {
        let t = ExpertiseTable::default();
        assert_eq!(dispatch("reach-goal", &t).unwrap().solver, SolverKind::Planner);
        assert_eq!(dispatch("validate-trace", &t).unwrap().solver, SolverKind::PlanValidator);
        assert_eq!(dispatch("check-invariant", &t).unwrap().solver, SolverKind::ReachabilityChecker);
        assert_eq!(dispatch("reach-goal", &t).unwrap().bound, DEFAULT_BOUND);
        assert!(matches!(dispatch("summon", &t), Err(QueryError::UnknownKind(_))));
    }

    #[test]
    fn first_rule_wins_and_table_is_total() {
        let text = "
[[rule]]
query = \"reach-goal\"
solver = \"planner\"
bound = 5
[[rule]]
query = \"reach-goal\"
solver = \"planner\"
bound = 9
[[rule]]
query = \"validate-trace\"
solver = \"plan-validator\"
[[rule]]
query = \"check-invariant\"
solver = \"reachability-checker\"
execution = \"sequential\"
";
        let t = ExpertiseTable::from_toml(text).unwrap();
        assert_eq!(t.dispatch(QueryKind::ReachGoal).unwrap().bound, 5);
        assert_eq!(t.dispatch(QueryKind::CheckInvariant).unwrap().execution, ExecutionMode::Sequential);
        let partial = "[[rule]]\nquery = \"reach-goal\"\nsolver = \"planner\"\n";
        assert!(matches!(ExpertiseTable::from_toml(partial), Err(QueryError::Table(_))));
        let wrong = text.replace("solver = \"plan-validator\"", "solver = \"planner\"");
        assert!(matches!(ExpertiseTable::from_toml(&wrong), Err(QueryError::Table(_))));
    }

    #[test]
    fn invariant_holds_and_fails() {
        let m = parse_model(COUNTER).unwrap();
        let never_negative = parse_violation("transition bad { pre { count(N). } compute { less_than(N, 0). } }").unwrap();
        let out = check_invariant(m.initial_state().unwrap(), &m.transition_list(), &never_negative, 100).unwrap();
        assert_eq!(out, InvariantOutcome::Holds { explored: 4, exhaustive: true });
        let below_two = parse_violation("transition bad { pre { count(2). } }").unwrap();
        let InvariantOutcome::Violated { trace, .. } =
            check_invariant(m.initial_state().unwrap(), &m.transition_list(), &below_two, 100).unwrap()
        else {
            panic!("count(2) is reachable");
        };
        assert_eq!(trace.len(), 2);
        let bounded = check_invariant(m.initial_state().unwrap(), &m.transition_list(), &never_negative, 2).unwrap();
        assert_eq!(bounded, InvariantOutcome::Holds { explored: 2, exhaustive: false });
    }

    #[test]
    fn answers_all_query_kinds() {
        let m = parse_model(COUNTER).unwrap();
        let t = ExpertiseTable::default();
        let q = Query { model: "c".into(), payload: QueryPayload::ReachGoal };
        let Answer::Plan { document } = answer(&q, &m, &t).unwrap() else { panic!() };
        let q = Query { model: "c".into(), payload: QueryPayload::ValidateTrace { trace: document } };
        assert_eq!(answer(&q, &m, &t).unwrap(), Answer::Trace { valid: true, error: None });
        let json = r#"{"model":"c","kind":"check-invariant","violation":"transition v { pre { count(9). } }"}"#;
        let q: Query = serde_json::from_str(json).unwrap();
        assert_eq!(q.kind(), QueryKind::CheckInvariant);
        let a = answer(&q, &m, &t).unwrap();
        assert!(matches!(a, Answer::Invariant { holds: true, exhaustive: true, .. }));
        assert!(serde_json::from_str::<Query>(r#"{"model":"c","kind":"guess"}"#).is_err());
    }
}
