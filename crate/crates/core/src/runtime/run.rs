//! Simulated plan execution with perturbations, mismatch detection and
//! replanning from scratch, recorded in a replayable event log.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::TransitionStep;
use crate::model::Model;
use crate::planner::{replay_step, search, PlanError, PlanOutcome, SearchConfig, satisfies_goal};
use crate::syntax::parse_predicate;
use crate::term::{Predicate, State, TransitionSpec};
use crate::trace::{hash_hex, state_hash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Replanning,
    Done,
    Failed,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Running => "running",
            RunStatus::Replanning => "replanning",
            RunStatus::Done => "done",
            RunStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perturbation {
    pub source: State,
    pub delete: Vec<Predicate>,
    pub add: Vec<Predicate>,
    pub destination: State,
}

/// One change of the world: an executed step or an injected perturbation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HistoryEntry {
    Step(TransitionStep),
    Perturbation(Perturbation),
}

impl HistoryEntry {
    fn source(&self) -> &State {
        match self {
            HistoryEntry::Step(s) => &s.source,
            HistoryEntry::Perturbation(p) => &p.source,
        }
    }

    fn destination(&self) -> &State {
        match self {
            HistoryEntry::Step(s) => &s.destination,
            HistoryEntry::Perturbation(p) => &p.destination,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOutcome {
    /// The step produced the state the plan expected.
    Applied,
    /// The step applied but produced a different state.
    DestinationMismatch,
    /// The step's precondition or computation no longer holds.
    NotApplicable,
    /// No steps remain.
    PlanExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum RunEvent {
    Start {
        run: String,
        world: String,
        status: RunStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plan_length: Option<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        unsatisfied: Vec<String>,
    },
    Execute {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transition: Option<String>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        bindings: BTreeMap<String, String>,
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected: Option<String>,
        destination: String,
        outcome: StepOutcome,
        status: RunStatus,
    },
    Perturb {
        delete: Vec<String>,
        add: Vec<String>,
        source: String,
        destination: String,
    },
    Replan {
        world: String,
        status: RunStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        plan_length: Option<usize>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        unsatisfied: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: usize,
    #[serde(flatten)]
    pub event: RunEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("operation needs status {expected}, run is {actual}")]
    WrongStatus { expected: RunStatus, actual: RunStatus },
    #[error("perturbation predicate `{0}` is not ground")]
    NonGround(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("history entry {index} does not replay: {reason}")]
    History { index: usize, reason: String },
    #[error("event log record {index}: {reason}")]
    Replay { index: usize, reason: String },
}

fn hash_of(state: &State) -> String {
    hash_hex(state_hash(state))
}

/// A run owns its world, remaining plan and history. History chains from
/// the initial state to `world`.
#[derive(Debug, Clone)]
pub struct RunState {
    pub id: String,
    initial: State,
    goal: State,
    transitions: BTreeMap<String, TransitionSpec>,
    config: SearchConfig,
    world: State,
    plan: VecDeque<TransitionStep>,
    history: Vec<HistoryEntry>,
    status: RunStatus,
    diagnosis: Vec<Predicate>,
    log: Vec<EventRecord>,
}

impl RunState {
    /// Plans from the model's initial state and records the start event.
    pub fn start(id: &str, model: &Model, config: SearchConfig) -> Result<Self, RunError> {
        model.validate().map_err(PlanError::from)?;
        let initial = model.initial_state().map_err(PlanError::from)?.clone();
        let goal = model.goal_state().map_err(PlanError::from)?.clone();
        let mut run = RunState {
            id: id.to_string(),
            world: initial.clone(),
            initial,
            goal,
            transitions: model.transitions.clone(),
            config,
            plan: VecDeque::new(),
            history: Vec::new(),
            status: RunStatus::Running,
            diagnosis: Vec::new(),
            log: Vec::new(),
        };
        run.plan_from_world()?;
        let event = RunEvent::Start {
            run: run.id.clone(),
            world: hash_of(&run.world),
            status: run.status,
            plan_length: (run.status != RunStatus::Failed).then_some(run.plan.len()),
            unsatisfied: run.diagnosis.iter().map(ToString::to_string).collect(),
        };
        run.record(event);
        Ok(run)
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    pub fn world(&self) -> &State {
        &self.world
    }

    pub fn goal(&self) -> &State {
        &self.goal
    }

    pub fn remaining_plan(&self) -> impl ExactSizeIterator<Item = &TransitionStep> {
        self.plan.iter()
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Goal predicates the last failed search could not reach.
    pub fn diagnosis(&self) -> &[Predicate] {
        &self.diagnosis
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn executed_steps(&self) -> usize {
        self.history.iter().filter(|h| matches!(h, HistoryEntry::Step(_))).count()
    }

    /// Event log as JSON lines.
    pub fn log_text(&self) -> String {
        events_to_jsonl(&self.log)
    }

    fn record(&mut self, event: RunEvent) {
        let seq = self.log.len();
        self.log.push(EventRecord { seq, event });
    }

    fn require(&self, expected: RunStatus) -> Result<(), RunError> {
        if self.status != expected {
            return Err(RunError::WrongStatus { expected, actual: self.status });
        }
        Ok(())
    }

    fn plan_from_world(&mut self) -> Result<(), RunError> {
        let transitions: Vec<&TransitionSpec> = self.transitions.values().collect();
        match search(&self.world, &self.goal, &transitions, &self.config)? {
            PlanOutcome::Found(plan) => {
                self.status = if plan.steps.is_empty() { RunStatus::Done } else { RunStatus::Running };
                self.plan = plan.steps.into();
                self.diagnosis.clear();
            }
            PlanOutcome::Failed(f) => {
                self.status = RunStatus::Failed;
                self.plan.clear();
                self.diagnosis = f.unsatisfied;
            }
        }
        Ok(())
    }

    /// Applies the next plan step to the world. Any difference between the
    /// produced and the planned destination, or a step that no longer
    /// applies, moves the run to `replanning`.
    pub fn execute(&mut self) -> Result<StepOutcome, RunError> {
        self.require(RunStatus::Running)?;
        let source = hash_of(&self.world);
        let Some(expected) = self.plan.pop_front() else {
            self.status = if satisfies_goal(&self.world, &self.goal) { RunStatus::Done } else { RunStatus::Replanning };
            let event = RunEvent::Execute {
                transition: None,
                bindings: BTreeMap::new(),
                destination: source.clone(),
                source,
                expected: None,
                outcome: StepOutcome::PlanExhausted,
                status: self.status,
            };
            self.record(event);
            return Ok(StepOutcome::PlanExhausted);
        };
        let bindings = expected.substitution.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let outcome = match replay_step(&self.world, &self.transitions, &expected.transition, &expected.substitution) {
            Err(_) => {
                self.plan.clear();
                self.status = RunStatus::Replanning;
                StepOutcome::NotApplicable
            }
            Ok(produced) => {
                let matches = produced.destination == expected.destination;
                self.world = produced.destination.clone();
                self.history.push(HistoryEntry::Step(produced));
                if !matches {
                    self.plan.clear();
                    self.status = RunStatus::Replanning;
                    StepOutcome::DestinationMismatch
                } else {
                    if self.plan.is_empty() {
                        let done = satisfies_goal(&self.world, &self.goal);
                        self.status = if done { RunStatus::Done } else { RunStatus::Replanning };
                    }
                    StepOutcome::Applied
                }
            }
        };
        let event = RunEvent::Execute {
            transition: Some(expected.transition.clone()),
            bindings,
            source,
            expected: Some(hash_of(&expected.destination)),
            destination: hash_of(&self.world),
            outcome,
            status: self.status,
        };
        self.record(event);
        Ok(outcome)
    }

    /// Deletes then adds ground predicates in the world. The plan is left
    /// untouched; the next `execute` detects any resulting mismatch.
    pub fn perturb(&mut self, add: &[Predicate], delete: &[Predicate]) -> Result<(), RunError> {
        self.require(RunStatus::Running)?;
        if let Some(p) = add.iter().chain(delete).find(|p| !p.is_ground()) {
            return Err(RunError::NonGround(p.to_string()));
        }
        let source = self.world.clone();
        let destination = apply_perturbation(&source, add, delete);
        self.world = destination.clone();
        let event = RunEvent::Perturb {
            delete: delete.iter().map(ToString::to_string).collect(),
            add: add.iter().map(ToString::to_string).collect(),
            source: hash_of(&source),
            destination: hash_of(&destination),
        };
        self.history.push(HistoryEntry::Perturbation(Perturbation {
            source,
            delete: delete.to_vec(),
            add: add.to_vec(),
            destination,
        }));
        self.record(event);
        Ok(())
    }

    /// Searches from the current world to the original goal.
    pub fn replan(&mut self) -> Result<RunStatus, RunError> {
        self.require(RunStatus::Replanning)?;
        self.plan_from_world()?;
        let event = RunEvent::Replan {
            world: hash_of(&self.world),
            status: self.status,
            plan_length: (self.status != RunStatus::Failed).then_some(self.plan.len()),
            unsatisfied: self.diagnosis.iter().map(ToString::to_string).collect(),
        };
        self.record(event);
        Ok(self.status)
    }

    /// Replays the history from the initial state: every step re-derives
    /// its destination, every perturbation its set update, and the chain
    /// ends in the current world.
    pub fn verify_history(&self) -> Result<(), RunError> {
        let mut current = &self.initial;
        for (index, entry) in self.history.iter().enumerate() {
            let fail = |reason: &str| RunError::History { index, reason: reason.to_string() };
            if entry.source() != current {
                return Err(fail("source differs from the previous state"));
            }
            match entry {
                HistoryEntry::Step(step) => {
                    let again = replay_step(current, &self.transitions, &step.transition, &step.substitution)
                        .map_err(|c| fail(&format!("{c:?}")))?;
                    if &again != step {
                        return Err(fail("step does not reproduce"));
                    }
                }
                HistoryEntry::Perturbation(p) => {
                    if apply_perturbation(current, &p.add, &p.delete) != p.destination {
                        return Err(fail("perturbation does not reproduce"));
                    }
                }
            }
            current = entry.destination();
        }
        if current != &self.world {
            return Err(RunError::History { index: self.history.len(), reason: "history does not end in the world".into() });
        }
        Ok(())
    }
}

fn apply_perturbation(state: &State, add: &[Predicate], delete: &[Predicate]) -> State {
    let mut out = state.clone();
    for p in delete {
        out.remove(p);
    }
    for p in add {
        out.insert(p.clone());
    }
    out
}

pub fn events_to_jsonl(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events always serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_event_log(text: &str) -> Result<Vec<EventRecord>, RunError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| RunError::Replay { index: i, reason: e.to_string() }))
        .collect()
}

/// Re-runs a logged run against `model` and checks every regenerated
/// record against the log.
pub fn replay_log(model: &Model, config: SearchConfig, events: &[EventRecord]) -> Result<RunState, RunError> {
    let Some(EventRecord { event: RunEvent::Start { run: id, .. }, .. }) = events.first() else {
        return Err(RunError::Replay { index: 0, reason: "log must begin with a start event".into() });
    };
    let mut run = RunState::start(id, model, config)?;
    let check = |run: &RunState, index: usize| -> Result<(), RunError> {
        if run.log.get(index) != events.get(index) {
            return Err(RunError::Replay { index, reason: "regenerated record differs from the log".into() });
        }
        Ok(())
    };
    check(&run, 0)?;
    for (index, record) in events.iter().enumerate().skip(1) {
        let err = |reason: String| RunError::Replay { index, reason };
        match &record.event {
            RunEvent::Start { .. } => return Err(err("duplicate start event".into())),
            RunEvent::Execute { .. } => {
                run.execute()?;
            }
            RunEvent::Replan { .. } => {
                run.replan()?;
            }
            RunEvent::Perturb { add, delete, .. } => {
                let parse = |texts: &[String]| -> Result<Vec<Predicate>, RunError> {
                    texts.iter().map(|t| parse_predicate(t).map_err(|e| err(e.to_string()))).collect()
                };
                let (add, delete) = (parse(add)?, parse(delete)?);
                run.perturb(&add, &delete)?;
            }
        }
        check(&run, index)?;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_model;

    const LINE: &str = "
initial s.
goal g.
state s { at(a). next(a, b). next(b, c). }
state g { at(c). }
transition go {
  pre { at(X). next(X, Y). }
  action { delete(at(X)). add(at(Y)). }
}
";

    fn p(text: &str) -> Predicate {
        parse_predicate(text).unwrap()
    }

    fn start(text: &str) -> RunState {
        RunState::start("r", &parse_model(text).unwrap(), SearchConfig::default()).unwrap()
    }

    #[test]
    fn unperturbed_run_reaches_goal() {
        let mut run = start(LINE);
        assert_eq!(run.remaining_plan().len(), 2);
        assert_eq!(run.execute().unwrap(), StepOutcome::Applied);
        assert_eq!(run.status(), RunStatus::Running);
        assert_eq!(run.execute().unwrap(), StepOutcome::Applied);
        assert_eq!(run.status(), RunStatus::Done);
        assert!(run.world().contains(&p("at(c)")));
        run.verify_history().unwrap();
        assert!(matches!(run.execute(), Err(RunError::WrongStatus { .. })));
    }

    #[test]
    fn goal_already_satisfied_is_done() {
        let run = start(&LINE.replace("state s { at(a).", "state s { at(c)."));
        assert_eq!(run.status(), RunStatus::Done);
        assert_eq!(run.remaining_plan().len(), 0);
    }

    #[test]
    fn displacement_is_detected_and_replanned() {
        let mut run = start(LINE);
        run.perturb(&[p("at(b)")], &[p("at(a)")]).unwrap();
        assert_eq!(run.status(), RunStatus::Running);
        assert_eq!(run.execute().unwrap(), StepOutcome::NotApplicable);
        assert_eq!(run.status(), RunStatus::Replanning);
        assert_eq!(run.replan().unwrap(), RunStatus::Running);
        assert_eq!(run.remaining_plan().len(), 1);
        run.execute().unwrap();
        assert_eq!(run.status(), RunStatus::Done);
        run.verify_history().unwrap();
    }

    #[test]
    fn unreachable_goal_fails_with_diagnosis() {
        let mut run = start(LINE);
        run.perturb(&[], &[p("next(b, c)")]).unwrap();
        assert_eq!(run.execute().unwrap(), StepOutcome::DestinationMismatch);
        assert_eq!(run.replan().unwrap(), RunStatus::Failed);
        assert_eq!(run.diagnosis(), &[p("at(c)")]);
    }

    #[test]
    fn perturbation_rules() {
        let mut run = start(LINE);
        let before = run.world().clone();
        run.perturb(&[], &[]).unwrap();
        assert_eq!(run.world(), &before);
        let var = Predicate::new("at", vec![crate::term::Term::var("X")]);
        assert!(matches!(run.perturb(&[var], &[]), Err(RunError::NonGround(_))));
        assert!(matches!(run.replan(), Err(RunError::WrongStatus { .. })));
    }

    #[test]
    fn log_round_trips_and_replays() {
        let m = parse_model(LINE).unwrap();
        let mut run = RunState::start("r", &m, SearchConfig::default()).unwrap();
        run.perturb(&[p("at(b)")], &[p("at(a)")]).unwrap();
        run.execute().unwrap();
        run.replan().unwrap();
        run.execute().unwrap();
        let text = run.log_text();
        let events = parse_event_log(&text).unwrap();
        assert_eq!(events, run.events());
        let again = replay_log(&m, SearchConfig::default(), &events).unwrap();
        assert_eq!(again.log_text(), text);
        let mut tampered = events.clone();
        tampered.remove(1);
        assert!(replay_log(&m, SearchConfig::default(), &tampered).is_err());
    }
}
