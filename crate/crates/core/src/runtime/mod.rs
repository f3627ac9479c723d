//! Query dispatch through an expertise table, and simulated plan execution
//! with perturbations and replanning.

pub mod query;
pub mod run;
pub mod script;

pub use query::{
    answer, check_invariant, dispatch, parse_violation, Answer, ExpertiseTable, InvariantOutcome, Query, QueryError,
    QueryKind, QueryPayload, SolverInvocation, SolverKind,
};
pub use run::{events_to_jsonl, parse_event_log, replay_log, EventRecord, HistoryEntry, RunError, RunEvent, RunState, RunStatus, StepOutcome};
pub use script::{drive, DriveReport, PerturbationScript, ScriptedPerturbation};
