//! Knowledge model, transition semantics and planning for predicate-based
//! state/transition descriptions.
//!
//! A model is a set of named ground states plus transition specifications
//! (precondition, computation, action). [`engine`] executes the transition
//! relation, [`planner`] searches it, and [`pddl`] compiles models to PDDL.

pub mod builtins;
pub mod engine;
pub mod model;
pub mod number;
pub mod ontology;
pub mod par;
pub mod pddl;
pub mod planner;
pub mod print;
pub mod runtime;
pub mod syntax;
pub mod term;
pub mod trace;
pub mod unify;

pub use engine::{apply_transition, eval_computation, successors, EngineError, TransitionStep};
pub use model::{Model, ModelError};
pub use number::Number;
pub use par::Execution;
pub use planner::{find_plan, satisfies_goal, validate_plan, Plan, PlanFailure, PlanOutcome, SearchConfig};
pub use print::print_canonical;
pub use syntax::{parse_model, parse_predicate, parse_term, ParseError, Pos};
pub use term::{ActionKind, ActionPredicate, FunctionCall, Predicate, State, Substitution, Symbol, Term, TransitionSpec};
pub use unify::{match_precondition, unify};
