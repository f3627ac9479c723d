//! Perturbation scripts and the driver that runs a plan against them.
//!
//! ```text
//! perturb 1 {
//!   delete(at(bus1, poi1)).
//!   add(at(bus1, poi3)).
//! }
//! ```
//!
//! `perturb k` fires once `k` plan steps have been executed and the run is
//! `running`. Blocks with the same `k` fire in file order.

use crate::syntax::{Cursor, ParseError};
use crate::term::{ActionKind, Predicate};

use super::run::{RunError, RunState, RunStatus};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedPerturbation {
    pub after_steps: usize,
    pub delete: Vec<Predicate>,
    pub add: Vec<Predicate>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PerturbationScript {
    pub perturbations: Vec<ScriptedPerturbation>,
}

impl PerturbationScript {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cur = Cursor::new(text)?;
        let mut perturbations = Vec::new();
        while !cur.at_eof() {
            cur.expect_keyword("perturb")?;
            let (after_steps, _) = cur.integer()?;
            let pos = cur.pos();
            let actions = cur.dotted_block(Cursor::action_predicate)?;
            let mut p = ScriptedPerturbation { after_steps, delete: Vec::new(), add: Vec::new() };
            for a in actions {
                if !a.predicate.is_ground() {
                    return Err(ParseError::new(pos, format!("perturbation predicate `{}` is not ground", a.predicate)));
                }
                match a.kind {
                    ActionKind::Delete => p.delete.push(a.predicate),
                    ActionKind::Add => p.add.push(a.predicate),
                }
            }
            perturbations.push(p);
        }
        Ok(PerturbationScript { perturbations })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriveReport {
    pub status: RunStatus,
    /// Script entries that never fired because the run ended first.
    pub unfired: usize,
}

/// Executes, perturbs and replans until the run is `done` or `failed`, or
/// `max_operations` operations have been performed.
pub fn drive(run: &mut RunState, script: &PerturbationScript, max_operations: usize) -> Result<DriveReport, RunError> {
    let mut next = 0;
    let mut operations = 0;
    while operations < max_operations && matches!(run.status(), RunStatus::Running | RunStatus::Replanning) {
        operations += 1;
        if run.status() == RunStatus::Running {
            let due = script.perturbations.get(next).filter(|p| p.after_steps <= run.executed_steps());
            if let Some(p) = due {
                run.perturb(&p.add, &p.delete)?;
                next += 1;
                continue;
            }
            run.execute()?;
        } else {
            run.replan()?;
        }
    }
    Ok(DriveReport { status: run.status(), unfired: script.perturbations.len() - next })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::SearchConfig;
    use crate::syntax::parse_model;

    #[test]
    fn parses_blocks_in_order() {
        let s = PerturbationScript::parse("perturb 1 { delete(a(x)). add(b(x)). }\nperturb 0 { }").unwrap();
        assert_eq!(s.perturbations.len(), 2);
        assert_eq!(s.perturbations[0].after_steps, 1);
        assert_eq!(s.perturbations[0].delete[0].to_string(), "a(x)");
        assert!(PerturbationScript::parse("perturb 1 { add(b(X)). }").is_err());
        assert!(PerturbationScript::parse("nudge 1 { }").is_err());
    }

    #[test]
    fn drive_replans_after_displacement() {
        let m = parse_model(
            "initial s. goal g.
state s { at(a). next(a, b). next(b, c). next(c, a). }
state g { at(c). }
transition go { pre { at(X). next(X, Y). } action { delete(at(X)). add(at(Y)). } }",
        )
        .unwrap();
        let mut run = RunState::start("r", &m, SearchConfig::default()).unwrap();
        let script = PerturbationScript::parse("perturb 1 { delete(at(b)). add(at(a)). }").unwrap();
        let report = drive(&mut run, &script, 100).unwrap();
        assert_eq!(report, DriveReport { status: RunStatus::Done, unfired: 0 });
        assert_eq!(run.executed_steps(), 3);
        run.verify_history().unwrap();
    }
}
