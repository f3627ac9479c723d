//! Replays PDDL plans in native semantics.
//!
//! Each PDDL action instance is mapped back through the names the compiler
//! emitted: the action name to its transition, every `:parameters` variable
//! to the precondition variable it came from and every object to its
//! literal. The native precondition is then matched from those bindings, so
//! numeric values and computation results are re-derived rather than trusted.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::process::Command;

use crate::engine::{apply_transition, eval_computation, TransitionStep};
use crate::model::Model;
use crate::planner::{satisfies_goal, validate_steps};
use crate::term::{Substitution, Term};
use crate::unify::match_precondition_from;

use super::sexpr::{parse_one, Sexpr};
use super::PddlArtifact;

/// One ground action of a sequential PDDL plan.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlanAction {
    pub name: String,
    pub args: Vec<String>,
}

impl fmt::Display for PlanAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// The first plan action that does not replay natively. `index` equals the
/// plan length when every action replays but the goal is not reached.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("action {index} `{action}`: {cause}")]
pub struct Divergence {
    pub index: usize,
    pub action: String,
    pub cause: String,
}

/// Extracts `(action arg ...)` lines from solver output. Leading step
/// labels such as `0.000:` and trailing durations such as `[1.000]` are
/// ignored, as are `;` comment lines.
pub fn parse_plan_output(text: &str) -> Vec<PlanAction> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with(';') {
            continue;
        }
        let (Some(open), Some(close)) = (line.find('('), line.find(')')) else {
            continue;
        };
        if close < open {
            continue;
        }
        let mut words = line[open + 1..close].split_whitespace().map(str::to_ascii_lowercase);
        if let Some(name) = words.next() {
            out.push(PlanAction { name, args: words.collect() });
        }
    }
    out
}

/// `action → parameter variable names` read from a domain artifact.
fn action_parameters(domain: &str) -> Result<BTreeMap<String, Vec<String>>, String> {
    let doc = parse_one(domain).map_err(|e| e.to_string())?;
    let mut out = BTreeMap::new();
    for section in doc.list().unwrap_or(&[]).iter().skip(2) {
        if section.head() != Some(":action") {
            continue;
        }
        let parts = section.list().unwrap_or(&[]);
        let name = parts.get(1).and_then(Sexpr::atom).unwrap_or("").to_string();
        let mut params = Vec::new();
        for pair in parts[2..].chunks(2) {
            if let [Sexpr::Atom(k), Sexpr::List(items)] = pair {
                if k == ":parameters" {
                    params = items
                        .iter()
                        .filter_map(Sexpr::atom)
                        .filter(|a| a.starts_with('?'))
                        .map(str::to_string)
                        .collect();
                }
            }
        }
        out.insert(name, params);
    }
    Ok(out)
}

fn literal_names(m: &Model) -> BTreeMap<String, Term> {
    fn walk(t: &Term, out: &mut BTreeMap<String, Term>) {
        match t {
            Term::Literal(l) => {
                out.insert(l.to_ascii_lowercase(), t.clone());
            }
            Term::Compound(_, args) => args.iter().for_each(|a| walk(a, out)),
            _ => {}
        }
    }
    let mut out = BTreeMap::new();
    let preds = m
        .states
        .values()
        .flat_map(|s| s.iter())
        .chain(m.transitions.values().flat_map(|t| t.precondition.iter().chain(t.action.iter().map(|a| &a.predicate))));
    for p in preds {
        p.args.iter().for_each(|a| walk(a, &mut out));
    }
    out
}

/// Replays `plan` from the model's initial state and checks the goal.
/// Returns the native steps on success.
pub fn cross_validate(
    m: &Model,
    domain: &PddlArtifact,
    problem: &PddlArtifact,
    plan: &[PlanAction],
) -> Result<Vec<TransitionStep>, Divergence> {
    let diverge = |index: usize, action: &str, cause: &str| Divergence {
        index,
        action: action.to_string(),
        cause: cause.to_string(),
    };
    let params = action_parameters(&domain.text).map_err(|e| diverge(0, "", &e))?;
    let domain_name = parse_one(&domain.text)
        .ok()
        .and_then(|d| d.list().and_then(|l| l.get(1)).and_then(Sexpr::list).and_then(|h| h.get(1)).and_then(Sexpr::atom).map(str::to_string));
    let problem_domain = parse_one(&problem.text).ok().and_then(|p| {
        p.list()?
            .iter()
            .find(|s| s.head() == Some(":domain"))
            .and_then(|s| s.list()?.get(1)?.atom().map(str::to_string))
    });
    if domain_name.is_none() || domain_name != problem_domain {
        return Err(diverge(0, "", "problem does not reference the domain"));
    }
    let initial = m.initial_state().map_err(|e| diverge(0, "", &e.to_string()))?;
    let goal = m.goal_state().map_err(|e| diverge(0, "", &e.to_string()))?;
    let literals = literal_names(m);

    let mut steps: Vec<TransitionStep> = Vec::new();
    let mut current = initial.clone();
    for (index, action) in plan.iter().enumerate() {
        let text = action.to_string();
        let fail = |cause: &str| diverge(index, &text, cause);
        let transition = m
            .transitions
            .values()
            .find(|t| t.name.to_ascii_lowercase() == action.name)
            .ok_or_else(|| fail("no transition with this name"))?;
        let names = params.get(&action.name).ok_or_else(|| fail("action is not in the domain"))?;
        if names.len() != action.args.len() {
            return Err(fail("wrong number of arguments"));
        }
        let vars = transition.precondition_variables();
        let mut seed = Substitution::new();
        for (param, arg) in names.iter().zip(&action.args) {
            let var = vars
                .iter()
                .find(|v| format!("?{}", v.to_ascii_lowercase()) == *param)
                .ok_or_else(|| fail(&format!("parameter `{param}` has no native variable")))?;
            let value = literals.get(arg).ok_or_else(|| fail(&format!("unknown object `{arg}`")))?;
            seed.bind(var.clone(), value.clone());
        }
        let mut matched = false;
        let mut next = None;
        for sigma in match_precondition_from(&transition.precondition, &current, &seed) {
            matched = true;
            if let Ok(Some(sigma)) = eval_computation(&transition.computation, &sigma) {
                let destination = apply_transition(&current, transition, &sigma).map_err(|e| fail(&e.to_string()))?;
                next = Some(TransitionStep {
                    source: current.clone(),
                    transition: transition.name.clone(),
                    substitution: sigma,
                    destination,
                });
                break;
            }
        }
        let step = next.ok_or_else(|| {
            fail(if matched { "computation fails in native semantics" } else { "precondition does not hold" })
        })?;
        current = step.destination.clone();
        steps.push(step);
    }
    if !satisfies_goal(&current, goal) {
        return Err(diverge(plan.len(), "", "goal not reached"));
    }
    validate_steps(initial, goal, &m.transitions, &steps)
        .map_err(|e| diverge(e.step, "", &format!("native validation failed: {:?}", e.cause)))?;
    Ok(steps)
}

/// An external planner run as a subprocess. The command template is split
/// on whitespace; `{domain}` and `{problem}` are replaced by file paths.
/// Example: `optic-clp {domain} {problem}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub template: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("empty solver command template")]
    EmptyTemplate,
    #[error("could not run solver: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
}

impl ExternalSolver {
    pub fn new(template: impl Into<String>) -> Self {
        ExternalSolver { template: template.into() }
    }

    pub fn command_line(&self, domain: &Path, problem: &Path) -> Vec<String> {
        self.template
            .split_whitespace()
            .map(|w| {
                w.replace("{domain}", &domain.to_string_lossy()).replace("{problem}", &problem.to_string_lossy())
            })
            .collect()
    }

    /// Writes both documents into `workdir`, runs the solver and parses its
    /// standard output.
    pub fn solve(&self, workdir: &Path, domain: &PddlArtifact, problem: &PddlArtifact) -> Result<Vec<PlanAction>, SolverError> {
        let domain_path = workdir.join(format!("{}.pddl", domain.hash));
        let problem_path = workdir.join(format!("{}.pddl", problem.hash));
        std::fs::write(&domain_path, &domain.text)?;
        std::fs::write(&problem_path, &problem.text)?;
        let argv = self.command_line(&domain_path, &problem_path);
        let (program, args) = argv.split_first().ok_or(SolverError::EmptyTemplate)?;
        let output = Command::new(program).args(args).output()?;
        if !output.status.success() {
            return Err(SolverError::Failed {
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
            });
        }
        Ok(parse_plan_output(&String::from_utf8_lossy(&output.stdout)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{compile_domain, compile_problem, parse_rules, reference};
    use crate::syntax::parse_model;

    #[test]
    fn parses_solver_lines() {
        let text = "; Plan found\n0.000: (Board B25 P1 BS1)  [0.001]\n\n(move b25 bs1 bs2)\nnoise\n";
        let plan = parse_plan_output(text);
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].to_string(), "(board b25 p1 bs1)");
        assert_eq!(plan[1].args, vec!["b25", "bs1", "bs2"]);
    }

    #[test]
    fn command_template() {
        let s = ExternalSolver::new("optic -N {domain} {problem}");
        let argv = s.command_line(Path::new("/tmp/d.pddl"), Path::new("/tmp/p.pddl"));
        assert_eq!(argv, vec!["optic", "-N", "/tmp/d.pddl", "/tmp/p.pddl"]);
    }

    const MODEL: &str = "
model line.
initial s.
goal g.
state s { is_bus(b). is_stop(x). is_stop(y). is_stop(z). at(b, x). next(x, y). next(y, z). fuel(b, 3). }
state g { at(b, z). }
transition go {
  pre { is_bus(B). is_stop(S). is_stop(T). at(B, S). next(S, T). fuel(B, F). }
  compute { greater_than(F, 0). subtract(F, 1, F2). }
  action { delete(at(B, S)). add(at(B, T)). delete(fuel(B, F)). add(fuel(B, F2)). }
}";

    fn artifacts() -> (Model, PddlArtifact, PddlArtifact) {
        let m = parse_model(MODEL).unwrap();
        let r = parse_rules("rules { types { is_bus. is_stop. } fluents { fuel/2. } }").unwrap();
        let d = compile_domain(&m, &r).unwrap();
        let p = compile_problem(&m, &r).unwrap();
        (m, d, p)
    }

    #[test]
    fn reference_plan_replays_natively() {
        let (m, d, p) = artifacts();
        let plan = reference::solve(&d.text, &p.text, 1000).unwrap().unwrap();
        let steps = cross_validate(&m, &d, &p, &plan).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[1].substitution.get("F2"), Some(&Term::num(1)));
    }

    #[test]
    fn gap_is_reported() {
        let (m, d, p) = artifacts();
        let plan = reference::solve(&d.text, &p.text, 1000).unwrap().unwrap();
        let err = cross_validate(&m, &d, &p, &plan[1..]).unwrap_err();
        assert_eq!(err.index, 0);
        assert_eq!(err.cause, "precondition does not hold");
        let err = cross_validate(&m, &d, &p, &plan[..1]).unwrap_err();
        assert_eq!(err.index, 1);
    }

    #[test]
    fn empty_plan_when_goal_holds() {
        let (mut m, _, _) = artifacts();
        m.goal = Some("s".into());
        let r = parse_rules("rules { types { is_bus. is_stop. } fluents { fuel/2. } }").unwrap();
        let d = compile_domain(&m, &r).unwrap();
        let p = compile_problem(&m, &r).unwrap();
        assert!(cross_validate(&m, &d, &p, &[]).unwrap().is_empty());
    }
}
