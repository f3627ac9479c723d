//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (no plan, violations, failed
//! run, unmappable model), 2 usage, I/O or parse error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use kbplan_core::ontology::{reusability_index, validate_against_taxonomy, Taxonomy, TransitionLibrary};
use kbplan_core::par::Execution;
use kbplan_core::pddl::{compile_domain, compile_problem, parse_rules};
use kbplan_core::planner::{PlanDocument, SearchConfig, DEFAULT_BOUND};
use kbplan_core::runtime::{drive, ExpertiseTable, PerturbationScript, RunState, RunStatus};
use kbplan_core::trace::dump_trace;
use kbplan_core::{find_plan, parse_model, print_canonical, Model, ParseError, PlanOutcome};

use crate::api::Api;
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "kbplan", version, about = "Plan over predicate state/transition models and compile them to PDDL")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a model and print its canonical form.
    Parse { file: PathBuf },
    /// Check a model against a concept taxonomy.
    Validate {
        file: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
    },
    /// Search for a shortest plan and print it as JSON.
    Plan {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: usize,
        /// Print the step trace to stderr.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        sequential: bool,
    },
    /// Compile a model to PDDL domain and problem files.
    GenPddl {
        file: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        /// Directory for domain.pddl and problem.pddl; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a plan against scripted perturbations, printing the event log.
    Exec {
        file: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: usize,
        #[arg(long, default_value_t = 10_000)]
        max_operations: usize,
    },
    /// Compute the reusability index against a transition library.
    Metrics {
        file: PathBuf,
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API (address from KBPLAN_ADDR).
    Serve {
        #[arg(long, default_value = "kbplan-store")]
        store: PathBuf,
        #[arg(long)]
        expertise: Option<PathBuf>,
    },
}

/// Failure carrying its exit code.
struct Exit(i32, String);

fn usage(message: impl Into<String>) -> Exit {
    Exit(2, message.into())
}

fn read(path: &Path) -> Result<String, Exit> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_diag(path: &Path, e: &ParseError) -> Exit {
    usage(format!("{}:{}:{}: {}", path.display(), e.pos.line, e.pos.col, e.message))
}

fn load_model(path: &Path) -> Result<Model, Exit> {
    parse_model(&read(path)?).map_err(|e| parse_diag(path, &e))
}

fn bound_config(bound: usize, sequential: bool) -> Result<SearchConfig, Exit> {
    if bound == 0 {
        return Err(usage("--bound must be at least 1"));
    }
    let execution = if sequential { Execution::Sequential } else { Execution::Parallel };
    Ok(SearchConfig { bound, execution })
}

/// Runs the CLI; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(Exit(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn io_err(e: std::io::Error) -> Exit {
    usage(e.to_string())
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Exit> {
    match command {
        Command::Parse { file } => {
            let m = load_model(&file)?;
            out.write_all(print_canonical(&m).as_bytes()).map_err(io_err)
        }
        Command::Validate { file, taxonomy } => {
            let m = load_model(&file)?;
            let t = Taxonomy::parse(&read(&taxonomy)?).map_err(|e| usage(format!("{}: {e}", taxonomy.display())))?;
            let report = validate_against_taxonomy(&m, &t);
            for w in &report.warnings {
                writeln!(out, "warning: {w}").map_err(io_err)?;
            }
            for v in &report.violations {
                writeln!(out, "violation: {v}").map_err(io_err)?;
            }
            if report.is_ok() {
                writeln!(out, "ok").map_err(io_err)?;
                Ok(())
            } else {
                Err(Exit(1, format!("{} taxonomy violation(s)", report.violations.len())))
            }
        }
        Command::Plan { file, bound, trace, sequential } => {
            let m = load_model(&file)?;
            let config = bound_config(bound, sequential)?;
            let outcome = find_plan(&m, &config).map_err(|e| usage(e.to_string()))?;
            let initial = m.initial_state().map_err(|e| usage(e.to_string()))?;
            let doc = PlanDocument::from_outcome(initial, &outcome);
            writeln!(out, "{}", doc.to_json()).map_err(io_err)?;
            match outcome {
                PlanOutcome::Found(plan) => {
                    if trace {
                        err.write_all(dump_trace(&plan.steps).as_bytes()).map_err(io_err)?;
                    }
                    Ok(())
                }
                PlanOutcome::Failed(_) => Err(Exit(1, "no plan found".into())),
            }
        }
        Command::GenPddl { file, rules, out: dir } => {
            let m = load_model(&file)?;
            let r = parse_rules(&read(&rules)?).map_err(|e| parse_diag(&rules, &e))?;
            let domain = compile_domain(&m, &r).map_err(|e| Exit(1, e.to_string()))?;
            let problem = compile_problem(&m, &r).map_err(|e| Exit(1, e.to_string()))?;
            match dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(io_err)?;
                    std::fs::write(dir.join("domain.pddl"), &domain.text).map_err(io_err)?;
                    std::fs::write(dir.join("problem.pddl"), &problem.text).map_err(io_err)?;
                    writeln!(out, "{}\n{}", domain.uri, problem.uri).map_err(io_err)
                }
                None => write!(out, "{}\n{}", domain.text, problem.text).map_err(io_err),
            }
        }
        Command::Exec { file, script, bound, max_operations } => {
            let m = load_model(&file)?;
            let script = match script {
                Some(path) => PerturbationScript::parse(&read(&path)?).map_err(|e| parse_diag(&path, &e))?,
                None => PerturbationScript::default(),
            };
            let config = bound_config(bound, false)?;
            let mut run = RunState::start("run-1", &m, config).map_err(|e| usage(e.to_string()))?;
            let report = drive(&mut run, &script, max_operations).map_err(|e| usage(e.to_string()))?;
            out.write_all(run.log_text().as_bytes()).map_err(io_err)?;
            match report.status {
                RunStatus::Done => Ok(()),
                RunStatus::Failed => {
                    let missing: Vec<String> = run.diagnosis().iter().map(ToString::to_string).collect();
                    Err(Exit(1, format!("run failed; unsatisfied goals: {}", missing.join(", "))))
                }
                status => Err(Exit(1, format!("run stopped after {max_operations} operations while {status}"))),
            }
        }
        Command::Metrics { file, library, json } => {
            let m = load_model(&file)?;
            let lib = TransitionLibrary::load(&library).map_err(|e| usage(e.to_string()))?;
            let index = reusability_index(&m, &lib).map_err(|e| Exit(1, e.to_string()))?;
            if json {
                let text = serde_json::to_string_pretty(&index).expect("index serializes");
                writeln!(out, "{text}").map_err(io_err)
            } else {
                for e in &index.entities {
                    let mark = if e.reused { "reused" } else { "custom" };
                    let kind = serde_json::to_value(e.kind).expect("kind serializes");
                    writeln!(out, "{mark:<7}{:<13}{}", kind.as_str().unwrap_or_default(), e.name).map_err(io_err)?;
                }
                writeln!(out, "index {index}").map_err(io_err)
            }
        }
        Command::Serve { store, expertise } => {
            let table = match expertise {
                Some(path) => ExpertiseTable::from_toml(&read(&path)?).map_err(|e| usage(e.to_string()))?,
                None => ExpertiseTable::default(),
            };
            let store = Store::open(&store).map_err(|e| usage(e.to_string()))?;
            let addr = crate::http::listen_addr().map_err(usage)?;
            let api = Arc::new(Api::new(store, table));
            let runtime = tokio::runtime::Runtime::new().map_err(io_err)?;
            runtime.block_on(crate::http::serve(api, addr)).map_err(io_err)
        }
    }
}
