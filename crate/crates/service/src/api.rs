//! Transport-independent request handling for the HTTP API.
//!
//! Status codes: 404 unknown model, run or artifact; 409 model incomplete
//! for the requested operation or run in the wrong status; 422 invalid
//! document or request body. User input never yields 500.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use kbplan_core::model::ModelError;
use kbplan_core::pddl::{artifact_uri, compile_domain, compile_problem, MappingError};
use kbplan_core::planner::{PlanDocument, PlanError, SearchConfig};
use kbplan_core::runtime::{answer, ExpertiseTable, QueryError, QueryPayload, RunError, RunState, RunStatus};
use kbplan_core::syntax::parse_predicate;
use kbplan_core::trace::{hash_hex, state_hash};
use kbplan_core::{find_plan, Predicate};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::{DocumentKind, Store, StoreError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl Response {
    fn json(status: u16, value: &impl Serialize) -> Self {
        let mut body = serde_json::to_vec_pretty(value).expect("responses serialize");
        body.push(b'\n');
        Response { status, content_type: "application/json", body }
    }

    fn text(status: u16, body: Vec<u8>) -> Self {
        Response { status, content_type: "text/plain; charset=utf-8", body }
    }

    fn error(status: u16, message: impl Into<String>) -> Self {
        Response::json(status, &json!({ "error": message.into() }))
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn body_json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or(Value::Null)
    }
}

fn store_error(e: StoreError) -> Response {
    match &e {
        StoreError::Invalid { error, .. } => Response::json(
            422,
            &json!({ "error": e.to_string(), "line": error.pos.line, "column": error.pos.col }),
        ),
        StoreError::Rejected(_) | StoreError::BadName(_) => Response::error(422, e.to_string()),
        StoreError::UnknownModel(_) => Response::error(404, e.to_string()),
        StoreError::Incomplete { .. } => Response::error(409, e.to_string()),
        StoreError::Io(_) => Response::error(500, e.to_string()),
    }
}

fn plan_error(e: PlanError) -> Response {
    match e {
        PlanError::Model(ModelError::Missing(_)) => Response::error(409, e.to_string()),
        _ => Response::error(422, e.to_string()),
    }
}

fn run_error(e: RunError) -> Response {
    match e {
        RunError::WrongStatus { .. } => Response::error(409, e.to_string()),
        RunError::Plan(p) => plan_error(p),
        _ => Response::error(422, e.to_string()),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchRequest {
    bound: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunRequest {
    model: String,
    bound: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbRequest {
    #[serde(default)]
    add: Vec<String>,
    #[serde(default)]
    delete: Vec<String>,
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(body: &[u8]) -> Result<T, Response> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| Response::error(422, format!("invalid request body: {e}")))
}

fn parse_json_required<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| Response::error(422, format!("invalid request body: {e}")))
}

fn search_config(bound: Option<usize>) -> Result<SearchConfig, Response> {
    match bound {
        Some(0) => Err(Response::error(422, "bound must be at least 1")),
        Some(b) => Ok(SearchConfig::with_bound(b)),
        None => Ok(SearchConfig::default()),
    }
}

/// Domain and problem artifacts of one compilation, as stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PddlUris {
    pub domain_uri: String,
    pub problem_uri: String,
}

pub struct Api {
    store: Store,
    expertise: ExpertiseTable,
    runs: Mutex<HashMap<String, Arc<Mutex<RunState>>>>,
    next_run: AtomicU64,
}

fn run_summary(run: &RunState) -> Value {
    json!({
        "id": run.id,
        "status": run.status(),
        "world": hash_hex(state_hash(run.world())),
        "facts": run.world().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "executed_steps": run.executed_steps(),
        "remaining_plan": run
            .remaining_plan()
            .map(|s| format!("{}{}", s.transition, s.substitution))
            .collect::<Vec<_>>(),
        "unsatisfied": run.diagnosis().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "events": run.events().len(),
    })
}

impl Api {
    pub fn new(store: Store, expertise: ExpertiseTable) -> Self {
        Api { store, expertise, runs: Mutex::new(HashMap::new()), next_run: AtomicU64::new(1) }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn handle(&self, method: &str, path: &str, body: &[u8]) -> Response {
        let path = path.split('?').next().unwrap_or_default();
        let segments: Vec<&str> = path.trim_matches('/').split('/').filter(|s| !s.is_empty()).collect();
        let result = match (method, segments.as_slice()) {
            ("PUT", ["models", name, kind]) => match DocumentKind::parse(kind) {
                Some(kind) => self.put_document(name, kind, body),
                None => Err(Response::error(404, format!("unknown document kind `{kind}`"))),
            },
            ("GET", ["models", name]) => self.get_model(name),
            ("GET", ["models", name, kind]) => self.get_document(name, kind),
            ("POST", ["models", name, "pddl"]) => self.pddl(name).map(|uris| Response::json(200, &uris)),
            ("POST", ["models", name, "plan"]) => self.plan(name, body),
            ("POST", ["models", name, "query"]) => self.query(name, body),
            ("GET", ["artifacts", hash]) => self.artifact(hash),
            ("POST", ["runs"]) => self.start_run(body),
            ("GET", ["runs", id]) => self.with_run(id, |run| Ok(Response::json(200, &run_summary(run)))),
            ("GET", ["runs", id, "log"]) => self.with_run(id, |run| Ok(Response::text(200, run.log_text().into_bytes()))),
            ("POST", ["runs", id, "step"]) => self.with_run(id, step_run),
            ("POST", ["runs", id, "perturb"]) => {
                let request: PerturbRequest = match parse_json_required(body) {
                    Ok(r) => r,
                    Err(resp) => return resp,
                };
                self.with_run(id, |run| perturb_run(run, &request))
            }
            (_, ["models", ..] | ["artifacts", ..] | ["runs", ..]) => {
                Err(Response::error(405, format!("method {method} is not supported on {path}")))
            }
            _ => Err(Response::error(404, format!("no route for {path}"))),
        };
        result.unwrap_or_else(|resp| resp)
    }

    fn put_document(&self, name: &str, kind: DocumentKind, body: &[u8]) -> Result<Response, Response> {
        let text = std::str::from_utf8(body).map_err(|_| Response::error(422, "document is not UTF-8"))?;
        let rev = self.store.put_document(name, kind, text).map_err(store_error)?;
        Ok(Response::json(if rev.created { 201 } else { 200 }, &rev))
    }

    fn get_model(&self, name: &str) -> Result<Response, Response> {
        let revisions = self.store.revisions(name).ok_or_else(|| Response::error(404, format!("unknown model `{name}`")))?;
        Ok(Response::json(200, &json!({ "model": name, "documents": revisions })))
    }

    fn get_document(&self, name: &str, kind: &str) -> Result<Response, Response> {
        let kind = DocumentKind::parse(kind).ok_or_else(|| Response::error(404, format!("unknown document kind `{kind}`")))?;
        let text = self
            .store
            .get_document(name, kind)
            .ok_or_else(|| Response::error(404, format!("model `{name}` has no {} document", kind.as_str())))?;
        Ok(Response::text(200, text.into_bytes()))
    }

    /// Compiles the stored model and stores both artifacts.
    pub fn pddl(&self, name: &str) -> Result<PddlUris, Response> {
        let model = self.store.model(name).map_err(store_error)?;
        let rules = self.store.rules(name).map_err(store_error)?;
        let mapping = |e: MappingError| Response::error(422, e.to_string());
        let domain = compile_domain(&model, &rules).map_err(mapping)?;
        let problem = compile_problem(&model, &rules).map_err(mapping)?;
        let mut uris = Vec::new();
        for artifact in [&domain, &problem] {
            let hash = self.store.put_artifact(artifact.text.as_bytes()).map_err(store_error)?;
            uris.push(artifact_uri(&hash));
        }
        Ok(PddlUris { problem_uri: uris.pop().expect("two artifacts"), domain_uri: uris.pop().expect("two artifacts") })
    }

    fn plan(&self, name: &str, body: &[u8]) -> Result<Response, Response> {
        let request: SearchRequest = parse_json(body)?;
        let config = search_config(request.bound)?;
        let model = self.store.model(name).map_err(store_error)?;
        let outcome = find_plan(&model, &config).map_err(plan_error)?;
        let initial = model.initial_state().map_err(|e| plan_error(e.into()))?;
        let doc = PlanDocument::from_outcome(initial, &outcome);
        let mut body = doc.to_json().into_bytes();
        body.push(b'\n');
        Ok(Response { status: 200, content_type: "application/json", body })
    }

    fn query(&self, name: &str, body: &[u8]) -> Result<Response, Response> {
        let payload: QueryPayload = parse_json_required(body)?;
        let model = self.store.model(name).map_err(store_error)?;
        let q = kbplan_core::runtime::Query { model: name.to_string(), payload };
        match answer(&q, &model, &self.expertise) {
            Ok(a) => Ok(Response::json(200, &a)),
            Err(QueryError::Plan(e)) => Err(plan_error(e)),
            Err(e) => Err(Response::error(422, e.to_string())),
        }
    }

    fn artifact(&self, hash: &str) -> Result<Response, Response> {
        let bytes = self.store.get_artifact(hash).ok_or_else(|| Response::error(404, format!("unknown artifact `{hash}`")))?;
        Ok(Response::text(200, bytes))
    }

    fn start_run(&self, body: &[u8]) -> Result<Response, Response> {
        let request: RunRequest = parse_json_required(body)?;
        let config = search_config(request.bound)?;
        let model = self.store.model(&request.model).map_err(store_error)?;
        let id = format!("run-{}", self.next_run.fetch_add(1, Ordering::Relaxed));
        let run = RunState::start(&id, &model, config).map_err(run_error)?;
        let summary = run_summary(&run);
        self.runs.lock().expect("run table poisoned").insert(id, Arc::new(Mutex::new(run)));
        Ok(Response::json(201, &summary))
    }

    /// Runs `f` with exclusive ownership of one run.
    fn with_run(&self, id: &str, f: impl FnOnce(&mut RunState) -> Result<Response, Response>) -> Result<Response, Response> {
        let run = self
            .runs
            .lock()
            .expect("run table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Response::error(404, format!("unknown run `{id}`")))?;
        let mut guard = run.lock().expect("run poisoned");
        f(&mut guard)
    }
}

fn step_run(run: &mut RunState) -> Result<Response, Response> {
    match run.status() {
        RunStatus::Running => {
            run.execute().map_err(run_error)?;
        }
        RunStatus::Replanning => {
            run.replan().map_err(run_error)?;
        }
        status => return Err(Response::error(409, format!("run is {status}"))),
    }
    Ok(Response::json(200, &run_summary(run)))
}

fn perturb_run(run: &mut RunState, request: &PerturbRequest) -> Result<Response, Response> {
    let parse = |texts: &[String]| -> Result<Vec<Predicate>, Response> {
        texts
            .iter()
            .map(|t| parse_predicate(t).map_err(|e| Response::error(422, format!("`{t}`: {}", e.message))))
            .collect()
    };
    let add = parse(&request.add)?;
    let delete = parse(&request.delete)?;
    run.perturb(&add, &delete).map_err(run_error)?;
    Ok(Response::json(200, &run_summary(run)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn api() -> (tempfile::TempDir, Api) {
        let dir = tempfile::tempdir().unwrap();
        let api = Api::new(Store::open(dir.path()).unwrap(), ExpertiseTable::default());
        (dir, api)
    }

    #[test]
    fn routing_and_status_codes() {
        let (_d, api) = api();
        assert_eq!(api.handle("GET", "/nowhere", b"").status, 404);
        assert_eq!(api.handle("DELETE", "/models/x", b"").status, 405);
        assert_eq!(api.handle("POST", "/models/x/pddl", b"").status, 404);
        assert_eq!(api.handle("PUT", "/models/x/states", b"state s {").status, 422);
        assert_eq!(api.handle("PUT", "/models/x/states", b"initial s. goal s. state s { a. }").status, 201);
        assert_eq!(api.handle("PUT", "/models/x/states", b"initial s. goal s. state s { a. }").status, 200);
        assert_eq!(api.handle("POST", "/models/x/pddl", b"").status, 409);
        assert_eq!(api.handle("GET", "/artifacts/00", b"").status, 404);
        assert_eq!(api.handle("GET", "/runs/run-9", b"").status, 404);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let (_d, api) = api();
        let r = api.handle("PUT", "/models/x/states", b"state s {\n  a(.\n}");
        assert_eq!(r.status, 422);
        assert_eq!(r.body_json()["line"], 2);
    }
}
