//! Access to the bundled scenarios, library and taxonomy.

use std::path::PathBuf;

use kbplan_core::print::{print_state, print_transition};
use kbplan_core::{parse_model, Model};

/// Absolute path of a file relative to the workspace root.
pub fn repo_path(relative: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(relative)
}

pub fn read(relative: &str) -> String {
    let path = repo_path(relative);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Parses `scenarios/<name>.kmf`.
pub fn scenario(name: &str) -> Model {
    let text = read(&format!("scenarios/{name}.kmf"));
    parse_model(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const SCENARIOS: &[&str] = &["bus", "truck", "boarding"];

/// Splits a model into the store's states document (headers plus states)
/// and transitions document.
pub fn split_documents(m: &Model) -> (String, String) {
    let mut states = String::new();
    for (keyword, value) in [("model", &m.name), ("initial", &m.initial), ("goal", &m.goal)] {
        if let Some(v) = value {
            states.push_str(&format!("{keyword} {v}.\n"));
        }
    }
    for (name, s) in &m.states {
        print_state(&mut states, name, s);
    }
    let mut transitions = String::new();
    for t in m.transitions.values() {
        print_transition(&mut transitions, t);
    }
    (states, transitions)
}
