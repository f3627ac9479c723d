//! Canonical printer for models.
//!
//! Output is fully determined by model content: states and transitions come
//! out in name order, state and precondition predicates in canonical
//! predicate order, and computations and actions in their listed order.
//! `parse_model(&print_canonical(m))` reproduces `m`.

use std::fmt::Write;

use crate::model::Model;
use crate::term::{State, TransitionSpec};

pub fn print_canonical(m: &Model) -> String {
    let mut out = String::new();
    let mut header = false;
    for (keyword, value) in [("model", &m.name), ("initial", &m.initial), ("goal", &m.goal)] {
        if let Some(v) = value {
            let _ = writeln!(out, "{keyword} {v}.");
            header = true;
        }
    }
    let mut first = !header;
    for (name, state) in &m.states {
        if !first {
            out.push('\n');
        }
        first = false;
        print_state(&mut out, name, state);
    }
    for t in m.transitions.values() {
        if !first {
            out.push('\n');
        }
        first = false;
        print_transition(&mut out, t);
    }
    out
}

pub fn print_state(out: &mut String, name: &str, state: &State) {
    if state.is_empty() {
        let _ = writeln!(out, "state {name} {{ }}");
        return;
    }
    let _ = writeln!(out, "state {name} {{");
    for p in state {
        let _ = writeln!(out, "  {p}.");
    }
    out.push_str("}\n");
}

pub fn print_transition(out: &mut String, t: &TransitionSpec) {
    let _ = writeln!(out, "transition {} {{", t.name);
    section(out, "pre", t.precondition.iter().map(|p| p.to_string()));
    section(out, "compute", t.computation.iter().map(|c| c.to_string()));
    section(out, "action", t.action.iter().map(|a| a.to_string()));
    out.push_str("}\n");
}

fn section(out: &mut String, keyword: &str, items: impl ExactSizeIterator<Item = String>) {
    if items.len() == 0 {
        let _ = writeln!(out, "  {keyword} {{ }}");
        return;
    }
    let _ = writeln!(out, "  {keyword} {{");
    for item in items {
        let _ = writeln!(out, "    {item}.");
    }
    out.push_str("  }\n");
}
