//! Reusability index: the fraction of a scenario's entities that are
//! structurally identical to library entries.
//!
//! Entities are counted as follows:
//! - each named state; reused when its fact set equals a library state;
//! - each transition; reused when its body equals a library transition body;
//! - each distinct `functor/arity` used by states or transitions; reused when
//!   the library vocabulary declares it;
//! - each distinct ground route fact (a fact whose functor the vocabulary
//!   marks as route vertex or route edge); reused when some library state
//!   holds it.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::library::{model_functors, TransitionLibrary, VocabularyRole};
use crate::model::Model;
use crate::term::Predicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    State,
    Transition,
    Functor,
    RouteVertex,
    RouteEdge,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub name: String,
    pub reused: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReusabilityIndex {
    pub reused: usize,
    pub total: usize,
    pub entities: Vec<Entity>,
}

impl ReusabilityIndex {
    pub fn value(&self) -> f64 {
        self.reused as f64 / self.total as f64
    }

    pub fn count(&self, kind: EntityKind) -> (usize, usize) {
        let of_kind = self.entities.iter().filter(|e| e.kind == kind);
        let total = of_kind.clone().count();
        (of_kind.filter(|e| e.reused).count(), total)
    }
}

impl fmt::Display for ReusabilityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} = {:.3}", self.reused, self.total, self.value())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReuseError {
    #[error("the scenario has no entities; the index is undefined")]
    Empty,
}

pub fn enumerate_entities(m: &Model, lib: &TransitionLibrary) -> Vec<Entity> {
    let mut out = Vec::new();
    for (name, s) in &m.states {
        out.push(Entity { kind: EntityKind::State, name: name.clone(), reused: lib.has_state(s) });
    }
    for (name, t) in &m.transitions {
        out.push(Entity { kind: EntityKind::Transition, name: name.clone(), reused: lib.has_transition_body(t) });
    }
    for (f, n) in model_functors(m) {
        let reused = lib.vocabulary.contains(&f, n);
        out.push(Entity { kind: EntityKind::Functor, name: format!("{f}/{n}"), reused });
    }
    let route: BTreeSet<(EntityKind, &Predicate)> = m
        .states
        .values()
        .flat_map(|s| s.iter())
        .filter(|p| p.is_ground())
        .filter_map(|p| match lib.vocabulary.role(&p.functor, p.arity()) {
            Some(VocabularyRole::RouteVertex) => Some((EntityKind::RouteVertex, p)),
            Some(VocabularyRole::RouteEdge) => Some((EntityKind::RouteEdge, p)),
            _ => None,
        })
        .collect();
    for (kind, p) in route {
        out.push(Entity { kind, name: p.to_string(), reused: lib.has_fact(p) });
    }
    out
}

pub fn reusability_index(m: &Model, lib: &TransitionLibrary) -> Result<ReusabilityIndex, ReuseError> {
    let entities = enumerate_entities(m, lib);
    if entities.is_empty() {
        return Err(ReuseError::Empty);
    }
    let reused = entities.iter().filter(|e| e.reused).count();
    Ok(ReusabilityIndex { reused, total: entities.len(), entities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_model;

    const LIB: &str = "vocabulary {
  at/2.
  route_vertex is_poi/1.
  route_edge next/2.
}
state map { is_poi(a). is_poi(b). next(a, b). }
transition move {
  pre { is_poi(X). is_poi(Y). at(A, X). next(X, Y). }
  action { delete(at(A, X)). add(at(A, Y)). }
}
";

    fn lib() -> TransitionLibrary {
        TransitionLibrary::from_documents(&[("l.kmf".into(), LIB.into())], "t").unwrap()
    }

    #[test]
    fn empty_scenario_is_an_error() {
        assert_eq!(reusability_index(&Model::new(), &lib()), Err(ReuseError::Empty));
    }

    #[test]
    fn library_transitions_plus_one_state() {
        let m = parse_model(
            "state s { at(x, y). }
transition go {
  pre { is_poi(X). is_poi(Y). at(A, X). next(X, Y). }
  action { delete(at(A, X)). add(at(A, Y)). }
}",
        )
        .unwrap();
        let r = reusability_index(&m, &lib()).unwrap();
        // transition and three functors reused; the state is custom.
        assert_eq!((r.reused, r.total), (4, 5), "{:?}", r.entities);
    }

    #[test]
    fn route_facts_and_states() {
        let m = parse_model("state w { is_poi(a). is_poi(c). next(a, b). at(bus, a). }").unwrap();
        let r = reusability_index(&m, &lib()).unwrap();
        assert_eq!(r.count(EntityKind::RouteVertex), (1, 2));
        assert_eq!(r.count(EntityKind::RouteEdge), (1, 1));
        assert_eq!(r.count(EntityKind::State), (0, 1));
        assert_eq!(r.count(EntityKind::Functor), (3, 3));
        let copy = parse_model("state m2 { is_poi(a). is_poi(b). next(a, b). }").unwrap();
        assert_eq!(reusability_index(&copy, &lib()).unwrap().count(EntityKind::State), (1, 1));
    }
}
