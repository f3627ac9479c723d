//! Compilation of models into PDDL domain and problem documents, plus the
//! tooling that checks the output: a grammar checker, a reference executor
//! for the emitted subset and a cross-validation harness that replays PDDL
//! plans in native semantics.

pub mod check;
pub mod compile;
pub mod cross;
pub mod reference;
pub mod rules;
pub mod sexpr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use check::{check_domain, check_problem, CheckError};
pub use compile::{compile_domain, compile_problem, MappingError};
pub use cross::{cross_validate, parse_plan_output, Divergence, ExternalSolver, PlanAction, SolverError};
pub use reference::{solve as reference_solve, ReferenceError};
pub use rules::{parse_rules, TransformationRules};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    Domain,
    Problem,
}

/// A generated document. `uri` is derived from `hash`, so equal text always
/// yields the same identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PddlArtifact {
    pub kind: ArtifactKind,
    pub text: String,
    pub uri: String,
    pub hash: String,
}

impl PddlArtifact {
    pub fn new(kind: ArtifactKind, text: String) -> Self {
        let hash = content_hash(text.as_bytes());
        PddlArtifact { kind, uri: artifact_uri(&hash), text, hash }
    }
}

/// Lowercase hex SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn artifact_uri(hash: &str) -> String {
    format!("/artifacts/{hash}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uri_follows_hash() {
        let a = PddlArtifact::new(ArtifactKind::Domain, "(define)".into());
        let b = PddlArtifact::new(ArtifactKind::Domain, "(define)".into());
        assert_eq!(a, b);
        assert_eq!(a.hash.len(), 64);
        assert_eq!(a.uri, format!("/artifacts/{}", a.hash));
        assert_eq!(
            content_hash(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
