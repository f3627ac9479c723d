//! State hashing and the textual trace dump.
//!
//! A state's hash is 64-bit FNV-1a over [`State::canonical_text`], printed as
//! 16 lowercase hex digits. A dump line reads
//! `<source-hash> --<transition>{<bindings>}--> <dest-hash>`.

use std::fmt::Write;

use crate::engine::TransitionStep;
use crate::term::State;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, b| (hash ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn state_hash(state: &State) -> u64 {
    fnv1a64(state.canonical_text().as_bytes())
}

pub fn hash_hex(hash: u64) -> String {
    format!("{hash:016x}")
}

pub fn dump_step(step: &TransitionStep) -> String {
    format!(
        "{} --{}{}--> {}",
        hash_hex(state_hash(&step.source)),
        step.transition,
        step.substitution,
        hash_hex(state_hash(&step.destination))
    )
}

pub fn dump_trace<'a>(steps: impl IntoIterator<Item = &'a TransitionStep>) -> String {
    let mut out = String::new();
    for step in steps {
        let _ = writeln!(out, "{}", dump_step(step));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_predicate;
    use crate::term::{sym, Substitution, Term};

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_state_hash_is_offset_basis() {
        assert_eq!(hash_hex(state_hash(&State::new())), "cbf29ce484222325");
    }

    #[test]
    fn dump_line_shape() {
        let source: State = [parse_predicate("at(p1, bs1)").unwrap()].into_iter().collect();
        let destination: State = [parse_predicate("at(p1, b25)").unwrap()].into_iter().collect();
        let step = TransitionStep {
            source: source.clone(),
            transition: "board".into(),
            substitution: [(sym("P"), Term::lit("p1"))].into_iter().collect::<Substitution>(),
            destination: destination.clone(),
        };
        let line = dump_step(&step);
        let expected = format!(
            "{} --board{{P=p1}}--> {}",
            hash_hex(fnv1a64(b"at(p1, bs1).\n")),
            hash_hex(fnv1a64(b"at(p1, b25).\n"))
        );
        assert_eq!(line, expected);
    }
}
