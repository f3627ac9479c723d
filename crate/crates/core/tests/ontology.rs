//! Taxonomy, library and reusability index on the bundled corpus.

use kbplan_core::ontology::{reusability_index, validate_against_taxonomy, EntityKind, Taxonomy, TransitionLibrary};
use kbplan_core::{State, TransitionSpec};
use kbplan_testkit::corpus::{read, repo_path, scenario, SCENARIOS};
use kbplan_testkit::gen::{random_addition, Addition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn library() -> TransitionLibrary {
    TransitionLibrary::load(&repo_path("library")).unwrap()
}

fn taxonomy() -> Taxonomy {
    Taxonomy::parse(&read("taxonomy/its.tax")).unwrap()
}

#[test]
fn library_entries_validate_against_taxonomy() {
    let lib = library();
    let report = lib.validate(&taxonomy());
    assert!(report.is_ok(), "{:?}", report.violations);
    assert_eq!(lib.transitions.len(), 3);
    assert!(lib.vocabulary.contains("next", 2));
}

#[test]
fn scenarios_validate_against_taxonomy() {
    let t = taxonomy();
    for name in SCENARIOS {
        let report = validate_against_taxonomy(&scenario(name), &t);
        assert!(report.is_ok(), "{name}: {:?}", report.violations);
    }
}

#[test]
fn misplaced_argument_is_a_violation() {
    let m = kbplan_core::parse_model(&read("scenarios/bus.kmf").replacen("at(p1, poi1)", "at(poi1, p1)", 1)).unwrap();
    assert!(!validate_against_taxonomy(&m, &taxonomy()).is_ok());
}

#[test]
fn is_a_is_reflexive_and_transitive() {
    let t = taxonomy();
    let concepts: Vec<&str> = t.concepts().collect();
    for a in &concepts {
        assert!(t.is_a(a, a));
        assert!(t.is_a(a, t.root()));
        for b in &concepts {
            for c in &concepts {
                if t.is_a(a, b) && t.is_a(b, c) {
                    assert!(t.is_a(a, c), "{a} {b} {c}");
                }
            }
        }
    }
    assert!(t.is_a("Bus", "TransportAgent"));
    assert!(!t.is_a("TransportAgent", "Bus"));
}

#[test]
fn cyclic_taxonomy_is_rejected() {
    let text = "taxonomy { concept Top. concept A is_a Top, B. concept B is_a A. }";
    assert!(Taxonomy::parse(text).is_err());
}

#[test]
fn indices_lie_in_unit_interval() {
    let lib = library();
    for name in SCENARIOS {
        let index = reusability_index(&scenario(name), &lib).unwrap();
        assert!((0.0..=1.0).contains(&index.value()), "{name}");
        let by_kind: usize = [
            EntityKind::State,
            EntityKind::Transition,
            EntityKind::Functor,
            EntityKind::RouteVertex,
            EntityKind::RouteEdge,
        ]
        .into_iter()
        .map(|k| index.count(k).1)
        .sum();
        assert_eq!(by_kind, index.total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn index_is_monotone_under_additions(seed in any::<u64>(), pick in 0usize..2) {
        let lib = library();
        let lib_states: Vec<State> = lib.states.values().cloned().collect();
        let lib_transitions: Vec<TransitionSpec> = lib.transitions.values().cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = scenario(["bus", "truck"][pick]);
        let mut before = reusability_index(&m, &lib).unwrap();
        for serial in 0..5 {
            let addition = random_addition(&mut rng, &lib_states, &lib_transitions, serial);
            addition.apply(&mut m);
            let after = reusability_index(&m, &lib).unwrap();
            prop_assert!((0.0..=1.0).contains(&after.value()));
            match addition {
                Addition::Reused(_) => prop_assert!(after.value() >= before.value(), "{} -> {}", before, after),
                Addition::Custom(_) => prop_assert!(after.value() <= before.value(), "{} -> {}", before, after),
            }
            before = after;
        }
    }
}
