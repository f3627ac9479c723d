//! Engine semantics against the brute-force oracle.

use kbplan_core::{match_precondition, successors, State, Term};
use kbplan_testkit::gen::{small_model, small_state, small_transition, Limits};
use kbplan_testkit::oracle::{brute_force_matches, brute_force_successors, OracleStep};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn engine_steps(state: &State, m: &kbplan_core::Model) -> Vec<OracleStep> {
    successors(state, m.transitions.values())
        .expect("generated models are well formed")
        .into_iter()
        .map(|s| OracleStep {
            transition: s.transition,
            bindings: s.substitution.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            destination: s.destination,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn successors_equal_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng, Limits::default());
        let s0 = &m.states["s0"];
        let mut got = engine_steps(s0, &m);
        let before = got.len();
        got.sort();
        got.dedup();
        prop_assert_eq!(got.len(), before, "engine produced duplicate steps");
        let expected: Vec<OracleStep> = brute_force_successors(s0, m.transitions.values()).into_iter().collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn matches_are_sound_complete_and_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = small_state(&mut rng, 6);
        let t = small_transition(&mut rng, "t", &s, 4);
        let found = match_precondition(&t.precondition, &s);
        for sigma in &found {
            for p in &t.precondition {
                let q = sigma.apply_predicate(p);
                prop_assert!(s.contains(&q));
                prop_assert_eq!(sigma.apply_predicate(&q), q);
            }
        }
        let mut got: Vec<Vec<(String, Term)>> =
            found.iter().map(|b| b.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()).collect();
        got.sort();
        let mut expected: Vec<Vec<(String, Term)>> =
            brute_force_matches(&t.precondition, &s).into_iter().map(|b| b.into_iter().collect()).collect();
        expected.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn frame_and_effect_postconditions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng, Limits::default());
        let s0 = &m.states["s0"];
        let before = s0.clone();
        for step in successors(s0, m.transitions.values()).unwrap() {
            let t = &m.transitions[&step.transition];
            let touched: Vec<_> = t.action.iter().map(|a| step.substitution.apply_predicate(&a.predicate)).collect();
            for p in s0.iter().filter(|p| !touched.contains(p)) {
                prop_assert!(step.destination.contains(p));
            }
            for (i, a) in t.action.iter().enumerate() {
                let p = &touched[i];
                if touched[i + 1..].contains(p) {
                    continue;
                }
                let present = step.destination.contains(p);
                prop_assert_eq!(present, a.kind == kbplan_core::ActionKind::Add);
            }
            prop_assert!(step.destination.is_ground());
        }
        prop_assert_eq!(s0, &before);
    }

    #[test]
    fn state_equality_ignores_order_and_duplicates(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = small_state(&mut rng, 6);
        let mut facts: Vec<_> = s.iter().cloned().collect();
        facts.reverse();
        facts.extend(s.iter().cloned());
        let rebuilt: State = facts.into_iter().collect();
        prop_assert_eq!(rebuilt.canonical_text(), s.canonical_text());
        prop_assert_eq!(rebuilt, s);
    }
}

#[test]
fn action_order_is_a_fold() {
    let m = kbplan_core::parse_model(
        "state s { p. }
transition del_add { action { delete(p). add(p). } }
transition add_del { action { add(p). delete(p). } }",
    )
    .unwrap();
    let steps = successors(&m.states["s"], m.transitions.values()).unwrap();
    let by_name = |n: &str| steps.iter().find(|s| s.transition == n).unwrap();
    assert!(by_name("del_add").destination.contains(&kbplan_core::Predicate::new("p", vec![])));
    assert!(by_name("add_del").destination.is_empty());
}

#[test]
fn generated_models_exercise_nonempty_successor_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut nonempty, mut computed) = (0, 0);
    for _ in 0..200 {
        let m = small_model(&mut rng, Limits::default());
        let steps = brute_force_successors(&m.states["s0"], m.transitions.values());
        nonempty += usize::from(!steps.is_empty());
        computed += usize::from(steps.iter().any(|s| s.bindings.iter().any(|(k, _)| k.starts_with('R'))));
    }
    assert!(nonempty >= 60, "{nonempty}");
    assert!(computed >= 15, "{computed}");
}
