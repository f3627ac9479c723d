//! Parser and canonical printer.

use kbplan_core::{parse_model, print_canonical};
use kbplan_testkit::gen::fuzz_model;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_print_round_trip(seed in any::<u64>()) {
        let m = fuzz_model(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = print_canonical(&m);
        let parsed = parse_model(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&parsed, &m);
        prop_assert_eq!(print_canonical(&parsed), text);
    }
}

#[test]
fn predicate_order_does_not_change_text() {
    let a = parse_model("state s { at(p1, bs1). is_bus(b25). capacity(b25, 23). }").unwrap();
    let b = parse_model("state s {\n  capacity(b25, 23).\n  at(p1, bs1). is_bus(b25). at(p1, bs1).\n}").unwrap();
    assert_eq!(print_canonical(&a), print_canonical(&b));
}

#[test]
fn nested_terms_print_verbatim() {
    let m = parse_model("state s { velocity(car, kmh(50)). }").unwrap();
    assert!(print_canonical(&m).contains("velocity(car, kmh(50))."));
}

#[test]
fn non_action_functor_in_action_block_is_rejected() {
    let err = parse_model("transition t { action { insert(p). } }").unwrap_err();
    assert_eq!(err.pos.line, 1);
}
