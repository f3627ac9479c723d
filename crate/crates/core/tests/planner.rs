//! Planner on the bundled scenarios against the BFS oracle.

use kbplan_core::planner::{search, validate_steps, FailureKind, PlanDocument, ValidationCause};
use kbplan_core::trace::dump_trace;
use kbplan_core::{find_plan, parse_model, validate_plan, Execution, Predicate, SearchConfig, State, Term};
use kbplan_testkit::corpus::{scenario, SCENARIOS};
use kbplan_testkit::gen::{small_model, small_state, Limits};
use kbplan_testkit::oracle::{bfs_plan_length, reachable_count};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(execution: Execution) -> SearchConfig {
    SearchConfig { bound: 100_000, execution }
}

#[test]
fn scenario_plans_are_optimal_and_valid() {
    for name in SCENARIOS {
        let m = scenario(name);
        let initial = m.initial_state().unwrap();
        let goal = m.goal_state().unwrap();
        let ts = m.transition_list();
        assert!(reachable_count(initial, &ts, 100_000).is_some(), "{name} state space too large");
        let expected = bfs_plan_length(initial, goal, &ts, 100_000).expect("oracle finds a plan");
        let plan = find_plan(&m, &config(Execution::Parallel)).unwrap().plan().cloned().expect("plan");
        assert_eq!(plan.cost(), expected, "{name}");
        validate_plan(&m, &plan).unwrap();
    }
}

#[test]
fn execution_modes_give_identical_traces() {
    for name in SCENARIOS {
        let m = scenario(name);
        let seq = find_plan(&m, &config(Execution::Sequential)).unwrap();
        let par = find_plan(&m, &config(Execution::Parallel)).unwrap();
        assert_eq!(seq, par, "{name}");
        let again = find_plan(&m, &config(Execution::Parallel)).unwrap();
        assert_eq!(dump_trace(&par.plan().unwrap().steps), dump_trace(&again.plan().unwrap().steps));
    }
}

#[test]
fn tampered_destination_is_reported() {
    let m = scenario("bus");
    let mut plan = find_plan(&m, &SearchConfig::default()).unwrap().plan().cloned().unwrap();
    let k = 2;
    plan.steps[k].destination.insert(Predicate::new("tampered", vec![]));
    let err = validate_plan(&m, &plan).unwrap_err();
    assert_eq!((err.step, err.cause), (k, ValidationCause::DestinationMismatch));
}

#[test]
fn document_round_trip() {
    let m = scenario("truck");
    let outcome = find_plan(&m, &SearchConfig::default()).unwrap();
    let doc = PlanDocument::from_outcome(m.initial_state().unwrap(), &outcome);
    let back: PlanDocument = serde_json::from_str(&doc.to_json()).unwrap();
    let plan = kbplan_core::planner::plan_from_document(&m, &back).unwrap();
    assert_eq!(&plan, outcome.plan().unwrap());
}

#[test]
fn boarding_step_matches_goal_state() {
    let m = scenario("boarding");
    let plan = find_plan(&m, &SearchConfig::default()).unwrap().plan().cloned().unwrap();
    assert_eq!(plan.cost(), 1);
    assert_eq!(&plan.steps[0].destination, m.goal_state().unwrap());
    let c2 = plan.steps[0].substitution.get("C2").cloned();
    assert_eq!(c2, Some(Term::num(22)));
}

#[test]
fn boarding_computation_filters() {
    let text = kbplan_testkit::corpus::read("scenarios/boarding.kmf");
    for (from, to) in [("waiting(p1, min(2))", "waiting(p1, min(20))"), ("capacity(b25, 23)", "capacity(b25, 0)")] {
        let m = parse_model(&text.replacen(from, to, 1)).unwrap();
        let steps = kbplan_core::successors(m.initial_state().unwrap(), m.transitions.values()).unwrap();
        assert!(steps.is_empty(), "{to}");
    }
    let m = parse_model(&text.replacen("min(2)", "min(19)", 1)).unwrap();
    assert_eq!(kbplan_core::successors(m.initial_state().unwrap(), m.transitions.values()).unwrap().len(), 1);
}

#[test]
fn unreachable_goal_reports_unsatisfied_predicates() {
    let m = parse_model(
        "initial s. goal g.
state s { at(a). e(a, b). }
state g { at(c). }
transition go { pre { at(X). e(X, Y). } action { delete(at(X)). add(at(Y)). } }",
    )
    .unwrap();
    let failure = match find_plan(&m, &SearchConfig::default()).unwrap() {
        kbplan_core::PlanOutcome::Failed(f) => f,
        other => panic!("{other:?}"),
    };
    assert_eq!(failure.kind, FailureKind::FrontierExhausted);
    assert_eq!(failure.unsatisfied, vec![Predicate::new("at", vec![Term::lit("c")])]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_models_agree_with_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng, Limits::default());
        let goal: State = small_state(&mut rng, 2);
        let initial = &m.states["s0"];
        let ts = m.transition_list();
        let Some(_) = reachable_count(initial, &ts, 2_000) else { return Ok(()); };
        let expected = bfs_plan_length(initial, &goal, &ts, 2_000);
        for execution in [Execution::Sequential, Execution::Parallel] {
            let outcome = search(initial, &goal, &ts, &SearchConfig { bound: 10_000, execution }).unwrap();
            match (&outcome, expected) {
                (kbplan_core::PlanOutcome::Found(plan), Some(n)) => {
                    prop_assert_eq!(plan.cost(), n);
                    validate_steps(initial, &goal, &m.transitions, &plan.steps).unwrap();
                }
                (kbplan_core::PlanOutcome::Failed(f), None) => {
                    prop_assert_eq!(f.kind, FailureKind::FrontierExhausted);
                    prop_assert!(!f.unsatisfied.is_empty());
                }
                _ => prop_assert!(false, "planner {:?} vs oracle {:?}", outcome.plan().map(|p| p.cost()), expected),
            }
        }
    }
}
