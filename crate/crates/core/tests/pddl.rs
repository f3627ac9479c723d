//! PDDL compilation of the bundled scenarios.

use kbplan_core::pddl::{check_domain, check_problem, compile_domain, compile_problem, cross_validate, parse_rules, reference_solve};
use kbplan_core::{find_plan, SearchConfig};
use kbplan_testkit::corpus::{read, scenario};

const CASES: &[(&str, &str)] = &[("bus", "transport"), ("truck", "transport"), ("boarding", "boarding")];

#[test]
fn artifacts_pass_the_grammar_checker_and_are_stable() {
    for (name, rules) in CASES {
        let m = scenario(name);
        let r = parse_rules(&read(&format!("scenarios/{rules}.rules.kmf"))).unwrap();
        let domain = compile_domain(&m, &r).unwrap();
        let problem = compile_problem(&m, &r).unwrap();
        check_domain(&domain.text).unwrap_or_else(|e| panic!("{name}: {e}"));
        check_problem(&domain.text, &problem.text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(compile_domain(&m, &r).unwrap(), domain);
        assert_eq!(domain.uri, format!("/artifacts/{}", domain.hash));
    }
}

#[test]
fn reference_plans_replay_natively_with_equal_length() {
    for (name, rules) in CASES {
        let m = scenario(name);
        let r = parse_rules(&read(&format!("scenarios/{rules}.rules.kmf"))).unwrap();
        let domain = compile_domain(&m, &r).unwrap();
        let problem = compile_problem(&m, &r).unwrap();
        let actions = reference_solve(&domain.text, &problem.text, 1_000_000).unwrap().expect("pddl plan");
        let steps = cross_validate(&m, &domain, &problem, &actions).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        let native = find_plan(&m, &SearchConfig::default()).unwrap().plan().cloned().unwrap();
        assert_eq!(steps.len(), native.cost(), "{name}");
    }
}
