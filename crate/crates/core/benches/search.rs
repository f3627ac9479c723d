//! Breadth-first search with sequential and parallel layer expansion.

use std::fmt::Write;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kbplan_core::{find_plan, parse_model, Execution, Model, SearchConfig};

const TRANSITIONS: &str = include_str!("../../../library/transitions.kmf");

/// `buses` vehicles on a ring of `pois` stops carrying `passengers`
/// travellers half way round the ring.
fn fleet(pois: usize, buses: usize, passengers: usize) -> Model {
    let mut text = String::from("initial start. goal delivered.\nstate start {\n");
    for i in 0..pois {
        let _ = writeln!(text, "  is_poi(s{i}). next(s{i}, s{}).", (i + 1) % pois);
    }
    for b in 0..buses {
        let _ = writeln!(text, "  is_transport_agent(v{b}). at(v{b}, s{}). capacity(v{b}, 2).", b * pois / buses);
    }
    for p in 0..passengers {
        let _ = writeln!(text, "  is_transportable(p{p}). at(p{p}, s{}).", p % pois);
    }
    text.push_str("}\nstate delivered {\n");
    for p in 0..passengers {
        let _ = writeln!(text, "  at(p{p}, s{}).", (p + pois / 2) % pois);
    }
    text.push_str("}\n");
    text.push_str(TRANSITIONS);
    parse_model(&text).expect("generated fleet model parses")
}

fn bench_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("find_plan");
    group.sample_size(10);
    for (pois, buses, passengers) in [(4, 1, 2), (5, 2, 2), (6, 2, 3)] {
        let m = fleet(pois, buses, passengers);
        let label = format!("{pois}poi-{buses}bus-{passengers}pax");
        for (mode, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let config = SearchConfig { execution, ..SearchConfig::default() };
            group.bench_with_input(BenchmarkId::new(mode, &label), &m, |b, m| {
                b.iter(|| find_plan(black_box(m), &config).expect("search runs"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_search);
criterion_main!(benches);
