use flexmg::cycle::{emit_dsl, enumerate_programs, Grammar, SmootherKind, Weight};
use std::collections::BTreeSet;
use std::time::Instant;

fn main() -> flexmg::Result<()> {
    let mut grammar = Grammar::full(5, 2);
    grammar.kinds = vec![SmootherKind::GsForward];
    grammar.weights = vec![Weight::ONE];
    let t0 = Instant::now();
    let reachable: BTreeSet<String> = grammar
        .reachable_programs(4)
        .into_iter()
        .map(|steps| emit_dsl(&steps))
        .collect();
    let brute: BTreeSet<String> = enumerate_programs(
        4,
        2,
        5,
        &[SmootherKind::GsForward],
        &[Weight::ONE],
    )?
    .into_iter()
    .map(|p| p.dsl())
    .collect();
    println!(
        "reachable={} brute={} equal={} ({:.2}s)",
        reachable.len(),
        brute.len(),
        reachable == brute,
        t0.elapsed().as_secs_f64()
    );
    let only_brute: Vec<&String> = brute.difference(&reachable).take(5).collect();
    let only_reach: Vec<&String> = reachable.difference(&brute).take(5).collect();
    println!("only brute: {only_brute:?}");
    println!("only reachable: {only_reach:?}");

    // generation throughput for the 10^4 soundness check
    let grammar = Grammar::full(5, 7);
    let mut rng = flexmg::rng::stream(1, "speed");
    let t0 = Instant::now();
    let mut total_steps = 0usize;
    for _ in 0..10_000 {
        let p = flexmg::cycle::generate(&grammar, &mut rng, flexmg::cycle::GenLimits::default());
        total_steps += p.len();
    }
    println!(
        "10^4 programs in {:.2}s (avg len {:.1})",
        t0.elapsed().as_secs_f64(),
        total_steps as f64 / 10_000.0
    );
    Ok(())
}
