// Seeded synthetic corpus turned into seven multiple-choice tasks, one
// rendered question per task, then validated against the source graphs.

use std::collections::BTreeMap;

use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, render_options, render_question, validate_all, TaskGenConfig};

pub fn run() -> matproc::Result<()> {
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 120, ..SynthParams::default() }, 3)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let bench = generate_benchmark(&graphs, &pools, &TaskGenConfig { seed: 3, ..TaskGenConfig::default() })?;

    let mut first = BTreeMap::new();
    for item in &bench.items {
        first.entry(item.task).or_insert(item);
    }
    for (task, item) in first {
        println!("== {} ({}) ==", task.name(), item.item_id);
        println!("{}", render_question(item));
        println!("{}", render_options(item));
        println!("gold: {}\n", item.gold());
    }

    let report = validate_all(&bench.items, &graphs);
    println!("{} items, {} valid, {} skipped", report.checked, report.valid, bench.skipped.len());
    assert_eq!(report.checked, report.valid);
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
