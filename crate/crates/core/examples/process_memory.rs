// Process memory built from the train partition only: next-step
// distributions with backoff, and step matching against the library.

use std::collections::BTreeSet;

use matproc::memory::{self, StepQuery, StepWeights, DEFAULT_MAX_PREFIX};
use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::retrieval::Embedders;
use matproc::splitter::{split, Protocol};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, TaskGenConfig};

pub fn run() -> matproc::Result<()> {
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 150, ..SynthParams::default() }, 5)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let items = generate_benchmark(&graphs, &pools, &TaskGenConfig::default())?.items;
    let assignment = split(&items, Protocol::Dual, 5)?;
    let mem = memory::build_for_split(&graphs, &items, &assignment, "dual", DEFAULT_MAX_PREFIX, &Embedders::builtin(5))?;
    println!(
        "{} train processes, {} steps, {} transitions, corpus {}",
        mem.processes.len(),
        mem.step_library.len(),
        mem.transition_total(),
        &mem.corpus_hash[..12]
    );

    let route = mem.processes[0].activities.clone();
    for cut in 1..route.len().min(4) {
        let dist = mem.next_distribution(&route[..cut]);
        let mut top: Vec<_> = dist.probs.iter().collect();
        top.sort_by(|a, b| b.1.total_cmp(a.1));
        println!("after {:?} [{:?}]: {:?}", &route[..cut], dist.backoff, &top[..top.len().min(3)]);
    }
    // A prefix never seen in train falls back to the unigram distribution.
    let unseen = mem.next_distribution(&["levitate".to_string()]);
    println!("unseen prefix -> {:?}", unseen.backoff);

    let query = StepQuery {
        label: None,
        prev: Some(route[0].clone()),
        next: route.get(2).cloned(),
        normalized_position: Some(0.5),
        input_forms: BTreeSet::new(),
    };
    for (score, step) in mem.match_steps(&query, 5, &StepWeights::default())? {
        println!("{score:.3} {} #{} {} {:?}", step.graph_id, step.position, step.label, step.conditions);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
