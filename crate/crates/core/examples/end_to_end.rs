// Synthetic corpus through every stage: compile, generate, split, build
// memory, evaluate a few policies.

use matproc::memory::{self, DEFAULT_MAX_PREFIX};
use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::retrieval::Embedders;
use matproc::runner::{evaluate, EvalContext, MockChatClient, Policy, PolicyConfig};
use matproc::splitter::{split, Partition, Protocol};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, TaskGenConfig};

pub fn run() -> matproc::Result<()> {
    let seed = 7;
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 300, ..SynthParams::default() }, seed)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let bench = generate_benchmark(&graphs, &pools, &TaskGenConfig { seed, ..TaskGenConfig::default() })?;
    println!("{} graphs, {} items", graphs.len(), bench.items.len());

    let assignment = split(&bench.items, Protocol::Random, seed)?;
    let embedders = Embedders::builtin(seed);
    let mem = memory::build_for_split(&graphs, &bench.items, &assignment, "random", DEFAULT_MAX_PREFIX, &embedders)?;
    let train: Vec<_> = assignment.select(&bench.items, Partition::Train).into_iter().cloned().collect();
    let test: Vec<_> = assignment.select(&bench.items, Partition::Test).into_iter().cloned().collect();

    let client = MockChatClient::evidence_follower();
    let ctx = EvalContext {
        split_id: "random",
        memory: &mem,
        embedders: &embedders,
        train_items: &train,
        client: Some(&client),
    };
    for policy in [Policy::Random, Policy::ArgmaxSymbolic, Policy::ArgmaxNeural, Policy::ArgmaxHybrid, Policy::ProvmindLlm, Policy::Oracle] {
        let out = evaluate(&test, &ctx, &PolicyConfig::with_policy(policy))?;
        print!("{}", out.report.to_table());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
