// A reduced ablation run: the module block plus custom lambda and k sweeps.

use matproc::memory::{self, DEFAULT_MAX_PREFIX};
use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::retrieval::Embedders;
use matproc::runner::{ablation_table, grid, run_ablation, EvalContext, MockChatClient, PolicyConfig};
use matproc::splitter::{split, Partition, Protocol};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, TaskGenConfig};

pub fn run() -> matproc::Result<()> {
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 120, ..SynthParams::default() }, 4)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let items = generate_benchmark(&graphs, &pools, &TaskGenConfig::default())?.items;
    let assignment = split(&items, Protocol::Random, 4)?;
    let embedders = Embedders::builtin(4);
    let mem = memory::build_for_split(&graphs, &items, &assignment, "random", DEFAULT_MAX_PREFIX, &embedders)?;
    let train: Vec<_> = assignment.select(&items, Partition::Train).into_iter().cloned().collect();
    let test: Vec<_> = assignment.select(&items, Partition::Test).into_iter().cloned().collect();

    let client = MockChatClient::evidence_follower();
    let ctx = EvalContext {
        split_id: "random",
        memory: &mem,
        embedders: &embedders,
        train_items: &train,
        client: Some(&client),
    };
    let axes = ["modules".to_string(), "lambda:1,0.5,0".into(), "k:1,4,8".into()];
    let points = grid(&axes, &PolicyConfig::default())?;
    let rows = run_ablation(&points, &test, &ctx)?;
    print!("{}", ablation_table(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
