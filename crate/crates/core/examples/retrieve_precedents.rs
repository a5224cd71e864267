// Hybrid precedent retrieval for one test question: text, structure and
// heuristic similarities, then the same query under single-view weights.

use matproc::memory::{self, DEFAULT_MAX_PREFIX};
use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::retrieval::{retrieve, Embedders, QueryProcess, RetrievalWeights, DEFAULT_K};
use matproc::splitter::{split, Partition, Protocol};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, render_question, TaskGenConfig, TaskKind};

pub fn run() -> matproc::Result<()> {
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 150, ..SynthParams::default() }, 9)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let items = generate_benchmark(&graphs, &pools, &TaskGenConfig::default())?.items;
    let assignment = split(&items, Protocol::Random, 9)?;
    let embedders = Embedders::builtin(9);
    let mem = memory::build_for_split(&graphs, &items, &assignment, "random", DEFAULT_MAX_PREFIX, &embedders)?;

    let item = assignment
        .select(&items, Partition::Test)
        .into_iter()
        .find(|i| i.task == TaskKind::A3NextActivity)
        .expect("a next-activity question in test");
    println!("{}\n", render_question(item));

    let query = QueryProcess::from_item(item);
    println!("query text: {}", query.text);
    let embedded = query.embed(&embedders)?;
    println!("{:<12} {:>6} {:>6} {:>6} {:>6}", "graph", "text", "struct", "heur", "s_ret");
    for p in retrieve(&embedded, &mem, &RetrievalWeights::default(), DEFAULT_K)? {
        println!("{:<12} {:>6.3} {:>6.3} {:>6.3} {:>6.3}", p.graph_id, p.s_text, p.s_struct, p.s_heur, p.s_ret);
    }

    for (name, w) in [
        ("text only", RetrievalWeights::views(true, false, false)?),
        ("structure only", RetrievalWeights::views(false, true, false)?),
        ("heuristic only", RetrievalWeights::views(false, false, true)?),
    ] {
        let top: Vec<_> = retrieve(&embedded, &mem, &w, 3)?.into_iter().map(|p| p.graph_id).collect();
        println!("{name:<15} {top:?}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
