// Symbolic and neural option scores for a missing-step question, and how
// the fused ranking moves as lambda goes from neural to symbolic.

use matproc::memory::{self, DEFAULT_MAX_PREFIX};
use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::retrieval::{retrieve, Embedders, QueryProcess, RetrievalWeights, DEFAULT_K};
use matproc::scoring::{fuse_scores, score_options_neural, score_options_symbolic, SymbolicConfig};
use matproc::splitter::{split, Partition, Protocol};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, option_letter, render_question, TaskGenConfig, TaskKind};

pub fn run() -> matproc::Result<()> {
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 150, ..SynthParams::default() }, 21)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let items = generate_benchmark(&graphs, &pools, &TaskGenConfig::default())?.items;
    let assignment = split(&items, Protocol::Random, 21)?;
    let embedders = Embedders::builtin(21);
    let mem = memory::build_for_split(&graphs, &items, &assignment, "random", DEFAULT_MAX_PREFIX, &embedders)?;

    let item = assignment
        .select(&items, Partition::Test)
        .into_iter()
        .find(|i| i.task == TaskKind::A2MissingStep)
        .expect("a missing-step question in test");
    println!("{}", render_question(item));

    let query = QueryProcess::from_item(item).embed(&embedders)?;
    let precedents = retrieve(&query, &mem, &RetrievalWeights::default(), DEFAULT_K)?;
    let sym = score_options_symbolic(item, &precedents, &mem, &SymbolicConfig::default())?;
    let neu = score_options_neural(item, &precedents, &mem, embedders.text.as_ref())?;

    println!("{:<3} {:<28} {:>8} {:>8}", "", "option", "symbolic", "neural");
    for (i, opt) in item.options.iter().enumerate() {
        let mark = if i == item.gold_index { "*" } else { "" };
        println!("{:<3} {:<28} {:>8.4} {:>8.4}", format!("{}{mark}", option_letter(i)), opt, sym[i], neu[i]);
    }
    for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let fused = fuse_scores(&item.item_id, &sym, &neu, lambda)?;
        let pick = fused.argmax();
        println!("lambda {lambda:.2}: {:?} -> {}", fused.fused, option_letter(pick));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
