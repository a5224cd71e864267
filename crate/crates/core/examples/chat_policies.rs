// Prompted policies against a scripted chat client, plus scoring a file of
// predictions produced elsewhere.

use std::collections::BTreeMap;

use matproc::memory::{self, DEFAULT_MAX_PREFIX};
use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::retrieval::Embedders;
use matproc::runner::{evaluate, score_external_predictions, EvalContext, MockChatClient, Policy, PolicyConfig};
use matproc::splitter::{split, Partition, Protocol};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, TaskGenConfig};

pub fn run() -> matproc::Result<()> {
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 120, ..SynthParams::default() }, 2)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let items = generate_benchmark(&graphs, &pools, &TaskGenConfig::default())?.items;
    let assignment = split(&items, Protocol::Random, 2)?;
    let embedders = Embedders::builtin(2);
    let mem = memory::build_for_split(&graphs, &items, &assignment, "random", DEFAULT_MAX_PREFIX, &embedders)?;
    let train: Vec<_> = assignment.select(&items, Partition::Train).into_iter().cloned().collect();
    let test: Vec<_> = assignment.select(&items, Partition::Test).into_iter().cloned().collect();
    let test = &test[..test.len().min(120)];

    // Reads the evidence block and picks the top-scored letter, like a
    // model that trusts its tools.
    let follower = MockChatClient::evidence_follower();
    // Always answers C, except on planning turns.
    let stubborn = MockChatClient::new("C").rule("Write a short plan", "1. read the evidence\n2. answer");

    for (name, client) in [("follower", &follower), ("stubborn", &stubborn)] {
        let ctx = EvalContext {
            split_id: "random",
            memory: &mem,
            embedders: &embedders,
            train_items: &train,
            client: Some(client),
        };
        for policy in [Policy::ZeroShot, Policy::FewShot, Policy::Rag, Policy::Graphrag, Policy::ProvmindLlm] {
            let out = evaluate(test, &ctx, &PolicyConfig::with_policy(policy))?;
            println!(
                "{name:<9} {:<14} {:>6.2}%  fallbacks {}",
                policy.as_str(),
                100.0 * out.report.overall.accuracy,
                out.report.fallbacks
            );
        }
    }
    let ctx = EvalContext {
        split_id: "random",
        memory: &mem,
        embedders: &embedders,
        train_items: &train,
        client: Some(&follower),
    };
    let provmind = evaluate(&test[..1], &ctx, &PolicyConfig::with_policy(Policy::ProvmindLlm))?;
    for call in &provmind.logs[0].trace.as_ref().expect("chat trace").calls {
        let reply = call.response.as_ref().map(|r| r.text.as_str()).unwrap_or("");
        println!("--- {:?} ---\n{reply}", call.mode);
    }

    let predictions: BTreeMap<String, usize> = test.iter().map(|i| (i.item_id.clone(), 0)).collect();
    let external = score_external_predictions(test, &predictions, "random")?;
    print!("{}", external.report.to_table());
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
