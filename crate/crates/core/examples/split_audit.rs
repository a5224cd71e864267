// All four split protocols over one benchmark, with their partition
// statistics and the DOI contamination between them.

use matproc::provgraph::{finish_graph, generate_synthetic_corpus, SynthParams};
use matproc::splitter::{contamination_matrix, split, split_report, Partition, Protocol};
use matproc::taskgen::{build_candidate_pools, generate_benchmark, TaskGenConfig};

pub fn run() -> matproc::Result<()> {
    let raw = generate_synthetic_corpus(&SynthParams { n_records: 150, ..SynthParams::default() }, 11)?;
    let graphs: Vec<_> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs)?;
    let items = generate_benchmark(&graphs, &pools, &TaskGenConfig::default())?.items;

    let mut named = Vec::new();
    for protocol in Protocol::ALL {
        let a = split(&items, protocol, 11)?;
        print!("{}", split_report(&a, &items).to_table());
        named.push((protocol.to_string(), a));
    }
    let m = contamination_matrix(&named, &items)?;
    print!("\n{}", m.to_table());

    // Item-level random splits share papers across partitions; the dual split never does.
    assert!(m.get("random", "random").unwrap() > 0.5);
    assert_eq!(m.get("dual", "dual"), Some(0.0));
    let dual = &named[3].1;
    assert!(dual.select(&items, Partition::Test).iter().all(|i| i.material_class.as_str() == "battery"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
