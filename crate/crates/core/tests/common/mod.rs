#![allow(dead_code)]

use std::collections::BTreeSet;

use matproc::memory::{build_memory, ProcessMemory, DEFAULT_MAX_PREFIX};
use matproc::provgraph::{finish_graph, generate_synthetic_corpus, ActivityNode, EntityNode, MaterialClass, ProcessGraph, SynthParams};
use matproc::retrieval::Embedders;
use matproc::taskgen::{build_candidate_pools, generate_benchmark, BenchItem, Instantiated, TaskGenConfig};

/// Linear route: `precursor` feeds the first step, each step feeds the next,
/// step `i` produces `"{label} out"`.
pub fn route_graph(id: &str, labels: &[&str]) -> ProcessGraph {
    let mut g = ProcessGraph::new(id, &format!("10.9/{id}"), Some(2018), MaterialClass::Thermoelectric);
    g.material_entities.push(EntityNode::material(&format!("{id}-p"), "precursor"));
    let mut prev = format!("{id}-p");
    for (i, label) in labels.iter().enumerate() {
        let a = format!("{id}-a{i}");
        let out = format!("{id}-o{i}");
        g.activities.push(ActivityNode::new(&a, label, i));
        g.material_entities.push(EntityNode::material(&out, &format!("{label} out")));
        g.usage_edges.push((prev.clone(), a.clone()));
        g.generation_edges.push((a, out.clone()));
        prev = out;
    }
    finish_graph(g).expect("linear route compiles")
}

pub fn memory_of(graphs: &[ProcessGraph]) -> ProcessMemory {
    let refs: Vec<&ProcessGraph> = graphs.iter().collect();
    let ids: BTreeSet<String> = graphs.iter().map(|g| g.record_id.clone()).collect();
    build_memory(&refs, &ids, "fixture", DEFAULT_MAX_PREFIX, &Embedders::builtin(0)).expect("fixture memory")
}

pub fn synthetic(n_records: usize, seed: u64) -> (Vec<ProcessGraph>, Vec<BenchItem>) {
    let (graphs, bench) = synthetic_with_skips(n_records, seed);
    (graphs, bench.items)
}

pub fn synthetic_with_skips(n_records: usize, seed: u64) -> (Vec<ProcessGraph>, Instantiated) {
    let raw = generate_synthetic_corpus(&SynthParams { n_records, ..SynthParams::default() }, seed).unwrap();
    let graphs: Vec<ProcessGraph> = raw.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let pools = build_candidate_pools(&graphs).unwrap();
    let bench = generate_benchmark(&graphs, &pools, &TaskGenConfig { seed, ..TaskGenConfig::default() }).unwrap();
    (graphs, bench)
}
