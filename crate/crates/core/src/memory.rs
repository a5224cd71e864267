//! Train-only process memory: per-process summaries, activity transitions,
//! context-to-next maps and the step library.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::jsonl::{self, Header};
use crate::provgraph::{canonical_label, EntityKind, ProcessGraph, Role};
use crate::retrieval::{self, Embedders};
use crate::splitter::{Partition, SplitAssignment};
use crate::taskgen::{BenchItem, ROUTE_SEP};
use crate::{seed, Error, Result};

pub const MEMORY_FORMAT: &str = "matproc-memory";
pub const MEMORY_VERSION: u32 = 1;
pub const DEFAULT_MAX_PREFIX: usize = 4;

type Counts = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSummary {
    pub graph_id: String,
    pub activities: Vec<String>,
    pub precursors: Vec<String>,
    pub products: Vec<String>,
    pub tools: Vec<String>,
    pub route_length: usize,
}

impl ProcessSummary {
    pub fn from_graph(g: &ProcessGraph) -> Self {
        let activities = g.route_labels();
        Self {
            graph_id: g.record_id.clone(),
            route_length: activities.len(),
            activities,
            precursors: g.material_labels_with_role(Role::Precursor),
            products: g.material_labels_with_role(Role::Product),
            tools: g.tool_labels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaterialInfo {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub graph_id: String,
    pub label: String,
    pub position: usize,
    pub normalized_position: f64,
    pub prev: Option<String>,
    pub next: Option<String>,
    pub tools: Vec<String>,
    pub conditions: BTreeMap<String, String>,
    pub inputs: Vec<MaterialInfo>,
    pub outputs: Vec<MaterialInfo>,
}

impl StepEntry {
    pub fn input_forms(&self) -> BTreeSet<&str> {
        self.inputs.iter().filter_map(|m| m.form.as_deref()).collect()
    }
}

/// Position normalized to [0, 1]; a single-step route sits at 0.
pub fn normalized_position(position: usize, route_length: usize) -> f64 {
    if route_length <= 1 {
        0.0
    } else {
        position as f64 / (route_length - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessEmbedding {
    pub text: Vec<f64>,
    pub structure: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub max_prefix_len: usize,
    pub text_embedder: String,
    pub structure_encoder: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessMemory {
    pub split_id: String,
    pub corpus_hash: String,
    pub config: MemoryConfig,
    /// Sorted by graph id.
    pub processes: Vec<ProcessSummary>,
    /// Linearized description of each process, parallel to `processes`.
    pub texts: Vec<String>,
    /// `transitions[a][b]`: adjacent ordered pairs (a, b).
    pub transitions: BTreeMap<String, Counts>,
    /// Context window (labels joined by the route separator) to next-label counts.
    pub prefix_index: BTreeMap<String, Counts>,
    pub step_library: Vec<StepEntry>,
    pub embeddings: BTreeMap<String, ProcessEmbedding>,
    /// One-hop edge lines per process, for graph-context prompts.
    pub neighbourhoods: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backoff {
    Exact,
    /// Matched only the last `n` labels of the prefix.
    Suffix(usize),
    Unigram,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextDistribution {
    pub probs: BTreeMap<String, f64>,
    pub backoff: Backoff,
}

impl NextDistribution {
    pub fn get(&self, label: &str) -> f64 {
        self.probs.get(label).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepWeights {
    pub label: f64,
    pub neighbours: f64,
    pub position: f64,
    pub forms: f64,
}

impl Default for StepWeights {
    fn default() -> Self {
        Self {
            label: 1.0,
            neighbours: 0.5,
            position: 0.25,
            forms: 0.25,
        }
    }
}

/// Target-step context for [`ProcessMemory::match_steps`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepQuery {
    pub label: Option<String>,
    pub prev: Option<String>,
    pub next: Option<String>,
    pub normalized_position: Option<f64>,
    pub input_forms: BTreeSet<String>,
}

impl StepQuery {
    pub fn from_entry(e: &StepEntry) -> Self {
        Self {
            label: Some(e.label.clone()),
            prev: e.prev.clone(),
            next: e.next.clone(),
            normalized_position: Some(e.normalized_position),
            input_forms: e.input_forms().into_iter().map(str::to_string).collect(),
        }
    }
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

fn neighbour_set(prev: &Option<String>, next: &Option<String>) -> BTreeSet<String> {
    prev.iter().chain(next.iter()).cloned().collect()
}

pub fn step_compatibility(q: &StepQuery, e: &StepEntry, w: &StepWeights) -> f64 {
    let label = match &q.label {
        Some(l) if *l == e.label => w.label,
        _ => 0.0,
    };
    let neigh = w.neighbours * jaccard(&neighbour_set(&q.prev, &q.next), &neighbour_set(&e.prev, &e.next));
    let pos = match q.normalized_position {
        Some(p) => w.position * (1.0 - (p - e.normalized_position).abs()),
        None => 0.0,
    };
    let forms: BTreeSet<String> = e.input_forms().into_iter().map(str::to_string).collect();
    let forms = w.forms * jaccard(&q.input_forms, &forms);
    label + neigh + pos + forms
}

struct Partial {
    summary: ProcessSummary,
    text: String,
    steps: Vec<StepEntry>,
    transitions: Vec<(String, String)>,
    windows: Vec<(String, String)>,
    embedding: ProcessEmbedding,
    neighbourhood: Vec<String>,
}

fn material_info(e: &crate::provgraph::EntityNode) -> MaterialInfo {
    MaterialInfo {
        label: canonical_label(&e.label),
        form: e.form().map(canonical_label),
    }
}

fn steps_of(g: &ProcessGraph) -> Vec<StepEntry> {
    let ordered = g.ordered_activities();
    let labels: Vec<String> = ordered.iter().map(|a| canonical_label(&a.label)).collect();
    let n = ordered.len();
    ordered
        .iter()
        .enumerate()
        .map(|(i, act)| {
            let inputs = g.inputs_of(&act.id);
            let mut tools: Vec<String> = inputs
                .iter()
                .filter(|e| e.kind == EntityKind::Tool)
                .map(|e| canonical_label(&e.label))
                .collect();
            tools.sort();
            tools.dedup();
            let mut ins: Vec<MaterialInfo> = inputs
                .iter()
                .filter(|e| e.kind == EntityKind::Material)
                .map(|e| material_info(e))
                .collect();
            ins.sort();
            let mut outs: Vec<MaterialInfo> = g
                .outputs_of(&act.id)
                .iter()
                .filter(|e| e.kind == EntityKind::Material)
                .map(|e| material_info(e))
                .collect();
            outs.sort();
            StepEntry {
                graph_id: g.record_id.clone(),
                label: labels[i].clone(),
                position: i,
                normalized_position: normalized_position(i, n),
                prev: i.checked_sub(1).map(|p| labels[p].clone()),
                next: labels.get(i + 1).cloned(),
                tools,
                conditions: act.conditions.clone(),
                inputs: ins,
                outputs: outs,
            }
        })
        .collect()
}

/// One-hop edge lines: `entity -used_by-> activity`, `activity -generated-> entity`.
pub fn neighbourhood_lines(g: &ProcessGraph) -> Vec<String> {
    let label = |id: &str| -> String {
        g.entity(id)
            .map(|e| canonical_label(&e.label))
            .or_else(|| g.activity(id).map(|a| canonical_label(&a.label)))
            .unwrap_or_else(|| id.to_string())
    };
    let mut lines: Vec<String> = g
        .usage_edges
        .iter()
        .map(|(e, a)| format!("{} -used_by-> {}", label(e), label(a)))
        .chain(
            g.generation_edges
                .iter()
                .map(|(a, e)| format!("{} -generated-> {}", label(a), label(e))),
        )
        .collect();
    lines.sort();
    lines.dedup();
    lines
}

fn partial(g: &ProcessGraph, max_prefix: usize, embedders: &Embedders) -> Result<Partial> {
    let summary = ProcessSummary::from_graph(g);
    let route = &summary.activities;
    let transitions = route.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let mut windows = Vec::new();
    for i in 1..route.len() {
        for len in 1..=max_prefix.min(i) {
            windows.push((route[i - len..i].join(ROUTE_SEP), route[i].clone()));
        }
    }
    let text = retrieval::graph_text(g);
    let embedding = ProcessEmbedding {
        text: embedders.text.embed_one(&text)?,
        structure: embedders.structure.embed_structure(g),
    };
    Ok(Partial {
        steps: steps_of(g),
        neighbourhood: neighbourhood_lines(g),
        summary,
        text,
        transitions,
        windows,
        embedding,
    })
}

/// Graph ids that own at least one train item under `assignment`.
pub fn train_graph_ids(items: &[BenchItem], assignment: &SplitAssignment) -> BTreeSet<String> {
    items
        .iter()
        .filter(|i| assignment.partition_of(&i.item_id) == Some(Partition::Train))
        .map(|i| i.graph_id.clone())
        .collect()
}

/// Hash of the train graphs as they enter the memory.
pub fn corpus_hash(graphs: &[&ProcessGraph]) -> Result<String> {
    let mut ids: Vec<&&ProcessGraph> = graphs.iter().collect();
    ids.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let bytes = serde_json::to_vec(&ids)?;
    Ok(seed::sha256_hex(&bytes))
}

/// Builds the memory from the graphs in `train_ids`. Any other graph passed
/// in is a leak and aborts the build.
pub fn build_memory(
    graphs: &[&ProcessGraph],
    train_ids: &BTreeSet<String>,
    split_id: &str,
    max_prefix_len: usize,
    embedders: &Embedders,
) -> Result<ProcessMemory> {
    if graphs.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if let Some(g) = graphs.iter().find(|g| !train_ids.contains(&g.record_id)) {
        return Err(Error::TrainLeak(g.record_id.clone()));
    }
    let mut sorted: Vec<&ProcessGraph> = graphs.to_vec();
    sorted.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    sorted.dedup_by(|a, b| a.record_id == b.record_id);
    let corpus_hash = corpus_hash(&sorted)?;

    let partials: Vec<Partial> = sorted
        .par_iter()
        .map(|g| partial(g, max_prefix_len, embedders))
        .collect::<Result<_>>()?;

    let mut mem = ProcessMemory {
        split_id: split_id.to_string(),
        corpus_hash,
        config: MemoryConfig {
            max_prefix_len,
            text_embedder: embedders.text.id(),
            structure_encoder: embedders.structure.id(),
        },
        processes: Vec::with_capacity(partials.len()),
        texts: Vec::with_capacity(partials.len()),
        transitions: BTreeMap::new(),
        prefix_index: BTreeMap::new(),
        step_library: Vec::new(),
        embeddings: BTreeMap::new(),
        neighbourhoods: BTreeMap::new(),
    };
    for p in partials {
        for (a, b) in p.transitions {
            *mem.transitions.entry(a).or_default().entry(b).or_default() += 1;
        }
        for (ctx, next) in p.windows {
            *mem.prefix_index.entry(ctx).or_default().entry(next).or_default() += 1;
        }
        mem.step_library.extend(p.steps);
        mem.embeddings.insert(p.summary.graph_id.clone(), p.embedding);
        mem.neighbourhoods.insert(p.summary.graph_id.clone(), p.neighbourhood);
        mem.texts.push(p.text);
        mem.processes.push(p.summary);
    }
    Ok(mem)
}

/// Convenience wrapper: selects the train graphs of a split and builds.
pub fn build_for_split(
    graphs: &[ProcessGraph],
    items: &[BenchItem],
    assignment: &SplitAssignment,
    split_id: &str,
    max_prefix_len: usize,
    embedders: &Embedders,
) -> Result<ProcessMemory> {
    let train_ids = train_graph_ids(items, assignment);
    let train: Vec<&ProcessGraph> = graphs.iter().filter(|g| train_ids.contains(&g.record_id)).collect();
    build_memory(&train, &train_ids, split_id, max_prefix_len, embedders)
}

impl ProcessMemory {
    pub fn process(&self, graph_id: &str) -> Option<&ProcessSummary> {
        self.processes
            .binary_search_by(|p| p.graph_id.as_str().cmp(graph_id))
            .ok()
            .map(|i| &self.processes[i])
    }

    pub fn text_of(&self, graph_id: &str) -> Option<&str> {
        self.processes
            .binary_search_by(|p| p.graph_id.as_str().cmp(graph_id))
            .ok()
            .map(|i| self.texts[i].as_str())
    }

    pub fn graph_ids(&self) -> BTreeSet<&str> {
        self.processes.iter().map(|p| p.graph_id.as_str()).collect()
    }

    /// Every activity label seen in the train graphs.
    pub fn activity_vocab(&self) -> BTreeSet<&str> {
        self.step_library.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn transition(&self, a: &str, b: &str) -> u64 {
        self.transitions.get(a).and_then(|m| m.get(b)).copied().unwrap_or(0)
    }

    pub fn transition_total(&self) -> u64 {
        self.transitions.values().flat_map(|m| m.values()).sum()
    }

    /// Next-label distribution for a prefix, backing off to shorter suffixes,
    /// then to unigram successor frequencies, then to uniform.
    pub fn next_distribution(&self, prefix: &[String]) -> NextDistribution {
        let longest = prefix.len().min(self.config.max_prefix_len);
        for len in (1..=longest).rev() {
            let key = prefix[prefix.len() - len..].join(ROUTE_SEP);
            if let Some(counts) = self.prefix_index.get(&key) {
                let backoff = if len == prefix.len() {
                    Backoff::Exact
                } else {
                    Backoff::Suffix(len)
                };
                return NextDistribution {
                    probs: normalize(counts),
                    backoff,
                };
            }
        }
        let mut unigram = Counts::new();
        for m in self.transitions.values() {
            for (b, c) in m {
                *unigram.entry(b.clone()).or_default() += c;
            }
        }
        if unigram.values().sum::<u64>() > 0 {
            return NextDistribution {
                probs: normalize(&unigram),
                backoff: Backoff::Unigram,
            };
        }
        let vocab = self.activity_vocab();
        let p = 1.0 / vocab.len().max(1) as f64;
        NextDistribution {
            probs: vocab.into_iter().map(|l| (l.to_string(), p)).collect(),
            backoff: Backoff::Uniform,
        }
    }

    /// Ranks step-library entries against a target-step context.
    pub fn match_steps(&self, query: &StepQuery, top_m: usize, weights: &StepWeights) -> Result<Vec<(f64, &StepEntry)>> {
        self.match_steps_where(query, top_m, weights, |_| true)
    }

    /// As [`match_steps`](Self::match_steps), over the entries accepted by `keep`.
    pub fn match_steps_where(
        &self,
        query: &StepQuery,
        top_m: usize,
        weights: &StepWeights,
        keep: impl Fn(&StepEntry) -> bool + Sync,
    ) -> Result<Vec<(f64, &StepEntry)>> {
        if self.step_library.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if query.label.is_none() && query.prev.is_none() && query.next.is_none() {
            return Err(Error::InvalidParams("step query needs a label or a neighbour".into()));
        }
        let mut scored: Vec<(f64, &StepEntry)> = self
            .step_library
            .iter()
            .filter(|e| keep(e))
            .map(|e| (step_compatibility(query, e, weights), e))
            .collect();
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.graph_id.cmp(&b.1.graph_id))
                .then_with(|| a.1.position.cmp(&b.1.position))
        });
        scored.truncate(top_m);
        Ok(scored)
    }

    /// Ablation variant: every transition and every context continuation is
    /// replaced by a flat count over the activity vocabulary.
    pub fn with_uniform_transitions(&self) -> Self {
        let vocab: Vec<String> = self.activity_vocab().into_iter().map(str::to_string).collect();
        let flat: Counts = vocab.iter().map(|l| (l.clone(), 1)).collect();
        let mut out = self.clone();
        out.transitions = vocab.iter().map(|a| (a.clone(), flat.clone())).collect();
        for counts in out.prefix_index.values_mut() {
            *counts = flat.clone();
        }
        out
    }

    pub fn header(&self, config_hash: &str) -> Header {
        Header::new(MEMORY_FORMAT, config_hash)
            .with("version", MEMORY_VERSION)
            .with("split_id", &self.split_id)
            .with("corpus_hash", &self.corpus_hash)
            .with("memory_config", &self.config)
    }

    pub fn save(&self, path: &Path, config_hash: &str) -> Result<()> {
        jsonl::write(path, &self.header(config_hash), std::slice::from_ref(self))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, mut records) = jsonl::read::<ProcessMemory>(path, MEMORY_FORMAT)?;
        let version: Option<u32> = header.get("version");
        if version != Some(MEMORY_VERSION) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                detail: format!("unsupported memory version {version:?}"),
            });
        }
        match (records.pop(), records.is_empty()) {
            (Some(m), true) => Ok(m),
            _ => Err(Error::Format {
                path: path.to_path_buf(),
                detail: "expected exactly one memory record".into(),
            }),
        }
    }

    /// Fails when any graph referenced by the memory is outside `train_ids`.
    pub fn assert_train_only(&self, train_ids: &BTreeSet<String>) -> Result<()> {
        let referenced = self
            .processes
            .iter()
            .map(|p| &p.graph_id)
            .chain(self.step_library.iter().map(|s| &s.graph_id))
            .chain(self.embeddings.keys())
            .chain(self.neighbourhoods.keys());
        for id in referenced {
            if !train_ids.contains(id) {
                return Err(Error::TrainLeak(id.clone()));
            }
        }
        Ok(())
    }
}

fn normalize(counts: &Counts) -> BTreeMap<String, f64> {
    let total: u64 = counts.values().sum();
    counts
        .iter()
        .map(|(k, c)| (k.clone(), *c as f64 / total as f64))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::provgraph::{finish_graph, ActivityNode, EntityNode, MaterialClass};

    /// Linear route over the given labels with one precursor and one product.
    pub fn route_graph(id: &str, labels: &[&str]) -> ProcessGraph {
        let mut g = ProcessGraph::new(id, &format!("10.1/{id}"), Some(2015), MaterialClass::Other);
        g.material_entities.push(EntityNode::material(&format!("{id}-m0"), "precursor"));
        for (i, l) in labels.iter().enumerate() {
            let a = format!("{id}-a{i}");
            g.activities.push(ActivityNode::new(&a, l, i));
            g.usage_edges.push((format!("{id}-m{i}"), a.clone()));
            let out = format!("{id}-m{}", i + 1);
            g.material_entities.push(EntityNode::material(&out, &format!("{l} out")));
            g.generation_edges.push((a, out));
        }
        finish_graph(g).unwrap()
    }

    pub fn toy_memory(routes: &[(&str, &[&str])]) -> ProcessMemory {
        let graphs: Vec<ProcessGraph> = routes.iter().map(|(id, r)| route_graph(id, r)).collect();
        let refs: Vec<&ProcessGraph> = graphs.iter().collect();
        let ids = graphs.iter().map(|g| g.record_id.clone()).collect();
        build_memory(&refs, &ids, "toy", DEFAULT_MAX_PREFIX, &Embedders::builtin(0)).unwrap()
    }

    #[test]
    fn two_route_counts() {
        let m = toy_memory(&[("g1", &["mill", "sinter"]), ("g2", &["mill", "anneal"])]);
        assert_eq!(m.transition("mill", "sinter"), 1);
        assert_eq!(m.transition("mill", "anneal"), 1);
        assert_eq!(m.prefix_index["mill"], Counts::from([("anneal".into(), 1), ("sinter".into(), 1)]));
        let d = m.next_distribution(&["mill".into()]);
        assert_eq!(d.backoff, Backoff::Exact);
        assert_eq!(d.get("sinter"), 0.5);
        assert_eq!(d.get("anneal"), 0.5);
        let b = m.next_distribution(&["grind".into(), "mill".into()]);
        assert_eq!(b.backoff, Backoff::Suffix(1));
        assert_eq!(b.probs, d.probs);
        let u = m.next_distribution(&["calcine".into()]);
        assert_eq!(u.backoff, Backoff::Unigram);
        assert_eq!(m.step_library.len(), 4);
        assert_eq!(m.transition_total(), 2);
    }

    #[test]
    fn empty_and_leaky_builds() {
        let e = build_memory(&[], &BTreeSet::new(), "x", 4, &Embedders::builtin(0));
        assert!(matches!(e, Err(Error::EmptyTrainSet)));
        let g = route_graph("g9", &["mill"]);
        let e = build_memory(&[&g], &BTreeSet::from(["other".to_string()]), "x", 4, &Embedders::builtin(0));
        assert!(matches!(e, Err(Error::TrainLeak(id)) if id == "g9"));
    }

    #[test]
    fn single_step_routes_fall_to_uniform() {
        let m = toy_memory(&[("g1", &["mill"]), ("g2", &["press"])]);
        let d = m.next_distribution(&[]);
        assert_eq!(d.backoff, Backoff::Uniform);
        assert_eq!(d.get("mill"), 0.5);
    }

    fn entry(graph: &str, pos: usize, label: &str, prev: Option<&str>, next: Option<&str>, np: f64, forms: &[&str]) -> StepEntry {
        StepEntry {
            graph_id: graph.into(),
            label: label.into(),
            position: pos,
            normalized_position: np,
            prev: prev.map(Into::into),
            next: next.map(Into::into),
            tools: vec![],
            conditions: BTreeMap::new(),
            inputs: forms
                .iter()
                .map(|f| MaterialInfo {
                    label: "m".into(),
                    form: Some(f.to_string()),
                })
                .collect(),
            outputs: vec![],
        }
    }

    #[test]
    fn five_entry_hand_fixture() {
        let mut m = toy_memory(&[("g0", &["mill"])]);
        m.step_library = vec![
            entry("a", 0, "sinter", Some("press"), None, 1.0, &["pellet"]),
            entry("b", 1, "sinter", Some("mill"), Some("anneal"), 0.5, &["powder"]),
            entry("c", 0, "press", Some("mill"), Some("sinter"), 0.5, &["powder"]),
            entry("d", 2, "anneal", Some("sinter"), None, 1.0, &[]),
            entry("e", 0, "mill", None, Some("press"), 0.0, &["powder", "pellet"]),
        ];
        let q = StepQuery {
            label: Some("sinter".into()),
            prev: Some("press".into()),
            next: None,
            normalized_position: Some(1.0),
            input_forms: BTreeSet::from(["pellet".into()]),
        };
        // Hand computation with weights (1, 0.5, 0.25, 0.25):
        // a: 1 + 0.5*1   + 0.25*1   + 0.25*1   = 2.0
        // b: 1 + 0.5*0   + 0.25*0.5 + 0.25*0   = 1.125
        // c: 0 + 0.5*0   + 0.25*0.5 + 0.25*0   = 0.125
        // d: 0 + 0.5*0   + 0.25*1   + 0.25*0   = 0.25
        // e: 0 + 0.5*1   + 0.25*0   + 0.25*1/2 = 0.625
        let ranked = m.match_steps(&q, 5, &StepWeights::default()).unwrap();
        let got: Vec<(&str, f64)> = ranked.iter().map(|(s, e)| (e.graph_id.as_str(), *s)).collect();
        let want = [("a", 2.0), ("b", 1.125), ("e", 0.625), ("d", 0.25), ("c", 0.125)];
        assert_eq!(got.len(), 5);
        for ((gi, gs), (wi, ws)) in got.iter().zip(want) {
            assert_eq!(*gi, wi);
            assert!((gs - ws).abs() < 1e-12);
        }
    }

    #[test]
    fn label_only_query_puts_label_first() {
        let m = toy_memory(&[
            ("g1", &["mill", "sinter"]),
            ("g2", &["sinter"]),
            ("g3", &["press", "anneal", "sinter"]),
        ]);
        let q = StepQuery {
            label: Some("sinter".into()),
            ..StepQuery::default()
        };
        let ranked = m.match_steps(&q, 100, &StepWeights::default()).unwrap();
        let first_other = ranked.iter().position(|(_, e)| e.label != "sinter").unwrap();
        assert_eq!(first_other, 3);
        assert!(ranked[first_other..].iter().all(|(_, e)| e.label != "sinter"));
        assert!(m.match_steps(&StepQuery::default(), 3, &StepWeights::default()).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let m = toy_memory(&[("g1", &["mill", "sinter"]), ("g2", &["mill", "anneal"])]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("memory.jsonl");
        m.save(&p, "cfg").unwrap();
        let back = ProcessMemory::load(&p).unwrap();
        assert_eq!(back, m);
        let again = dir.path().join("again.jsonl");
        back.save(&again, "cfg").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn uniform_variant_flattens() {
        let m = toy_memory(&[("g1", &["mill", "sinter"]), ("g2", &["mill", "anneal"])]).with_uniform_transitions();
        let d = m.next_distribution(&["mill".into()]);
        assert!((d.get("sinter") - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.transition("sinter", "mill"), 1);
    }
}
