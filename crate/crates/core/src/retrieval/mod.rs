//! Precedent retrieval fusing text, structure and heuristic views:
//! `s_ret = alpha * s_text + beta * s_struct + gamma * s_heur`.

pub mod embed;
pub mod structure;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use embed::{cosine, unit_interval, HashedNgramEmbedder, HttpEmbedder, TextEmbedder, EMBED_DIM};
pub use structure::StructureEncoder;

use crate::memory::{jaccard, ProcessMemory, ProcessSummary};
use crate::provgraph::{canonical_label, ActivityNode, EntityNode, MaterialClass, ProcessGraph};
use crate::taskgen::{BenchItem, TaskKind, MASK, ROUTE_SEP};
use crate::{Error, Result};

pub const DEFAULT_K: usize = 8;

/// Text and structure encoders used for both memory building and queries.
#[derive(Clone)]
pub struct Embedders {
    pub text: Arc<dyn TextEmbedder>,
    pub structure: Arc<StructureEncoder>,
}

impl Embedders {
    pub fn builtin(seed: u64) -> Self {
        Self {
            text: Arc::new(HashedNgramEmbedder),
            structure: Arc::new(StructureEncoder::new(seed)),
        }
    }

    /// Uses the embedding endpoint from the environment when one is set.
    pub fn from_env(seed: u64) -> Self {
        let text: Arc<dyn TextEmbedder> = match HttpEmbedder::from_env() {
            Some(h) => Arc::new(h),
            None => Arc::new(HashedNgramEmbedder),
        };
        Self {
            text,
            structure: Arc::new(StructureEncoder::new(seed)),
        }
    }
}

/// `precursors: a, b | route: mill(duration=2 h) -> sinter | products: c`
pub fn linearize(steps: &[(String, BTreeMap<String, String>)], precursors: &[String], products: &[String]) -> String {
    let route: Vec<String> = steps
        .iter()
        .map(|(label, conds)| {
            if conds.is_empty() {
                label.clone()
            } else {
                let c: Vec<String> = conds.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{label}({})", c.join(", "))
            }
        })
        .collect();
    format!(
        "precursors: {} | route: {} | products: {}",
        precursors.join(", "),
        route.join(ROUTE_SEP),
        products.join(", ")
    )
}

pub fn graph_text(g: &ProcessGraph) -> String {
    let s = ProcessSummary::from_graph(g);
    let steps: Vec<(String, BTreeMap<String, String>)> = g
        .ordered_activities()
        .iter()
        .map(|a| (canonical_label(&a.label), a.conditions.clone()))
        .collect();
    linearize(&steps, &s.precursors, &s.products)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.3,
            gamma: 0.3,
        }
    }
}

impl RetrievalWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { alpha, beta, gamma };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<()> {
        let parts = [self.alpha, self.beta, self.gamma];
        if parts.iter().any(|x| !x.is_finite() || *x < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "retrieval weights must be non-negative and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Default weights restricted to a subset of views and renormalized.
    pub fn views(text: bool, structure: bool, heuristic: bool) -> Result<Self> {
        let d = Self::default();
        let raw = [
            if text { d.alpha } else { 0.0 },
            if structure { d.beta } else { 0.0 },
            if heuristic { d.gamma } else { 0.0 },
        ];
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            return Err(Error::InvalidParams("at least one retrieval view is required".into()));
        }
        Ok(Self {
            alpha: raw[0] / total,
            beta: raw[1] / total,
            gamma: raw[2] / total,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedPrecedent {
    pub graph_id: String,
    pub s_text: f64,
    pub s_struct: f64,
    pub s_heur: f64,
    pub s_ret: f64,
}

/// Query-side process context, built from what a question reveals.
#[derive(Debug, Clone)]
pub struct QueryProcess {
    pub summary: ProcessSummary,
    pub text: String,
    pub graph: ProcessGraph,
}

#[derive(Debug, Clone)]
pub struct EmbeddedQuery {
    pub summary: ProcessSummary,
    pub text: Vec<f64>,
    pub structure: Vec<f64>,
}

fn labels(v: &[String]) -> Vec<String> {
    v.iter().map(|l| canonical_label(l)).collect()
}

fn sorted_unique(v: Vec<String>) -> Vec<String> {
    v.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

impl QueryProcess {
    pub fn from_graph(g: &ProcessGraph) -> Self {
        Self {
            summary: ProcessSummary::from_graph(g),
            text: graph_text(g),
            graph: g.clone(),
        }
    }

    pub fn from_item(item: &BenchItem) -> Self {
        let q = &item.question;
        let mut g = ProcessGraph::new(&item.item_id, "", None, MaterialClass::Other);
        let (activities, precursors, products) = if item.task == TaskKind::DProcessOrdering {
            let mut ins = BTreeMap::new();
            let mut outs = BTreeMap::new();
            for (i, s) in q.steps.iter().enumerate() {
                let act = format!("s{i}");
                g.activities.push(ActivityNode::new(&act, &s.label, i));
                for m in &s.inputs {
                    ins.insert(m.alias.clone(), m.label.clone());
                    g.usage_edges.push((m.alias.clone(), act.clone()));
                }
                for m in &s.outputs {
                    outs.insert(m.alias.clone(), m.label.clone());
                    g.generation_edges.push((act.clone(), m.alias.clone()));
                }
            }
            let mut all = ins.clone();
            all.extend(outs.clone());
            for (alias, label) in &all {
                g.material_entities.push(EntityNode::material(alias, label));
            }
            let pre = ins.iter().filter(|(a, _)| !outs.contains_key(*a)).map(|(_, l)| canonical_label(l));
            let prod = outs.iter().filter(|(a, _)| !ins.contains_key(*a)).map(|(_, l)| canonical_label(l));
            let acts = q.steps.iter().map(|s| canonical_label(&s.label)).collect();
            (acts, sorted_unique(pre.collect()), sorted_unique(prod.collect()))
        } else {
            let acts: Vec<String> = q.route.iter().filter(|l| *l != MASK).map(|l| canonical_label(l)).collect();
            for (i, l) in acts.iter().enumerate() {
                g.activities.push(ActivityNode::new(&format!("a{i}"), l, i));
                if i > 0 {
                    let m = format!("m{i}");
                    g.material_entities.push(EntityNode::material(&m, "intermediate"));
                    g.generation_edges.push((format!("a{}", i - 1), m.clone()));
                    g.usage_edges.push((m, format!("a{i}")));
                }
            }
            let pre = sorted_unique(labels(&q.precursors));
            let prod = sorted_unique(labels(&q.products));
            for (i, l) in pre.iter().enumerate() {
                let id = format!("p{i}");
                g.material_entities.push(EntityNode::material(&id, l));
                if !acts.is_empty() {
                    g.usage_edges.push((id, "a0".into()));
                }
            }
            for (i, l) in prod.iter().enumerate() {
                let id = format!("q{i}");
                g.material_entities.push(EntityNode::material(&id, l));
                if !acts.is_empty() {
                    g.generation_edges.push((format!("a{}", acts.len() - 1), id));
                }
            }
            if let Some(pos) = q.step_index.filter(|p| *p < acts.len() && item.task != TaskKind::A2MissingStep) {
                for (i, l) in q.step_inputs.iter().enumerate() {
                    let id = format!("i{i}");
                    g.material_entities.push(EntityNode::material(&id, l));
                    g.usage_edges.push((id, format!("a{pos}")));
                }
            }
            (acts, pre, prod)
        };
        let steps: Vec<(String, BTreeMap<String, String>)> =
            activities.iter().map(|l| (l.clone(), BTreeMap::new())).collect();
        let text = linearize(&steps, &precursors, &products);
        let summary = ProcessSummary {
            graph_id: item.item_id.clone(),
            route_length: q.route_length.unwrap_or(activities.len()),
            activities,
            precursors,
            products,
            tools: Vec::new(),
        };
        Self { summary, text, graph: g }
    }

    pub fn embed(&self, embedders: &Embedders) -> Result<EmbeddedQuery> {
        Ok(EmbeddedQuery {
            summary: self.summary.clone(),
            text: embedders.text.embed_one(&self.text)?,
            structure: embedders.structure.embed_structure(&self.graph),
        })
    }
}

/// Mean of activity-set Jaccard, length agreement and precursor Jaccard.
pub fn score_heuristic(q: &ProcessSummary, p: &ProcessSummary) -> f64 {
    let acts = |s: &ProcessSummary| s.activities.iter().cloned().collect::<BTreeSet<String>>();
    let pre = |s: &ProcessSummary| s.precursors.iter().map(|l| canonical_label(l)).collect::<BTreeSet<String>>();
    let (lq, lp) = (q.route_length, p.route_length);
    let length = if lq.max(lp) == 0 {
        1.0
    } else {
        lq.min(lp) as f64 / lq.max(lp) as f64
    };
    (jaccard(&acts(q), &acts(p)) + length + jaccard(&pre(q), &pre(p))) / 3.0
}

/// Scores every process in memory and returns the top `k`.
pub fn retrieve(
    query: &EmbeddedQuery,
    memory: &ProcessMemory,
    weights: &RetrievalWeights,
    k: usize,
) -> Result<Vec<RetrievedPrecedent>> {
    if memory.processes.is_empty() {
        return Err(Error::EmptyMemory);
    }
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    weights.check()?;
    let mut scored: Vec<RetrievedPrecedent> = memory
        .processes
        .par_iter()
        .map(|p| {
            let emb = memory.embeddings.get(&p.graph_id);
            let s_text = emb.map(|e| unit_interval(cosine(&query.text, &e.text))).unwrap_or(0.0);
            let s_struct = emb
                .map(|e| unit_interval(cosine(&query.structure, &e.structure)))
                .unwrap_or(0.0);
            let s_heur = score_heuristic(&query.summary, p);
            RetrievedPrecedent {
                graph_id: p.graph_id.clone(),
                s_text,
                s_struct,
                s_heur,
                s_ret: weights.alpha * s_text + weights.beta * s_struct + weights.gamma * s_heur,
            }
        })
        .collect();
    scored.sort_by(|a, b| b.s_ret.total_cmp(&a.s_ret).then_with(|| a.graph_id.cmp(&b.graph_id)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::tests::{route_graph, toy_memory};

    fn summary(acts: &[&str], pre: &[&str]) -> ProcessSummary {
        ProcessSummary {
            graph_id: "q".into(),
            activities: acts.iter().map(|s| s.to_string()).collect(),
            precursors: pre.iter().map(|s| s.to_string()).collect(),
            products: vec![],
            tools: vec![],
            route_length: acts.len(),
        }
    }

    #[test]
    fn heuristic_hand_values() {
        let q = summary(&["mill", "sinter"], &["a"]);
        assert_eq!(score_heuristic(&q, &q), 1.0);
        let p = summary(&["mill", "anneal"], &["b"]);
        assert!((score_heuristic(&q, &p) - (1.0 / 3.0 + 1.0) / 3.0).abs() < 1e-12);
        let one = summary(&["mill"], &["a"]);
        let four = summary(&["press", "dry", "sinter", "anneal"], &["z"]);
        assert!((score_heuristic(&one, &four) - 0.25 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn weights_validate() {
        assert!(RetrievalWeights::new(0.5, 0.5, 0.1).is_err());
        assert!(RetrievalWeights::new(-0.1, 0.6, 0.5).is_err());
        let w = RetrievalWeights::views(true, false, true).unwrap();
        assert!((w.alpha - 0.4 / 0.7).abs() < 1e-12 && w.beta == 0.0);
        assert!(RetrievalWeights::views(false, false, false).is_err());
    }

    #[test]
    fn self_retrieval_and_k() {
        let m = toy_memory(&[
            ("g1", &["mill", "sinter"]),
            ("g2", &["mill", "anneal"]),
            ("g3", &["dissolve", "stir", "dry"]),
        ]);
        let emb = Embedders::builtin(0);
        let g3 = route_graph("g3", &["dissolve", "stir", "dry"]);
        let q = QueryProcess::from_graph(&g3).embed(&emb).unwrap();
        let heur = retrieve(&q, &m, &RetrievalWeights::new(0.0, 0.0, 1.0).unwrap(), 8).unwrap();
        assert_eq!(heur[0].graph_id, "g3");
        assert_eq!(heur[0].s_ret, 1.0);
        let full = retrieve(&q, &m, &RetrievalWeights::default(), 8).unwrap();
        assert_eq!(full.len(), 3);
        assert_eq!(full[0].graph_id, "g3");
        for r in &full {
            let fused = 0.4 * r.s_text + 0.3 * r.s_struct + 0.3 * r.s_heur;
            assert!((r.s_ret - fused).abs() < 1e-9);
            for s in [r.s_text, r.s_struct, r.s_heur, r.s_ret] {
                assert!((0.0..=1.0).contains(&s));
            }
        }
        assert_eq!(retrieve(&q, &m, &RetrievalWeights::default(), 2).unwrap().len(), 2);
        assert!(retrieve(&q, &m, &RetrievalWeights::default(), 0).is_err());
    }

    #[test]
    fn linearization_shape() {
        let steps = vec![
            ("mill".to_string(), BTreeMap::from([("duration".to_string(), "2 h".to_string())])),
            ("sinter".to_string(), BTreeMap::new()),
        ];
        assert_eq!(
            linearize(&steps, &["a".into(), "b".into()], &["c".into()]),
            "precursors: a, b | route: mill(duration=2 h) -> sinter | products: c"
        );
    }
}
