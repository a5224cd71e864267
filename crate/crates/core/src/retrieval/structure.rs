//! Frozen graph-attention encoder over provenance graphs.
//!
//! Node features are hashed text embeddings of node labels. Two rounds of
//! single-head attention-weighted aggregation run over the undirected view of
//! usage and generation edges (plus self loops) with projection and attention
//! weights drawn once from the seed and never trained. Node states are then
//! mean-pooled and L2-normalized.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use rand::Rng;

use super::embed::{l2_normalize, HashedNgramEmbedder, EMBED_DIM};
use crate::provgraph::{canonical_label, ProcessGraph};
use crate::seed;

const LAYERS: usize = 2;
const LEAKY_SLOPE: f64 = 0.2;

struct Layer {
    /// Row-major `EMBED_DIM x EMBED_DIM` projection.
    weight: Vec<f64>,
    attn_self: Vec<f64>,
    attn_neigh: Vec<f64>,
}

pub struct StructureEncoder {
    seed: u64,
    layers: Vec<Layer>,
    /// First-layer projections depend only on the label.
    first: RwLock<HashMap<String, Vec<f64>>>,
    graphs: RwLock<HashMap<String, Vec<f64>>>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

impl StructureEncoder {
    pub fn new(seed_value: u64) -> Self {
        let bound = (3.0 / EMBED_DIM as f64).sqrt();
        let layers = (0..LAYERS)
            .map(|l| {
                let mut rng = seed::rng(seed_value, &["frozen-gat", &l.to_string()]);
                let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-bound..bound)).collect::<Vec<f64>>();
                Layer {
                    weight: draw(EMBED_DIM * EMBED_DIM),
                    attn_self: draw(EMBED_DIM),
                    attn_neigh: draw(EMBED_DIM),
                }
            })
            .collect();
        Self {
            seed: seed_value,
            layers,
            first: RwLock::new(HashMap::new()),
            graphs: RwLock::new(HashMap::new()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> String {
        format!("frozen-gat-{LAYERS}x{EMBED_DIM}-seed{}", self.seed)
    }

    fn project(layer: &Layer, h: &[f64]) -> Vec<f64> {
        layer
            .weight
            .chunks_exact(EMBED_DIM)
            .map(|row| row.iter().zip(h).map(|(w, x)| w * x).sum())
            .collect()
    }

    fn first_projection(&self, label: &str) -> Vec<f64> {
        if let Some(z) = self.first.read().expect("cache lock").get(label) {
            return z.clone();
        }
        let z = Self::project(&self.layers[0], &HashedNgramEmbedder::vector(label));
        self.first.write().expect("cache lock").insert(label.to_string(), z.clone());
        z
    }

    /// Embeds a graph given node labels and undirected adjacency.
    pub fn encode_nodes(&self, labels: &[String], adjacency: &[Vec<usize>]) -> Vec<f64> {
        let key = serde_json::to_string(&(labels, adjacency)).unwrap_or_default();
        if let Some(v) = self.graphs.read().expect("cache lock").get(&key) {
            return v.clone();
        }
        let v = self.encode_uncached(labels, adjacency);
        self.graphs.write().expect("cache lock").insert(key, v.clone());
        v
    }

    fn encode_uncached(&self, labels: &[String], adjacency: &[Vec<usize>]) -> Vec<f64> {
        if labels.is_empty() {
            let mut v = HashedNgramEmbedder::vector("");
            l2_normalize(&mut v);
            return v;
        }
        let mut h: Vec<Vec<f64>> = Vec::new();
        for (depth, layer) in self.layers.iter().enumerate() {
            let z: Vec<Vec<f64>> = if depth == 0 {
                labels.iter().map(|l| self.first_projection(l)).collect()
            } else {
                h.iter().map(|x| Self::project(layer, x)).collect()
            };
            let self_score: Vec<f64> = z.iter().map(|v| dot(&layer.attn_self, v)).collect();
            let neigh_score: Vec<f64> = z.iter().map(|v| dot(&layer.attn_neigh, v)).collect();
            h = (0..z.len())
                .map(|i| {
                    let mut nbrs: Vec<usize> = adjacency[i].clone();
                    nbrs.push(i);
                    nbrs.sort_unstable();
                    nbrs.dedup();
                    // Summation order follows feature values, not node ids.
                    nbrs.sort_by(|&a, &b| lex_cmp(&z[a], &z[b]));
                    let logits: Vec<f64> = nbrs
                        .iter()
                        .map(|&j| {
                            let e = self_score[i] + neigh_score[j];
                            if e > 0.0 {
                                e
                            } else {
                                LEAKY_SLOPE * e
                            }
                        })
                        .collect();
                    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let weights: Vec<f64> = logits.iter().map(|e| (e - max).exp()).collect();
                    let total: f64 = weights.iter().sum();
                    let mut out = vec![0.0; EMBED_DIM];
                    for (w, &j) in weights.iter().zip(&nbrs) {
                        let a = w / total;
                        for (o, x) in out.iter_mut().zip(&z[j]) {
                            *o += a * x;
                        }
                    }
                    out.into_iter().map(elu).collect()
                })
                .collect();
        }
        h.sort_by(|a, b| lex_cmp(a, b));
        let mut pooled = vec![0.0; EMBED_DIM];
        for v in &h {
            for (p, x) in pooled.iter_mut().zip(v) {
                *p += x;
            }
        }
        let n = h.len() as f64;
        for p in &mut pooled {
            *p /= n;
        }
        l2_normalize(&mut pooled);
        pooled
    }

    pub fn embed_structure(&self, g: &ProcessGraph) -> Vec<f64> {
        let mut index = BTreeMap::new();
        let mut labels = Vec::new();
        for e in g.entities() {
            index.insert(e.id.as_str(), labels.len());
            labels.push(canonical_label(&e.label));
        }
        for a in &g.activities {
            index.insert(a.id.as_str(), labels.len());
            labels.push(canonical_label(&a.label));
        }
        let mut adjacency = vec![Vec::new(); labels.len()];
        for (a, b) in g.usage_edges.iter().chain(&g.generation_edges) {
            if let (Some(&i), Some(&j)) = (index.get(a.as_str()), index.get(b.as_str())) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        self.encode_nodes(&labels, &adjacency)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provgraph::{ActivityNode, EntityNode, MaterialClass};

    fn chain(ids: [&str; 3], reversed_insert: bool) -> ProcessGraph {
        let mut g = ProcessGraph::new("g", "d", None, MaterialClass::Other);
        let mut ents = vec![EntityNode::material(ids[0], "Fe2O3"), EntityNode::material(ids[1], "Fe3O4")];
        if reversed_insert {
            ents.reverse();
        }
        g.material_entities = ents;
        g.activities.push(ActivityNode::new(ids[2], "reduce", 0));
        g.usage_edges.push((ids[0].into(), ids[2].into()));
        g.generation_edges.push((ids[2].into(), ids[1].into()));
        g
    }

    #[test]
    fn single_node_equals_projected_feature() {
        let enc = StructureEncoder::new(7);
        let v = enc.encode_nodes(&["sinter".into()], &[vec![]]);
        // With one node, attention is trivially 1: h = elu(W h) per layer.
        let mut h = HashedNgramEmbedder::vector("sinter");
        for layer in &enc.layers {
            h = StructureEncoder::project(layer, &h).into_iter().map(elu).collect();
        }
        l2_normalize(&mut h);
        assert_eq!(v, h);
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn isomorphic_graphs_match() {
        let enc = StructureEncoder::new(3);
        let a = enc.embed_structure(&chain(["e1", "e2", "a1"], false));
        let b = enc.embed_structure(&chain(["zz", "m9", "act"], true));
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_weights_are_seeded() {
        let g = chain(["e1", "e2", "a1"], false);
        assert_eq!(StructureEncoder::new(11).embed_structure(&g), StructureEncoder::new(11).embed_structure(&g));
        assert_ne!(StructureEncoder::new(11).embed_structure(&g), StructureEncoder::new(12).embed_structure(&g));
    }
}
