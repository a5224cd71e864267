//! Option-level compatibility scores: task-aware symbolic scorers, embedding
//! based neural scores and their fusion `s = lambda * sym + (1 - lambda) * neu`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::memory::{normalized_position, ProcessMemory, StepEntry, StepQuery, StepWeights};
use crate::provgraph::{canonical_label, TUPLE_KEYS};
use crate::retrieval::{cosine, linearize, unit_interval, RetrievedPrecedent, TextEmbedder};
use crate::taskgen::{parse_order, satisfies, tuple_string, visible_constraints, BenchItem, TaskKind, MASK, ROUTE_SEP};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolicConfig {
    /// (transition, sequence) blend for A1 and D.
    pub route_blend: (f64, f64),
    /// (prefix, right neighbour, position) blend for A2.
    pub masked_blend: (f64, f64, f64),
    /// (prefix, precedent successors) blend for A3.
    pub next_blend: (f64, f64),
    pub order_bonus: f64,
    pub position_bins: usize,
    pub top_m: usize,
    pub step_weights: StepWeights,
}

impl Default for SymbolicConfig {
    fn default() -> Self {
        Self {
            route_blend: (0.5, 0.5),
            masked_blend: (0.4, 0.3, 0.3),
            next_blend: (0.5, 0.5),
            order_bonus: 2.0,
            position_bins: 5,
            top_m: 25,
            step_weights: StepWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionScores {
    pub item_id: String,
    pub raw_sym: Vec<f64>,
    pub raw_neu: Vec<f64>,
    pub sym: Vec<f64>,
    pub neu: Vec<f64>,
    pub fused: Vec<f64>,
    pub lambda: f64,
}

impl OptionScores {
    /// Index of the highest fused score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.fused)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Min-max normalization over one item's options; a constant vector maps to 0.5.
pub fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; v.len()];
    }
    v.iter().map(|x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)).collect()
}

pub fn fuse_scores(item_id: &str, raw_sym: &[f64], raw_neu: &[f64], lambda: f64) -> Result<OptionScores> {
    if raw_sym.len() != raw_neu.len() {
        return Err(Error::ArityMismatch {
            left: raw_sym.len(),
            right: raw_neu.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParams(format!("lambda {lambda} outside [0, 1]")));
    }
    let sym = min_max(raw_sym);
    let neu = min_max(raw_neu);
    let fused = sym.iter().zip(&neu).map(|(s, n)| lambda * s + (1.0 - lambda) * n).collect();
    Ok(OptionScores {
        item_id: item_id.to_string(),
        raw_sym: raw_sym.to_vec(),
        raw_neu: raw_neu.to_vec(),
        sym,
        neu,
        fused,
        lambda,
    })
}

pub fn split_route(s: &str) -> Vec<String> {
    s.split(ROUTE_SEP).map(canonical_label).filter(|l| !l.is_empty()).collect()
}

/// Longest common subsequence length over label sequences.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn lcs_similarity(a: &[String], b: &[String]) -> f64 {
    let m = a.len().max(b.len());
    if m == 0 {
        1.0
    } else {
        lcs(a, b) as f64 / m as f64
    }
}

/// Geometric mean of add-one smoothed transition probabilities. The
/// smoothing vocabulary is the known labels plus one slot for unseen ones.
pub fn transition_score(memory: &ProcessMemory, route: &[String]) -> f64 {
    let v = (memory.activity_vocab().len() + 1) as f64;
    if route.len() < 2 {
        return 1.0 / v;
    }
    let mut log_sum = 0.0;
    for w in route.windows(2) {
        let out: u64 = memory.transitions.get(&w[0]).map(|m| m.values().sum()).unwrap_or(0);
        let p = (memory.transition(&w[0], &w[1]) as f64 + 1.0) / (out as f64 + v);
        log_sum += p.ln();
    }
    (log_sum / (route.len() - 1) as f64).exp()
}

struct Ctx<'a> {
    item: &'a BenchItem,
    memory: &'a ProcessMemory,
    precedents: &'a [RetrievedPrecedent],
    cfg: &'a SymbolicConfig,
}

impl Ctx<'_> {
    fn precedent_routes(&self) -> Vec<&[String]> {
        self.precedents
            .iter()
            .filter_map(|p| self.memory.process(&p.graph_id))
            .map(|s| s.activities.as_slice())
            .collect()
    }

    fn route_score(&self, route: &[String]) -> f64 {
        let seq = self
            .precedent_routes()
            .into_iter()
            .map(|r| lcs_similarity(route, r))
            .fold(0.0, f64::max);
        self.cfg.route_blend.0 * transition_score(self.memory, route) + self.cfg.route_blend.1 * seq
    }

    fn a1(&self) -> Vec<f64> {
        self.item.options.iter().map(|o| self.route_score(&split_route(o))).collect()
    }

    fn d(&self) -> Vec<f64> {
        let steps = &self.item.question.steps;
        let constraints = visible_constraints(steps);
        self.item
            .options
            .iter()
            .map(|o| match parse_order(o) {
                Some(order) if order.iter().all(|&i| i < steps.len()) => {
                    let route: Vec<String> = order.iter().map(|&i| canonical_label(&steps[i].label)).collect();
                    let bonus = if satisfies(&order, &constraints) {
                        self.cfg.order_bonus
                    } else {
                        0.0
                    };
                    self.route_score(&route) + bonus
                }
                _ => 0.0,
            })
            .collect()
    }

    fn a2(&self) -> Vec<f64> {
        let q = &self.item.question;
        let route: Vec<String> = q.route.iter().map(|l| if l == MASK { l.clone() } else { canonical_label(l) }).collect();
        let pos = q.step_index.or_else(|| route.iter().position(|l| l == MASK)).unwrap_or(0);
        let n = q.route_length.unwrap_or(route.len());
        let left = route[..pos.min(route.len())].to_vec();
        let right = route.get(pos + 1).cloned();
        let dist = self.memory.next_distribution(&left);
        let reverse: BTreeMap<String, f64> = match &right {
            Some(r) => {
                let mut counts = BTreeMap::new();
                for (a, m) in &self.memory.transitions {
                    if let Some(c) = m.get(r) {
                        counts.insert(a.clone(), *c as f64);
                    }
                }
                normalize(counts)
            }
            None => {
                let mut counts = BTreeMap::new();
                for e in self.memory.step_library.iter().filter(|e| e.next.is_none()) {
                    *counts.entry(e.label.clone()).or_insert(0.0) += 1.0;
                }
                normalize(counts)
            }
        };
        let bins = self.cfg.position_bins.max(1);
        let bin = |p: f64| ((p * bins as f64) as usize).min(bins - 1);
        let target = bin(normalized_position(pos, n));
        let mut positional = BTreeMap::new();
        for e in self.memory.step_library.iter().filter(|e| bin(e.normalized_position) == target) {
            *positional.entry(e.label.clone()).or_insert(0.0) += 1.0;
        }
        let positional = normalize(positional);
        let (w1, w2, w3) = self.cfg.masked_blend;
        self.item
            .options
            .iter()
            .map(|o| {
                let c = canonical_label(o);
                w1 * dist.get(&c)
                    + w2 * reverse.get(&c).copied().unwrap_or(0.0)
                    + w3 * positional.get(&c).copied().unwrap_or(0.0)
            })
            .collect()
    }

    fn a3(&self) -> Vec<f64> {
        let prefix: Vec<String> = self.item.question.route.iter().map(|l| canonical_label(l)).collect();
        let dist = self.memory.next_distribution(&prefix);
        let mut succ = BTreeMap::new();
        if let Some(last) = prefix.last() {
            for r in self.precedent_routes() {
                for w in r.windows(2).filter(|w| &w[0] == last) {
                    *succ.entry(w[1].clone()).or_insert(0.0) += 1.0;
                }
            }
        }
        let succ = normalize(succ);
        let (w1, w2) = self.cfg.next_blend;
        self.item
            .options
            .iter()
            .map(|o| {
                let c = canonical_label(o);
                w1 * dist.get(&c) + w2 * succ.get(&c).copied().unwrap_or(0.0)
            })
            .collect()
    }

    fn step_query(&self) -> StepQuery {
        let q = &self.item.question;
        let route: Vec<String> = q.route.iter().map(|l| canonical_label(l)).collect();
        let pos = q.step_index.unwrap_or(0).min(route.len().saturating_sub(1));
        StepQuery {
            label: route.get(pos).cloned(),
            prev: pos.checked_sub(1).and_then(|p| route.get(p).cloned()),
            next: route.get(pos + 1).cloned(),
            normalized_position: Some(normalized_position(pos, route.len())),
            input_forms: q.step_input_forms.iter().map(|f| canonical_label(f)).collect(),
        }
    }

    /// Weighted vote over matched steps. Steps from retrieved precedents
    /// count extra, more so the higher the precedent ranks.
    fn step_vote(&self, keep: impl Fn(&StepEntry) -> bool + Sync, vote: impl Fn(&StepEntry, &str) -> bool) -> Result<Vec<f64>> {
        let rank: BTreeMap<&str, usize> = self
            .precedents
            .iter()
            .enumerate()
            .map(|(i, p)| (p.graph_id.as_str(), i))
            .collect();
        let query = self.step_query();
        if query.label.is_none() {
            return Ok(vec![0.0; self.item.options.len()]);
        }
        let matched = self.memory.match_steps_where(&query, self.cfg.top_m, &self.cfg.step_weights, keep)?;
        let weights: Vec<f64> = matched
            .iter()
            .map(|(_, e)| 1.0 + rank.get(e.graph_id.as_str()).map(|r| 1.0 / (1.0 + *r as f64)).unwrap_or(0.0))
            .collect();
        let total: f64 = weights.iter().sum();
        Ok(self
            .item
            .options
            .iter()
            .map(|o| {
                if total == 0.0 {
                    return 0.0;
                }
                matched
                    .iter()
                    .zip(&weights)
                    .filter(|((_, e), _)| vote(e, o))
                    .map(|(_, w)| w)
                    .sum::<f64>()
                    / total
            })
            .collect())
    }

    fn b1(&self) -> Result<Vec<f64>> {
        let key = self.item.question.condition_key.clone().unwrap_or_default();
        self.step_vote(
            |e| e.conditions.contains_key(&key),
            |e, o| e.conditions.get(&key).map(String::as_str) == Some(o),
        )
    }

    fn b2(&self) -> Result<Vec<f64>> {
        self.step_vote(
            |e| tuple_string(&e.conditions).is_some(),
            |e, o| tuple_string(&e.conditions).as_deref() == Some(o),
        )
    }

    fn c1(&self) -> Result<Vec<f64>> {
        self.step_vote(|e| !e.tools.is_empty(), |e, o| e.tools.iter().any(|t| t == &canonical_label(o)))
    }
}

fn normalize(counts: BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let total: f64 = counts.values().sum();
    if total == 0.0 {
        return counts;
    }
    counts.into_iter().map(|(k, v)| (k, v / total)).collect()
}

/// Raw symbolic compatibility of each option.
pub fn score_options_symbolic(
    item: &BenchItem,
    precedents: &[RetrievedPrecedent],
    memory: &ProcessMemory,
    cfg: &SymbolicConfig,
) -> Result<Vec<f64>> {
    let ctx = Ctx {
        item,
        memory,
        precedents,
        cfg,
    };
    Ok(match item.task {
        TaskKind::A1RouteRetrieval => ctx.a1(),
        TaskKind::DProcessOrdering => ctx.d(),
        TaskKind::A2MissingStep => ctx.a2(),
        TaskKind::A3NextActivity => ctx.a3(),
        TaskKind::B1ConditionPrediction => ctx.b1()?,
        TaskKind::B2FullConditionSet => ctx.b2()?,
        TaskKind::C1ToolSelection => ctx.c1()?,
    })
}

fn parse_tuple(option: &str) -> BTreeMap<String, String> {
    option
        .split("; ")
        .filter_map(|kv| kv.split_once('='))
        .filter(|(k, _)| TUPLE_KEYS.contains(k))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// The question's process text with `option` filled into its open slot.
pub fn option_completed_text(item: &BenchItem, option: &str) -> String {
    let q = &item.question;
    let plain = |labels: &[String]| -> Vec<(String, BTreeMap<String, String>)> {
        labels.iter().map(|l| (canonical_label(l), BTreeMap::new())).collect()
    };
    let pre: Vec<String> = q.precursors.iter().map(|l| canonical_label(l)).collect();
    let prod: Vec<String> = q.products.iter().map(|l| canonical_label(l)).collect();
    match item.task {
        TaskKind::A1RouteRetrieval => linearize(&plain(&split_route(option)), &pre, &prod),
        TaskKind::A2MissingStep => {
            let route: Vec<String> = q
                .route
                .iter()
                .map(|l| if l == MASK { option.to_string() } else { l.clone() })
                .collect();
            linearize(&plain(&route), &pre, &prod)
        }
        TaskKind::A3NextActivity => {
            let mut route = q.route.clone();
            route.push(option.to_string());
            linearize(&plain(&route), &pre, &prod)
        }
        TaskKind::B1ConditionPrediction | TaskKind::B2FullConditionSet | TaskKind::C1ToolSelection => {
            let mut steps = plain(&q.route);
            let pos = q.step_index.unwrap_or(0);
            let conds = match item.task {
                TaskKind::B1ConditionPrediction => {
                    BTreeMap::from([(q.condition_key.clone().unwrap_or_default(), option.to_string())])
                }
                TaskKind::B2FullConditionSet => parse_tuple(option),
                _ => BTreeMap::from([("tool".to_string(), canonical_label(option))]),
            };
            if let Some(step) = steps.get_mut(pos) {
                step.1 = conds;
            }
            linearize(&steps, &pre, &prod)
        }
        TaskKind::DProcessOrdering => {
            let order = parse_order(option).unwrap_or_default();
            let labels: Vec<String> = order
                .iter()
                .filter_map(|&i| q.steps.get(i))
                .map(|s| s.label.clone())
                .collect();
            let ins: BTreeSet<(&str, &str)> = q
                .steps
                .iter()
                .flat_map(|s| s.inputs.iter().map(|m| (m.alias.as_str(), m.label.as_str())))
                .collect();
            let outs: BTreeSet<(&str, &str)> = q
                .steps
                .iter()
                .flat_map(|s| s.outputs.iter().map(|m| (m.alias.as_str(), m.label.as_str())))
                .collect();
            let out_alias: BTreeSet<&str> = outs.iter().map(|(a, _)| *a).collect();
            let in_alias: BTreeSet<&str> = ins.iter().map(|(a, _)| *a).collect();
            let pre: BTreeSet<String> = ins
                .iter()
                .filter(|(a, _)| !out_alias.contains(a))
                .map(|(_, l)| canonical_label(l))
                .collect();
            let prod: BTreeSet<String> = outs
                .iter()
                .filter(|(a, _)| !in_alias.contains(a))
                .map(|(_, l)| canonical_label(l))
                .collect();
            linearize(
                &plain(&labels),
                &pre.into_iter().collect::<Vec<_>>(),
                &prod.into_iter().collect::<Vec<_>>(),
            )
        }
    }
}

/// Raw neural compatibility: best (cos + 1) / 2 between the option-completed
/// text and any precedent's process text.
pub fn score_options_neural(
    item: &BenchItem,
    precedents: &[RetrievedPrecedent],
    memory: &ProcessMemory,
    embedder: &dyn TextEmbedder,
) -> Result<Vec<f64>> {
    let texts: Vec<String> = item.options.iter().map(|o| option_completed_text(item, o)).collect();
    let vectors = embedder.embed(&texts)?;
    let stored: Vec<&Vec<f64>> = precedents
        .iter()
        .filter_map(|p| memory.embeddings.get(&p.graph_id))
        .map(|e| &e.text)
        .collect();
    Ok(vectors
        .iter()
        .map(|v| stored.iter().map(|s| unit_interval(cosine(v, s))).fold(0.0, f64::max))
        .collect())
}
