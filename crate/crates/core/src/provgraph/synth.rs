//! Seeded synthetic corpora for desk-scale runs.
//!
//! Routes follow a sparse first-order transition model, and every activity
//! label carries preferred condition values and a preferred tool, so the
//! generated benchmark contains learnable structure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActivityNode, EntityNode, MaterialClass, ProcessGraph};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_records: usize,
    pub activity_vocab: Vec<String>,
    pub tool_vocab: Vec<String>,
    pub condition_vocab: BTreeMap<String, Vec<String>>,
    pub material_vocab: Vec<String>,
    pub form_vocab: Vec<String>,
    /// Inclusive bounds on the number of activities per record.
    pub route_length_range: (usize, usize),
    pub class_mix: BTreeMap<MaterialClass, f64>,
    /// Inclusive publication-year bounds.
    pub year_range: (i32, i32),
    pub records_per_doi: usize,
    /// Probability that a step follows its label's dominant successor.
    pub transition_strength: f64,
    /// Probability that a reported condition takes its label's preferred value.
    pub condition_strength: f64,
}

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for SynthParams {
    fn default() -> Self {
        let mut conditions = BTreeMap::new();
        conditions.insert(
            "temperature".to_string(),
            owned(&["25 °c", "80 °c", "150 °c", "300 °c", "450 °c", "600 °c", "750 °c", "900 °c", "1100 °c", "1300 °c"]),
        );
        conditions.insert(
            "duration".to_string(),
            owned(&["10 min", "30 min", "1 h", "2 h", "4 h", "6 h", "12 h", "24 h", "48 h"]),
        );
        conditions.insert(
            "atmosphere".to_string(),
            owned(&["air", "ar", "n2", "vacuum", "o2", "h2/ar", "co2"]),
        );
        conditions.insert(
            "pressure".to_string(),
            owned(&["1 atm", "10 mpa", "50 mpa", "0.1 pa", "5 gpa"]),
        );
        let mut class_mix = BTreeMap::new();
        class_mix.insert(MaterialClass::Battery, 0.3);
        class_mix.insert(MaterialClass::Thermoelectric, 0.4);
        class_mix.insert(MaterialClass::Magnetic, 0.3);
        Self {
            n_records: 200,
            activity_vocab: owned(&[
                "weigh", "mix", "ball mill", "grind", "dry", "calcine", "press", "sinter", "anneal",
                "quench", "dissolve", "stir", "filter", "wash", "melt", "spark plasma sinter",
            ]),
            tool_vocab: owned(&[
                "ball mill", "mortar", "tube furnace", "muffle furnace", "hydraulic press",
                "glovebox", "autoclave", "arc melter", "sps apparatus", "oven", "magnetic stirrer",
            ]),
            condition_vocab: conditions,
            material_vocab: owned(&[
                "li2co3", "co3o4", "nio", "mno2", "fepo4", "bi2te3", "sb", "te", "pbte", "snse",
                "fe2o3", "sro", "nd", "fe", "b", "co", "cu", "la2o3", "ethanol", "citric acid",
            ]),
            form_vocab: owned(&["powder", "solution", "slurry", "pellet", "ingot", "film", "gel"]),
            route_length_range: (2, 7),
            class_mix,
            year_range: (2005, 2024),
            records_per_doi: 2,
            transition_strength: 0.7,
            condition_strength: 0.8,
        }
    }
}

impl SynthParams {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.activity_vocab.is_empty() || self.tool_vocab.is_empty() || self.material_vocab.is_empty() {
            return bad("activity, tool and material vocabularies must be non-empty");
        }
        if self.condition_vocab.is_empty() || self.condition_vocab.values().any(Vec::is_empty) {
            return bad("condition vocabulary must be non-empty");
        }
        if self.form_vocab.is_empty() {
            return bad("form vocabulary must be non-empty");
        }
        let (lo, hi) = self.route_length_range;
        if lo < 1 || lo > hi {
            return bad("route_length_range must satisfy 1 <= min <= max");
        }
        if self.year_range.0 > self.year_range.1 {
            return bad("year_range is inverted");
        }
        if self.class_mix.values().any(|w| !w.is_finite() || *w < 0.0) || self.class_mix.values().sum::<f64>() <= 0.0 {
            return bad("class_mix weights must be non-negative with a positive sum");
        }
        if self.records_per_doi == 0 {
            return bad("records_per_doi must be positive");
        }
        for p in [self.transition_strength, self.condition_strength] {
            if !(0.0..=1.0).contains(&p) {
                return bad("strengths must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Per-label regularities shared by every record of a corpus.
struct Regime {
    successors: BTreeMap<String, [usize; 2]>,
    starts: Vec<usize>,
    preferred_condition: BTreeMap<(String, String), String>,
    reports: BTreeMap<(String, String), f64>,
    preferred_tool: BTreeMap<String, String>,
    output_form: BTreeMap<String, String>,
}

impl Regime {
    fn new(p: &SynthParams, rng: &mut ChaCha8Rng) -> Self {
        let n = p.activity_vocab.len();
        let mut successors = BTreeMap::new();
        let mut preferred_condition = BTreeMap::new();
        let mut reports = BTreeMap::new();
        let mut preferred_tool = BTreeMap::new();
        let mut output_form = BTreeMap::new();
        for (i, label) in p.activity_vocab.iter().enumerate() {
            let first = (i + 1 + rng.gen_range(0..n.max(1))) % n;
            let mut second = rng.gen_range(0..n);
            if n > 1 && second == first {
                second = (second + 1) % n;
            }
            successors.insert(label.clone(), [first, second]);
            for (key, values) in &p.condition_vocab {
                let v = values.choose(rng).expect("checked non-empty").clone();
                preferred_condition.insert((label.clone(), key.clone()), v);
                let base = match key.as_str() {
                    "temperature" => 0.85,
                    "duration" => 0.75,
                    "atmosphere" => 0.55,
                    _ => 0.2,
                };
                reports.insert((label.clone(), key.clone()), base * rng.gen_range(0.6..1.0));
            }
            preferred_tool.insert(label.clone(), p.tool_vocab.choose(rng).expect("checked").clone());
            output_form.insert(label.clone(), p.form_vocab.choose(rng).expect("checked").clone());
        }
        let mut starts: Vec<usize> = (0..n).collect();
        starts.shuffle(rng);
        starts.truncate(3.min(n));
        Self {
            successors,
            starts,
            preferred_condition,
            reports,
            preferred_tool,
            output_form,
        }
    }

    fn route(&self, p: &SynthParams, len: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
        let vocab = &p.activity_vocab;
        let mut idx = *self.starts.choose(rng).expect("vocab non-empty");
        let mut route = vec![vocab[idx].clone()];
        while route.len() < len {
            let r: f64 = rng.gen();
            let succ = self.successors[&vocab[idx]];
            idx = if r < p.transition_strength {
                succ[0]
            } else if r < p.transition_strength + (1.0 - p.transition_strength) / 2.0 {
                succ[1]
            } else {
                rng.gen_range(0..vocab.len())
            };
            route.push(vocab[idx].clone());
        }
        route
    }
}

/// Largest-remainder allocation of `n` slots over the class mix.
fn class_quota(mix: &BTreeMap<MaterialClass, f64>, n: usize) -> Vec<MaterialClass> {
    let total: f64 = mix.values().sum();
    let mut alloc: Vec<(MaterialClass, usize, f64)> = mix
        .iter()
        .map(|(c, w)| {
            let exact = w / total * n as f64;
            (*c, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = alloc.iter().map(|a| a.1).sum();
    let mut order: Vec<usize> = (0..alloc.len()).collect();
    order.sort_by(|&a, &b| alloc[b].2.total_cmp(&alloc[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(n - assigned) {
        alloc[i].1 += 1;
    }
    alloc
        .into_iter()
        .flat_map(|(c, k, _)| std::iter::repeat(c).take(k))
        .collect()
}

/// Generates `n_records` raw (unordered) graphs. Identical seeds give
/// identical corpora.
pub fn generate_synthetic_corpus(params: &SynthParams, seed_value: u64) -> Result<Vec<ProcessGraph>> {
    params.check()?;
    if params.n_records == 0 {
        return Ok(Vec::new());
    }
    let mut rng = seed::rng(seed_value, &["synthetic-corpus"]);
    let regime = Regime::new(params, &mut rng);
    let n_dois = params.n_records.div_ceil(params.records_per_doi);
    let mut classes = class_quota(&params.class_mix, params.n_records);
    classes.shuffle(&mut rng);
    let mut graphs = Vec::with_capacity(params.n_records);
    for i in 0..params.n_records {
        let doi_index = i / params.records_per_doi;
        debug_assert!(doi_index < n_dois);
        // Year is a property of the paper; every record of a DOI shares it.
        let mut doi_rng = seed::rng(seed_value, &["doi", &doi_index.to_string()]);
        let year = doi_rng.gen_range(params.year_range.0..=params.year_range.1);
        // Class comes from the per-record quota but is also shared within a DOI.
        let class = classes[doi_index * params.records_per_doi];
        let mut rec_rng = seed::rng(seed_value, &["record", &i.to_string()]);
        graphs.push(synth_record(params, &regime, i, doi_index, year, class, &mut rec_rng));
    }
    Ok(graphs)
}

fn synth_record(
    p: &SynthParams,
    regime: &Regime,
    index: usize,
    doi_index: usize,
    year: i32,
    class: MaterialClass,
    rng: &mut ChaCha8Rng,
) -> ProcessGraph {
    let mut g = ProcessGraph::new(
        &format!("syn-{index:05}"),
        &format!("10.5555/syn.{doi_index:05}"),
        Some(year),
        class,
    );
    let len = rng.gen_range(p.route_length_range.0..=p.route_length_range.1);
    let route = regime.route(p, len, rng);
    let mut next_entity = 0usize;
    let mut new_material = |g: &mut ProcessGraph, label: String, form: &str| {
        let id = format!("m{next_entity}");
        next_entity += 1;
        g.material_entities
            .push(EntityNode::material(&id, &label).with_attr("form", form));
        id
    };

    let n_precursors = rng.gen_range(1..=3usize);
    let mut precursors = Vec::new();
    for _ in 0..n_precursors {
        let label = p.material_vocab.choose(rng).expect("checked").clone();
        let form = p.form_vocab.choose(rng).expect("checked").clone();
        precursors.push(new_material(&mut g, label, &form));
    }
    // Parallel branch: step 1 works on its own precursor, step 2 joins both.
    let branch = len >= 3 && rng.gen_bool(0.25);
    let mut positions: Vec<usize> = (0..len).collect();
    if branch && rng.gen_bool(0.5) {
        positions.swap(0, 1);
    }
    let mut outputs: Vec<String> = Vec::new();
    let mut tools_used = 0usize;
    for (step, label) in route.iter().enumerate() {
        let act_id = format!("a{step}");
        let mut act = ActivityNode::new(&act_id, label, positions[step]);
        for (key, values) in &p.condition_vocab {
            if rng.gen_bool(regime.reports[&(label.clone(), key.clone())]) {
                let value = if rng.gen_bool(p.condition_strength) {
                    regime.preferred_condition[&(label.clone(), key.clone())].clone()
                } else {
                    values.choose(rng).expect("checked").clone()
                };
                act = act.with_condition(key, &value);
            }
        }
        g.activities.push(act);

        let inputs: Vec<String> = match (step, branch) {
            (0, _) => precursors[..1.max(precursors.len() / 2)].to_vec(),
            (1, true) => {
                let extra = p.material_vocab.choose(rng).expect("checked").clone();
                let form = p.form_vocab.choose(rng).expect("checked").clone();
                let mut v = precursors[1.max(precursors.len() / 2)..].to_vec();
                v.push(new_material(&mut g, extra, &form));
                v
            }
            (2, true) => outputs.clone(),
            _ => {
                let mut v = vec![outputs.last().expect("previous step output").clone()];
                if step == 1 && precursors.len() > 1 {
                    v.extend(precursors[1.max(precursors.len() / 2)..].iter().cloned());
                }
                v
            }
        };
        for e in inputs {
            g.usage_edges.push((e, act_id.clone()));
        }
        if rng.gen_bool(0.6) {
            let tool = if rng.gen_bool(0.8) {
                regime.preferred_tool[label].clone()
            } else {
                p.tool_vocab.choose(rng).expect("checked").clone()
            };
            let tool_id = format!("t{tools_used}");
            tools_used += 1;
            g.tool_entities.push(EntityNode::tool(&tool_id, &tool));
            g.usage_edges.push((tool_id, act_id.clone()));
        }
        let is_last = step + 1 == len;
        let out_label = if is_last {
            p.material_vocab.choose(rng).expect("checked").to_uppercase()
        } else {
            format!("{label} intermediate")
        };
        let out = new_material(&mut g, out_label, &regime.output_form[label].clone());
        g.generation_edges.push((act_id, out.clone()));
        if branch && step == 2 {
            outputs.clear();
        }
        outputs.push(out);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provgraph::{finish_graph, Role};

    #[test]
    fn empty_and_invalid() {
        let p = SynthParams {
            n_records: 0,
            ..SynthParams::default()
        };
        assert!(generate_synthetic_corpus(&p, 1).unwrap().is_empty());
        let bad = SynthParams {
            route_length_range: (0, 3),
            ..SynthParams::default()
        };
        assert!(matches!(generate_synthetic_corpus(&bad, 1), Err(Error::InvalidParams(_))));
        let bad = SynthParams {
            activity_vocab: vec![],
            ..SynthParams::default()
        };
        assert!(generate_synthetic_corpus(&bad, 1).is_err());
    }

    #[test]
    fn deterministic() {
        let p = SynthParams {
            n_records: 40,
            ..SynthParams::default()
        };
        let a = serde_json::to_string(&generate_synthetic_corpus(&p, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_synthetic_corpus(&p, 9).unwrap()).unwrap();
        let c = serde_json::to_string(&generate_synthetic_corpus(&p, 10).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn class_fractions_follow_mix() {
        let p = SynthParams::default();
        let graphs = generate_synthetic_corpus(&p, 3).unwrap();
        assert_eq!(graphs.len(), 200);
        for (class, target) in &p.class_mix {
            let observed = graphs.iter().filter(|g| g.material_class == *class).count() as f64 / 200.0;
            assert!((observed - target).abs() <= 0.05, "{class:?}: {observed} vs {target}");
        }
    }

    #[test]
    fn graphs_compile_cleanly() {
        let p = SynthParams {
            n_records: 120,
            ..SynthParams::default()
        };
        for g in generate_synthetic_corpus(&p, 5).unwrap() {
            g.validate_edges().unwrap();
            let g = finish_graph(g).unwrap();
            assert_eq!(g.ordered_activity_ids.len(), g.activities.len());
            assert!(!g.material_labels_with_role(Role::Precursor).is_empty());
            assert!(!g.material_labels_with_role(Role::Product).is_empty());
            let year = g.year.unwrap();
            assert!((2005..=2024).contains(&year));
        }
    }

    #[test]
    fn dois_share_metadata() {
        let graphs = generate_synthetic_corpus(&SynthParams::default(), 11).unwrap();
        let mut by_doi: BTreeMap<&str, Vec<&ProcessGraph>> = BTreeMap::new();
        for g in &graphs {
            by_doi.entry(&g.doi).or_default().push(g);
        }
        for group in by_doi.values() {
            assert!(group.windows(2).all(|w| w[0].year == w[1].year && w[0].material_class == w[1].material_class));
        }
    }
}
