use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pools::Counts;
use super::{
    order_string, route_string, satisfies, tuple_string, BenchItem, DistractorPools, MaterialRef,
    Provenance, Question, StepView, TaskGenConfig, TaskKind, MASK,
};
use crate::provgraph::{canonical_label, infer_precedence, EntityKind, ProcessGraph, Role};
use crate::{seed, Error, Result};

/// An item that could not be emitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub graph_id: String,
    pub task: Option<TaskKind>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Instantiated {
    pub items: Vec<BenchItem>,
    pub skipped: Vec<SkipRecord>,
}

fn weighted(counts: &Counts) -> Vec<(String, f64)> {
    counts.iter().map(|(k, v)| (k.clone(), *v as f64)).collect()
}

/// Samples `n` distinct strings, weighted, none of them in `exclude`.
fn sample(pool: &[(String, f64)], exclude: &BTreeSet<String>, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<String>> {
    let eligible: Vec<&(String, f64)> = pool
        .iter()
        .filter(|(s, w)| !exclude.contains(s) && *w > 0.0)
        .collect();
    if eligible.len() < n {
        return None;
    }
    let chosen = eligible
        .choose_multiple_weighted(rng, n, |(_, w)| *w)
        .ok()?
        .map(|(s, _)| s.clone())
        .collect();
    Some(chosen)
}

/// Uses the context-conditioned pool when it alone can supply `n`
/// distractors, otherwise the global pool.
fn sample_conditioned(
    conditioned: Option<&Counts>,
    global: &Counts,
    exclude: &BTreeSet<String>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<String>> {
    if let Some(sub) = conditioned {
        let eligible = sub.keys().filter(|k| !exclude.contains(*k)).count();
        if eligible >= n {
            return sample(&weighted(sub), exclude, n, rng);
        }
    }
    sample(&weighted(global), exclude, n, rng)
}

struct Ctx<'a> {
    g: &'a ProcessGraph,
    pools: &'a DistractorPools,
    cfg: &'a TaskGenConfig,
    route: Vec<String>,
    ordered_ids: Vec<String>,
    out: Instantiated,
}

impl<'a> Ctx<'a> {
    fn item_rng(&self, task: TaskKind, ordinal: usize) -> ChaCha8Rng {
        seed::rng(self.cfg.seed, &[&self.g.record_id, task.code(), &ordinal.to_string()])
    }

    fn select_rng(&self, task: TaskKind) -> ChaCha8Rng {
        seed::rng(self.cfg.seed, &[&self.g.record_id, task.code(), "select"])
    }

    fn skip(&mut self, task: TaskKind, reason: impl Into<String>) {
        self.out.skipped.push(SkipRecord {
            graph_id: self.g.record_id.clone(),
            task: Some(task),
            reason: reason.into(),
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        task: TaskKind,
        ordinal: usize,
        question: Question,
        gold: String,
        distractors: Vec<String>,
        activity_ids: Vec<String>,
        rng: &mut ChaCha8Rng,
    ) {
        let mut options = distractors;
        options.shuffle(rng);
        let gold_index = rng.gen_range(0..=options.len());
        options.insert(gold_index, gold);
        debug_assert_eq!(options.len(), self.cfg.k_options);
        self.out.items.push(BenchItem {
            item_id: format!("{}/{}/{}", self.g.record_id, task.code(), ordinal),
            task,
            question,
            options,
            gold_index,
            graph_id: self.g.record_id.clone(),
            doi: self.g.doi.clone(),
            year: self.g.year,
            material_class: self.g.material_class,
            provenance: Provenance { activity_ids },
        });
    }

    fn k(&self) -> usize {
        self.cfg.k_options - 1
    }

    fn target_question(&self, position: usize) -> Question {
        let act = self.g.activity(&self.ordered_ids[position]).expect("ordered id exists");
        let inputs: Vec<_> = self
            .g
            .inputs_of(&act.id)
            .into_iter()
            .filter(|e| e.kind == EntityKind::Material)
            .collect();
        Question {
            route: self.route.clone(),
            step_index: Some(position),
            step_inputs: inputs.iter().map(|e| canonical_label(&e.label)).collect(),
            step_input_forms: inputs
                .iter()
                .filter_map(|e| e.form().map(canonical_label))
                .collect(),
            ..Question::default()
        }
    }

    fn a1(&mut self) {
        let task = TaskKind::A1RouteRetrieval;
        if self.cfg.caps.a1 == 0 {
            return;
        }
        let gold = route_string(&self.route);
        let gold_len = self.route.len() as f64;
        // Length-biased: routes closer in length to the gold are more likely.
        let pool: Vec<(String, f64)> = self
            .pools
            .routes
            .iter()
            .map(|(r, c)| {
                let len = r.split(super::ROUTE_SEP).count() as f64;
                (r.clone(), *c as f64 / (1.0 + (len - gold_len).abs()))
            })
            .collect();
        let mut rng = self.item_rng(task, 0);
        let exclude = BTreeSet::from([gold.clone()]);
        match sample(&pool, &exclude, self.k(), &mut rng) {
            Some(d) => {
                let question = Question {
                    products: self.g.material_labels_with_role(Role::Product),
                    precursors: self.g.material_labels_with_role(Role::Precursor),
                    ..Question::default()
                };
                let ids = self.ordered_ids.clone();
                self.emit(task, 0, question, gold, d, ids, &mut rng);
            }
            None => self.skip(task, "route pool exhausted"),
        }
    }

    fn a2(&mut self) {
        let task = TaskKind::A2MissingStep;
        let n = self.route.len();
        if n < 2 {
            return;
        }
        let mut positions: Vec<usize> = (0..n).collect();
        positions.shuffle(&mut self.select_rng(task));
        positions.truncate(self.cfg.caps.a2);
        positions.sort_unstable();
        for (ordinal, pos) in positions.into_iter().enumerate() {
            let gold = self.route[pos].clone();
            let mut conditioned = Counts::new();
            if pos > 0 {
                if let Some(s) = self.pools.successors.get(&self.route[pos - 1]) {
                    conditioned.extend(s.iter().map(|(k, v)| (k.clone(), *v)));
                }
            }
            if pos + 1 < n {
                for (k, v) in self.pools.predecessors.get(&self.route[pos + 1]).into_iter().flatten() {
                    *conditioned.entry(k.clone()).or_default() += v;
                }
            }
            let mut rng = self.item_rng(task, ordinal);
            let exclude = BTreeSet::from([gold.clone()]);
            match sample_conditioned(Some(&conditioned), &self.pools.activity_labels, &exclude, self.k(), &mut rng) {
                Some(d) => {
                    let mut route = self.route.clone();
                    route[pos] = MASK.to_string();
                    let question = Question {
                        route,
                        step_index: Some(pos),
                        route_length: Some(n),
                        ..Question::default()
                    };
                    let ids = vec![self.ordered_ids[pos].clone()];
                    self.emit(task, ordinal, question, gold, d, ids, &mut rng);
                }
                None => self.skip(task, format!("activity pool exhausted at position {pos}")),
            }
        }
    }

    fn a3(&mut self) {
        let task = TaskKind::A3NextActivity;
        let n = self.route.len();
        if n < 2 {
            return;
        }
        let mut prefixes: Vec<usize> = (1..n).collect();
        prefixes.shuffle(&mut self.select_rng(task));
        prefixes.truncate(self.cfg.caps.a3);
        prefixes.sort_unstable();
        for (ordinal, p) in prefixes.into_iter().enumerate() {
            let gold = self.route[p].clone();
            let mut rng = self.item_rng(task, ordinal);
            let exclude = BTreeSet::from([gold.clone()]);
            let conditioned = self.pools.successors.get(&self.route[p - 1]);
            match sample_conditioned(conditioned, &self.pools.activity_labels, &exclude, self.k(), &mut rng) {
                Some(d) => {
                    let question = Question {
                        route: self.route[..p].to_vec(),
                        ..Question::default()
                    };
                    let ids = vec![self.ordered_ids[p].clone()];
                    self.emit(task, ordinal, question, gold, d, ids, &mut rng);
                }
                None => self.skip(task, format!("activity pool exhausted after prefix {p}")),
            }
        }
    }

    fn b1(&mut self) {
        let task = TaskKind::B1ConditionPrediction;
        let mut pairs: Vec<(usize, String)> = Vec::new();
        for (pos, id) in self.ordered_ids.iter().enumerate() {
            let act = self.g.activity(id).expect("ordered id exists");
            pairs.extend(act.conditions.keys().map(|k| (pos, k.clone())));
        }
        pairs.shuffle(&mut self.select_rng(task));
        pairs.truncate(self.cfg.caps.b1);
        pairs.sort();
        for (ordinal, (pos, key)) in pairs.into_iter().enumerate() {
            let act = self.g.activity(&self.ordered_ids[pos]).expect("ordered id exists");
            let gold = act.conditions[&key].clone();
            let label = canonical_label(&act.label);
            let mut rng = self.item_rng(task, ordinal);
            let exclude = BTreeSet::from([gold.clone()]);
            let empty = Counts::new();
            let global = self.pools.condition_values.get(&key).unwrap_or(&empty);
            let conditioned = self
                .pools
                .condition_values_by_activity
                .get(&label)
                .and_then(|m| m.get(&key));
            match sample_conditioned(conditioned, global, &exclude, self.k(), &mut rng) {
                Some(d) => {
                    let mut question = self.target_question(pos);
                    question.condition_key = Some(key.clone());
                    let ids = vec![act.id.clone()];
                    self.emit(task, ordinal, question, gold, d, ids, &mut rng);
                }
                None => self.skip(task, format!("condition pool for {key} exhausted")),
            }
        }
    }

    fn b2(&mut self) {
        let task = TaskKind::B2FullConditionSet;
        let mut steps: Vec<usize> = (0..self.ordered_ids.len())
            .filter(|&p| {
                let act = self.g.activity(&self.ordered_ids[p]).expect("ordered id exists");
                tuple_string(&act.conditions).is_some()
            })
            .collect();
        steps.shuffle(&mut self.select_rng(task));
        steps.truncate(self.cfg.caps.b2);
        steps.sort_unstable();
        for (ordinal, pos) in steps.into_iter().enumerate() {
            let act = self.g.activity(&self.ordered_ids[pos]).expect("ordered id exists");
            let gold = tuple_string(&act.conditions).expect("filtered on complete tuples");
            let label = canonical_label(&act.label);
            let mut rng = self.item_rng(task, ordinal);
            let exclude = BTreeSet::from([gold.clone()]);
            let conditioned = self.pools.condition_tuples_by_activity.get(&label);
            match sample_conditioned(conditioned, &self.pools.condition_tuples, &exclude, self.k(), &mut rng) {
                Some(d) => {
                    let question = self.target_question(pos);
                    let ids = vec![act.id.clone()];
                    self.emit(task, ordinal, question, gold, d, ids, &mut rng);
                }
                None => self.skip(task, "condition tuple pool exhausted"),
            }
        }
    }

    fn c1(&mut self) {
        let task = TaskKind::C1ToolSelection;
        let mut steps: Vec<(usize, BTreeSet<String>)> = Vec::new();
        for (pos, id) in self.ordered_ids.iter().enumerate() {
            let tools: BTreeSet<String> = self
                .g
                .inputs_of(id)
                .into_iter()
                .filter(|e| e.kind == EntityKind::Tool)
                .map(|e| canonical_label(&e.label))
                .collect();
            if !tools.is_empty() {
                steps.push((pos, tools));
            }
        }
        steps.shuffle(&mut self.select_rng(task));
        steps.truncate(self.cfg.caps.c1);
        steps.sort();
        for (ordinal, (pos, tools)) in steps.into_iter().enumerate() {
            let mut rng = self.item_rng(task, ordinal);
            let listed: Vec<&String> = tools.iter().collect();
            let gold = (*listed.choose(&mut rng).expect("non-empty")).clone();
            match sample(&weighted(&self.pools.tool_labels), &tools, self.k(), &mut rng) {
                Some(d) => {
                    let question = self.target_question(pos);
                    let ids = vec![self.ordered_ids[pos].clone()];
                    self.emit(task, ordinal, question, gold, d, ids, &mut rng);
                }
                None => self.skip(task, "tool pool exhausted"),
            }
        }
    }

    fn d(&mut self) {
        let task = TaskKind::DProcessOrdering;
        let n = self.ordered_ids.len();
        if n < 2 || self.cfg.caps.d == 0 {
            return;
        }
        let mut rng = self.item_rng(task, 0);
        // Shuffled presentation: step k shows activity shuffled[k].
        let mut shuffled = self.ordered_ids.clone();
        shuffled.shuffle(&mut rng);
        let index_of: BTreeMap<&str, usize> =
            shuffled.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut aliases: BTreeMap<String, String> = BTreeMap::new();
        let mut alias = |id: &str| -> String {
            let next = aliases.len() + 1;
            aliases.entry(id.to_string()).or_insert_with(|| format!("x{next}")).clone()
        };
        let mut steps = Vec::with_capacity(n);
        for id in &shuffled {
            let act = self.g.activity(id).expect("ordered id exists");
            let mut view = StepView {
                label: canonical_label(&act.label),
                inputs: Vec::new(),
                outputs: Vec::new(),
            };
            for e in self.g.inputs_of(id).into_iter().filter(|e| e.kind == EntityKind::Material) {
                view.inputs.push(MaterialRef {
                    alias: alias(&e.id),
                    label: canonical_label(&e.label),
                });
            }
            for e in self.g.outputs_of(id).into_iter().filter(|e| e.kind == EntityKind::Material) {
                view.outputs.push(MaterialRef {
                    alias: alias(&e.id),
                    label: canonical_label(&e.label),
                });
            }
            steps.push(view);
        }
        let constraints: Vec<(usize, usize)> = match infer_precedence(self.g) {
            Ok(prec) => prec
                .iter()
                .map(|(a, b)| (index_of[a.as_str()], index_of[b.as_str()]))
                .collect(),
            Err(_) => return self.skip(task, "cyclic precedence"),
        };
        let gold_order: Vec<usize> = self.ordered_ids.iter().map(|id| index_of[id.as_str()]).collect();
        let violating = violating_orders(n, &constraints, self.k(), &mut rng);
        if violating.len() < self.k() {
            return self.skip(task, "too few constraint-violating permutations");
        }
        let chosen: Vec<Vec<usize>> = violating
            .choose_multiple(&mut rng, self.k())
            .cloned()
            .collect();
        let gold = order_string(&gold_order, &steps);
        let distractors = chosen.iter().map(|o| order_string(o, &steps)).collect();
        let question = Question {
            steps,
            ..Question::default()
        };
        self.emit(task, 0, question, gold, distractors, shuffled, &mut rng);
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Permutations violating at least one constraint: exhaustive for up to
/// seven steps, sampled beyond that.
fn violating_orders(n: usize, constraints: &[(usize, usize)], want: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    if n <= 7 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        loop {
            if !satisfies(&perm, constraints) {
                out.push(perm.clone());
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        return out;
    }
    let mut seen = BTreeSet::new();
    for _ in 0..(want * 200) {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        if !satisfies(&perm, constraints) {
            seen.insert(perm);
        }
        if seen.len() >= want * 4 {
            break;
        }
    }
    seen.into_iter().collect()
}

/// Emits every instantiable item for one graph.
pub fn instantiate_tasks(g: &ProcessGraph, pools: &DistractorPools, cfg: &TaskGenConfig) -> Result<Instantiated> {
    if cfg.k_options < 2 {
        return Err(Error::InvalidParams("k_options must be at least 2".into()));
    }
    let has_precursor = g.material_entities.iter().any(|e| e.role == Some(Role::Precursor));
    if g.activities.is_empty() || !has_precursor {
        return Err(Error::RetentionFilterFailed(g.record_id.clone()));
    }
    let mut ctx = Ctx {
        g,
        pools,
        cfg,
        route: g.route_labels(),
        ordered_ids: g.ordered_activities().iter().map(|a| a.id.clone()).collect(),
        out: Instantiated::default(),
    };
    ctx.a1();
    ctx.a2();
    ctx.a3();
    ctx.b1();
    ctx.b2();
    ctx.c1();
    ctx.d();
    Ok(ctx.out)
}

/// Instantiates a whole corpus in parallel. Graphs failing the retention
/// filter are skipped and logged; output order follows corpus order.
pub fn generate_benchmark(corpus: &[ProcessGraph], pools: &DistractorPools, cfg: &TaskGenConfig) -> Result<Instantiated> {
    if cfg.k_options < 2 {
        return Err(Error::InvalidParams("k_options must be at least 2".into()));
    }
    let parts: Vec<Instantiated> = corpus
        .par_iter()
        .map(|g| match instantiate_tasks(g, pools, cfg) {
            Ok(inst) => inst,
            Err(e) => Instantiated {
                items: Vec::new(),
                skipped: vec![SkipRecord {
                    graph_id: g.record_id.clone(),
                    task: None,
                    reason: e.to_string(),
                }],
            },
        })
        .collect();
    let mut out = Instantiated::default();
    for p in parts {
        out.items.extend(p.items);
        out.skipped.extend(p.skipped);
    }
    Ok(out)
}
