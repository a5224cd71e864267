use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{route_string, tuple_string};
use crate::provgraph::{canonical_label, ProcessGraph};
use crate::{Error, Result};

pub type Counts = BTreeMap<String, u64>;

/// Corpus-observed values with occurrence counts, global and conditioned on
/// activity label or form transition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistractorPools {
    pub routes: Counts,
    pub activity_labels: Counts,
    pub tool_labels: Counts,
    pub material_forms: Counts,
    pub condition_values: BTreeMap<String, Counts>,
    pub condition_tuples: Counts,
    pub successors: BTreeMap<String, Counts>,
    pub predecessors: BTreeMap<String, Counts>,
    pub condition_values_by_activity: BTreeMap<String, BTreeMap<String, Counts>>,
    pub condition_tuples_by_activity: BTreeMap<String, Counts>,
    pub tools_by_activity: BTreeMap<String, Counts>,
    /// Activity labels keyed by `"<input form> -> <output form>"`.
    pub activities_by_form_transition: BTreeMap<String, Counts>,
}

fn bump(counts: &mut Counts, key: &str) {
    *counts.entry(key.to_string()).or_default() += 1;
}

fn merge_counts(into: &mut Counts, from: Counts) {
    for (k, v) in from {
        *into.entry(k).or_default() += v;
    }
}

fn merge_nested(into: &mut BTreeMap<String, Counts>, from: BTreeMap<String, Counts>) {
    for (k, v) in from {
        merge_counts(into.entry(k).or_default(), v);
    }
}

impl DistractorPools {
    fn observe(g: &ProcessGraph) -> Self {
        let mut p = Self::default();
        let route = g.route_labels();
        bump(&mut p.routes, &route_string(&route));
        for w in route.windows(2) {
            bump(p.successors.entry(w[0].clone()).or_default(), &w[1]);
            bump(p.predecessors.entry(w[1].clone()).or_default(), &w[0]);
        }
        for act in g.ordered_activities() {
            let label = canonical_label(&act.label);
            bump(&mut p.activity_labels, &label);
            for (key, value) in &act.conditions {
                bump(p.condition_values.entry(key.clone()).or_default(), value);
                bump(
                    p.condition_values_by_activity
                        .entry(label.clone())
                        .or_default()
                        .entry(key.clone())
                        .or_default(),
                    value,
                );
            }
            if let Some(t) = tuple_string(&act.conditions) {
                bump(&mut p.condition_tuples, &t);
                bump(p.condition_tuples_by_activity.entry(label.clone()).or_default(), &t);
            }
            let inputs = g.inputs_of(&act.id);
            for tool in inputs.iter().filter(|e| e.kind == crate::provgraph::EntityKind::Tool) {
                let t = canonical_label(&tool.label);
                bump(&mut p.tool_labels, &t);
                bump(p.tools_by_activity.entry(label.clone()).or_default(), &t);
            }
            let in_forms: Vec<&str> = inputs.iter().filter_map(|e| e.form()).collect();
            let outputs = g.outputs_of(&act.id);
            for out_form in outputs.iter().filter_map(|e| e.form()) {
                for in_form in &in_forms {
                    let key = format!("{} -> {}", canonical_label(in_form), canonical_label(out_form));
                    bump(p.activities_by_form_transition.entry(key).or_default(), &label);
                }
            }
        }
        // Tools never attached to an activity still count as observed tool labels.
        for tool in &g.tool_entities {
            if !g.usage_edges.iter().any(|(e, _)| *e == tool.id) {
                bump(&mut p.tool_labels, &canonical_label(&tool.label));
            }
        }
        for e in &g.material_entities {
            if let Some(form) = e.form() {
                bump(&mut p.material_forms, &canonical_label(form));
            }
        }
        p
    }

    fn merge(mut self, other: Self) -> Self {
        merge_counts(&mut self.routes, other.routes);
        merge_counts(&mut self.activity_labels, other.activity_labels);
        merge_counts(&mut self.tool_labels, other.tool_labels);
        merge_counts(&mut self.material_forms, other.material_forms);
        merge_nested(&mut self.condition_values, other.condition_values);
        merge_counts(&mut self.condition_tuples, other.condition_tuples);
        merge_nested(&mut self.successors, other.successors);
        merge_nested(&mut self.predecessors, other.predecessors);
        for (k, v) in other.condition_values_by_activity {
            merge_nested(self.condition_values_by_activity.entry(k).or_default(), v);
        }
        merge_nested(&mut self.condition_tuples_by_activity, other.condition_tuples_by_activity);
        merge_nested(&mut self.tools_by_activity, other.tools_by_activity);
        merge_nested(&mut self.activities_by_form_transition, other.activities_by_form_transition);
        self
    }
}

/// Builds pools from ordered graphs as a parallel reduction.
pub fn build_candidate_pools(corpus: &[ProcessGraph]) -> Result<DistractorPools> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus
        .par_iter()
        .map(DistractorPools::observe)
        .reduce(DistractorPools::default, DistractorPools::merge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provgraph::{finish_graph, ActivityNode, EntityNode, MaterialClass};

    fn two_step(label_a: &str, label_b: &str, with_atmosphere: bool) -> ProcessGraph {
        let mut g = ProcessGraph::new("g", "d", Some(2019), MaterialClass::Other);
        g.material_entities.push(EntityNode::material("p", "X").with_attr("form", "Powder"));
        g.material_entities.push(EntityNode::material("i", "Y").with_attr("form", "pellet"));
        g.material_entities.push(EntityNode::material("o", "Z"));
        g.tool_entities.push(EntityNode::tool("t", "Ball Mill"));
        let mut a = ActivityNode::new("a", label_a, 0).with_condition("duration", "2 h");
        if with_atmosphere {
            a = a.with_condition("temperature", "25 °C").with_condition("atmosphere", "Ar");
        }
        g.activities.push(a);
        g.activities.push(ActivityNode::new("b", label_b, 1).with_condition("temperature", "900 °C"));
        g.usage_edges = vec![("p".into(), "a".into()), ("t".into(), "a".into()), ("i".into(), "b".into())];
        g.generation_edges = vec![("a".into(), "i".into()), ("b".into(), "o".into())];
        finish_graph(g).unwrap()
    }

    #[test]
    fn single_graph_pools() {
        let pools = build_candidate_pools(&[two_step("Mill", "sinter", false)]).unwrap();
        assert_eq!(pools.routes.keys().collect::<Vec<_>>(), ["mill -> sinter"]);
        assert_eq!(pools.activity_labels.keys().collect::<Vec<_>>(), ["mill", "sinter"]);
        assert!(pools.condition_values.get("atmosphere").is_none());
        assert!(pools.condition_tuples.is_empty());
        assert_eq!(pools.tool_labels["ball mill"], 1);
        assert_eq!(pools.successors["mill"]["sinter"], 1);
        assert_eq!(pools.activities_by_form_transition["powder -> pellet"]["mill"], 1);
    }

    #[test]
    fn counts_accumulate() {
        let corpus = vec![
            two_step("mill", "sinter", true),
            two_step("mill", "anneal", false),
            two_step("mill", "sinter", false),
        ];
        let pools = build_candidate_pools(&corpus).unwrap();
        assert_eq!(pools.routes["mill -> sinter"], 2);
        assert_eq!(pools.routes["mill -> anneal"], 1);
        assert_eq!(pools.activity_labels["mill"], 3);
        assert_eq!(pools.condition_values["temperature"]["900 °c"], 3);
        assert_eq!(pools.condition_values["temperature"]["25 °c"], 1);
        assert_eq!(pools.condition_tuples.len(), 1);
        assert_eq!(pools.condition_tuples_by_activity["mill"].len(), 1);
        assert_eq!(pools.material_forms["powder"], 3);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(build_candidate_pools(&[]), Err(Error::EmptyCorpus)));
    }
}
