use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{parse_order, route_string, satisfies, tuple_string, BenchItem, TaskKind, MASK};
use crate::provgraph::{canonical_label, ProcessGraph};
use crate::{Error, Result};

fn mismatch(item: &BenchItem, detail: impl Into<String>) -> Error {
    Error::GoldMismatch {
        item_id: item.item_id.clone(),
        detail: detail.into(),
    }
}

/// Recomputes the gold answer from the source graph and checks it sits at
/// `gold_index`; for ordering items also checks that every distractor
/// violates at least one precedence pair.
pub fn validate_item(item: &BenchItem, g: &ProcessGraph) -> Result<()> {
    if item.graph_id != g.record_id {
        return Err(mismatch(item, "item references a different graph"));
    }
    let distinct: BTreeSet<&String> = item.options.iter().collect();
    if distinct.len() != item.options.len() {
        return Err(mismatch(item, "options are not pairwise distinct"));
    }
    if item.gold_index >= item.options.len() {
        return Err(mismatch(item, "gold index out of range"));
    }
    let chosen = item.gold();
    let route: Vec<String> = g.ordered_activities().iter().map(|a| canonical_label(&a.label)).collect();
    let step_activity = |pos: usize| {
        let act = g.ordered_activities().get(pos).copied();
        act.ok_or_else(|| mismatch(item, format!("step {pos} out of range")))
    };
    match item.task {
        TaskKind::A1RouteRetrieval => {
            if chosen != route_string(&route) {
                return Err(mismatch(item, "route differs"));
            }
        }
        TaskKind::A2MissingStep => {
            let pos = item.question.step_index.ok_or_else(|| mismatch(item, "no masked index"))?;
            let expected = route.get(pos).ok_or_else(|| mismatch(item, "mask out of range"))?;
            if chosen != expected {
                return Err(mismatch(item, format!("masked step is {expected}")));
            }
            let visible_ok = item.question.route.len() == route.len()
                && item
                    .question
                    .route
                    .iter()
                    .zip(&route)
                    .enumerate()
                    .all(|(i, (q, r))| if i == pos { q == MASK } else { q == r });
            if !visible_ok {
                return Err(mismatch(item, "visible route differs from graph"));
            }
        }
        TaskKind::A3NextActivity => {
            let p = item.question.route.len();
            if p == 0 || p >= route.len() || item.question.route[..] != route[..p] {
                return Err(mismatch(item, "prefix is not a proper route prefix"));
            }
            if chosen != route[p] {
                return Err(mismatch(item, format!("next step is {}", route[p])));
            }
        }
        TaskKind::B1ConditionPrediction => {
            let pos = item.question.step_index.ok_or_else(|| mismatch(item, "no target step"))?;
            let key = item.question.condition_key.as_ref().ok_or_else(|| mismatch(item, "no condition key"))?;
            let act = step_activity(pos)?;
            match act.conditions.get(key) {
                Some(v) if v == chosen => {}
                other => return Err(mismatch(item, format!("{key} is {other:?}"))),
            }
        }
        TaskKind::B2FullConditionSet => {
            let pos = item.question.step_index.ok_or_else(|| mismatch(item, "no target step"))?;
            let act = step_activity(pos)?;
            if tuple_string(&act.conditions).as_deref() != Some(chosen) {
                return Err(mismatch(item, "condition tuple differs"));
            }
        }
        TaskKind::C1ToolSelection => {
            let pos = item.question.step_index.ok_or_else(|| mismatch(item, "no target step"))?;
            let act = step_activity(pos)?;
            let tools: BTreeSet<String> = g
                .usage_edges
                .iter()
                .filter(|(_, a)| *a == act.id)
                .filter_map(|(e, _)| g.tool_entities.iter().find(|t| t.id == *e))
                .map(|t| canonical_label(&t.label))
                .collect();
            if !tools.contains(chosen) {
                return Err(mismatch(item, "gold tool is not used by the step"));
            }
            if let Some(i) = item.options.iter().position(|o| o != chosen && tools.contains(o)) {
                return Err(mismatch(item, format!("option {i} is also a tool of the step")));
            }
        }
        TaskKind::DProcessOrdering => validate_order(item, g)?,
    }
    Ok(())
}

fn validate_order(item: &BenchItem, g: &ProcessGraph) -> Result<()> {
    let step_ids = &item.provenance.activity_ids;
    let n = g.activities.len();
    if step_ids.len() != n || item.question.steps.len() != n {
        return Err(mismatch(item, "step list does not cover every activity"));
    }
    let step_of: BTreeMap<&str, usize> = step_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    // Material flow recomputed from raw edges.
    let mut producer: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, e) in &g.generation_edges {
        producer.entry(e.as_str()).or_default().push(a.as_str());
    }
    let mut constraints = Vec::new();
    for (e, consumer) in &g.usage_edges {
        for p in producer.get(e.as_str()).into_iter().flatten() {
            let (Some(&i), Some(&j)) = (step_of.get(p), step_of.get(consumer.as_str())) else {
                return Err(mismatch(item, "provenance references unknown activity"));
            };
            constraints.push((i, j));
        }
    }
    let gold = parse_order(item.gold()).ok_or_else(|| mismatch(item, "gold is not an ordering"))?;
    let expected: Vec<usize> = g
        .ordered_activity_ids
        .iter()
        .map(|id| step_of.get(id.as_str()).copied().unwrap_or(usize::MAX))
        .collect();
    if gold != expected {
        return Err(mismatch(item, "gold ordering differs from the graph's order"));
    }
    for (i, option) in item.options.iter().enumerate() {
        if i == item.gold_index {
            continue;
        }
        let order = parse_order(option).ok_or_else(|| mismatch(item, format!("option {i} is not an ordering")))?;
        if satisfies(&order, &constraints) {
            return Err(Error::DistractorViolationMissing {
                item_id: item.item_id.clone(),
                option: i,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub checked: usize,
    pub valid: usize,
    pub failures: Vec<(String, String)>,
}

/// Validates every item against its source graph.
pub fn validate_all(items: &[BenchItem], graphs: &[ProcessGraph]) -> ValidityReport {
    let by_id: BTreeMap<&str, &ProcessGraph> = graphs.iter().map(|g| (g.record_id.as_str(), g)).collect();
    let mut report = ValidityReport::default();
    for item in items {
        report.checked += 1;
        let outcome = match by_id.get(item.graph_id.as_str()) {
            Some(g) => validate_item(item, g),
            None => Err(mismatch(item, "source graph missing")),
        };
        match outcome {
            Ok(()) => report.valid += 1,
            Err(e) => report.failures.push((item.item_id.clone(), e.to_string())),
        }
    }
    report
}
