use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use super::{EntityKind, ProcessGraph, Role};
use crate::{Error, Result};

/// Ordered activity pairs `(before, after)`.
pub type Precedence = BTreeSet<(String, String)>;

/// Fills `role` on every entity from edge topology alone.
pub fn assign_roles(mut g: ProcessGraph) -> ProcessGraph {
    let used: BTreeSet<&str> = g.usage_edges.iter().map(|(e, _)| e.as_str()).collect();
    let generated: BTreeSet<&str> = g.generation_edges.iter().map(|(_, e)| e.as_str()).collect();
    let roles: Vec<Role> = g
        .material_entities
        .iter()
        .map(|e| {
            match (generated.contains(e.id.as_str()), used.contains(e.id.as_str())) {
                (false, true) => Role::Precursor,
                (true, true) => Role::Intermediate,
                (true, false) => Role::Product,
                (false, false) => Role::Unconnected,
            }
        })
        .collect();
    for (node, role) in g.material_entities.iter_mut().zip(roles) {
        node.role = Some(role);
    }
    for node in &mut g.tool_entities {
        debug_assert_eq!(node.kind, EntityKind::Tool);
        node.role = Some(Role::Tool);
    }
    g
}

/// `(a_i, a_j)` whenever an entity generated by `a_i` is used by `a_j`.
pub fn infer_precedence(g: &ProcessGraph) -> Result<Precedence> {
    let mut producers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, e) in &g.generation_edges {
        producers.entry(e.as_str()).or_default().push(a.as_str());
    }
    let mut prec = Precedence::new();
    for (e, consumer) in &g.usage_edges {
        for producer in producers.get(e.as_str()).into_iter().flatten() {
            if *producer == consumer {
                return Err(Error::CyclicPrecedence {
                    record_id: g.record_id.clone(),
                });
            }
            prec.insert((producer.to_string(), consumer.clone()));
        }
    }
    Ok(prec)
}

/// Kahn's algorithm with ascending `source_position` as the priority among
/// activities whose constraints are all satisfied.
pub fn order_activities(g: &ProcessGraph, prec: &Precedence) -> Result<Vec<String>> {
    let index: BTreeMap<&str, usize> = g
        .activities
        .iter()
        .enumerate()
        .map(|(i, a)| (a.id.as_str(), i))
        .collect();
    let n = g.activities.len();
    let mut indegree = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in prec {
        let (Some(&i), Some(&j)) = (index.get(a.as_str()), index.get(b.as_str())) else {
            continue;
        };
        succ[i].push(j);
        indegree[j] += 1;
    }
    let key = |i: usize| (g.activities[i].source_position, i);
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).filter(|&i| indegree[i] == 0).map(|i| Reverse(key(i))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, i))) = ready.pop() {
        order.push(g.activities[i].id.clone());
        for &j in &succ[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(Reverse(key(j)));
            }
        }
    }
    if order.len() != n {
        return Err(Error::CyclicPrecedence {
            record_id: g.record_id.clone(),
        });
    }
    Ok(order)
}
