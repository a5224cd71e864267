use std::collections::BTreeSet;

use matproc::provgraph::{
    assign_roles, finish_graph, infer_precedence, order_activities, ActivityNode, EntityNode, MaterialClass, ProcessGraph, Role,
};
use proptest::prelude::*;

/// Every permutation of `0..n`, in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..=p.len() {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

/// `rank[i]` hides the true execution order; flows only go from lower to
/// higher rank so the graph is acyclic.
fn dag(positions: &[usize], rank: &[usize], flows: &[(usize, usize)], loose: usize) -> ProcessGraph {
    let mut g = ProcessGraph::new("dag", "10.1/dag", Some(2020), MaterialClass::Other);
    for (i, p) in positions.iter().enumerate() {
        g.activities.push(ActivityNode::new(&format!("a{i}"), &format!("step{i}"), *p));
    }
    for (k, &(x, y)) in flows.iter().enumerate() {
        let (from, to) = if rank[x] < rank[y] { (x, y) } else { (y, x) };
        if from == to {
            continue;
        }
        let e = format!("m{k}");
        g.material_entities.push(EntityNode::material(&e, &e));
        g.generation_edges.push((format!("a{from}"), e.clone()));
        g.usage_edges.push((e, format!("a{to}")));
    }
    for i in 0..g.activities.len() {
        let e = format!("p{i}");
        g.material_entities.push(EntityNode::material(&e, &e));
        g.usage_edges.push((e, format!("a{i}")));
    }
    for j in 0..loose {
        let e = format!("loose{j}");
        g.material_entities.push(EntityNode::material(&e, &e));
    }
    g
}

fn graph_strategy() -> impl Strategy<Value = ProcessGraph> {
    (1usize..=6).prop_flat_map(|n| {
        (
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            proptest::collection::vec((0..n, 0..n), 0..10),
            0usize..3,
        )
            .prop_map(|(pos, rank, flows, loose)| dag(&pos, &rank, &flows, loose))
    })
}

proptest! {
    #[test]
    fn kahn_order_is_least_valid_permutation(g in graph_strategy()) {
        let prec = infer_precedence(&g).unwrap();
        let expected_prec: BTreeSet<(String, String)> = g
            .generation_edges
            .iter()
            .flat_map(|(a, e)| g.usage_edges.iter().filter(move |(u, _)| u == e).map(move |(_, b)| (a.clone(), b.clone())))
            .collect();
        prop_assert_eq!(&prec, &expected_prec);

        let n = g.activities.len();
        let index = |id: &str| g.activities.iter().position(|a| a.id == id).unwrap();
        let best = permutations(n)
            .into_iter()
            .filter(|perm| prec.iter().all(|(a, b)| {
                let pa = perm.iter().position(|&i| i == index(a)).unwrap();
                let pb = perm.iter().position(|&i| i == index(b)).unwrap();
                pa < pb
            }))
            .min_by_key(|perm| perm.iter().map(|&i| g.activities[i].source_position).collect::<Vec<_>>())
            .unwrap();
        let expected: Vec<String> = best.iter().map(|&i| g.activities[i].id.clone()).collect();
        prop_assert_eq!(order_activities(&g, &prec).unwrap(), expected);
    }

    #[test]
    fn roles_follow_edges(g in graph_strategy()) {
        let g = assign_roles(g);
        for e in &g.material_entities {
            let used = g.usage_edges.iter().any(|(x, _)| *x == e.id);
            let made = g.generation_edges.iter().any(|(_, x)| *x == e.id);
            let want = match (made, used) {
                (false, true) => Role::Precursor,
                (true, true) => Role::Intermediate,
                (true, false) => Role::Product,
                (false, false) => Role::Unconnected,
            };
            prop_assert_eq!(e.role, Some(want));
        }
    }
}

#[test]
fn hand_built_diamond() {
    // a0 feeds a1 and a2, both feed a3; a2 was written before a1.
    let mut g = ProcessGraph::new("diamond", "10.1/d", Some(2020), MaterialClass::Other);
    for (id, pos) in [("a0", 0), ("a1", 2), ("a2", 1), ("a3", 3)] {
        g.activities.push(ActivityNode::new(id, id, pos));
    }
    for id in ["p", "x", "y", "z", "w", "out"] {
        g.material_entities.push(EntityNode::material(id, id));
    }
    g.tool_entities.push(EntityNode::tool("t", "furnace"));
    g.usage_edges = [("p", "a0"), ("x", "a1"), ("y", "a2"), ("z", "a3"), ("w", "a3"), ("t", "a3")]
        .iter()
        .map(|(e, a)| (e.to_string(), a.to_string()))
        .collect();
    g.usage_edges.push(("x".into(), "a2".into()));
    g.generation_edges = [("a0", "x"), ("a1", "z"), ("a2", "w"), ("a3", "out")]
        .iter()
        .map(|(a, e)| (a.to_string(), e.to_string()))
        .collect();
    let g = finish_graph(g).unwrap();
    assert_eq!(g.ordered_activity_ids, ["a0", "a2", "a1", "a3"]);
    assert_eq!(g.material_labels_with_role(Role::Precursor), ["p", "y"]);
    assert_eq!(g.material_labels_with_role(Role::Intermediate), ["w", "x", "z"]);
    assert_eq!(g.material_labels_with_role(Role::Product), ["out"]);
    assert_eq!(g.tool_labels(), ["furnace"]);
}

#[test]
fn self_loop_and_cycle_are_rejected() {
    let mut g = ProcessGraph::new("loop", "10.1/l", None, MaterialClass::Other);
    g.activities.push(ActivityNode::new("a", "heat", 0));
    g.material_entities.push(EntityNode::material("m", "m"));
    g.usage_edges.push(("m".into(), "a".into()));
    g.generation_edges.push(("a".into(), "m".into()));
    assert!(finish_graph(g).is_err());

    let mut g = dag(&[0, 1], &[0, 1], &[(0, 1)], 0);
    g.material_entities.push(EntityNode::material("back", "back"));
    g.generation_edges.push(("a1".into(), "back".into()));
    g.usage_edges.push(("back".into(), "a0".into()));
    assert!(finish_graph(g).is_err());
}
