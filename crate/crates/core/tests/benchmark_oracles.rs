mod common;

use std::collections::{BTreeMap, BTreeSet};

use matproc::provgraph::{canonical_label, EntityKind, MaterialClass, ProcessGraph};
use matproc::splitter::{contamination, split, split_by_type, Granularity, Partition, Protocol};
use matproc::taskgen::{
    parse_order, route_string, satisfies, tuple_string, visible_constraints, TaskCaps, TaskKind, MASK,
};

fn route(g: &ProcessGraph) -> Vec<String> {
    g.ordered_activities().iter().map(|a| canonical_label(&a.label)).collect()
}

fn step_tools(g: &ProcessGraph, pos: usize) -> BTreeSet<String> {
    let id = &g.ordered_activity_ids[pos];
    g.inputs_of(id)
        .into_iter()
        .filter(|e| e.kind == EntityKind::Tool)
        .map(|e| canonical_label(&e.label))
        .collect()
}

#[test]
fn every_gold_is_derived_from_its_graph() {
    let (graphs, items) = common::synthetic(160, 31);
    let by_id: BTreeMap<&str, &ProcessGraph> = graphs.iter().map(|g| (g.record_id.as_str(), g)).collect();
    let ids: BTreeSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
    assert_eq!(ids.len(), items.len(), "item ids are unique");

    for item in &items {
        let g = by_id[item.graph_id.as_str()];
        let r = route(g);
        let q = &item.question;
        assert_eq!(item.options.len(), 4, "{}", item.item_id);
        let distinct: BTreeSet<&String> = item.options.iter().collect();
        assert_eq!(distinct.len(), 4, "{}", item.item_id);
        assert_eq!(item.doi, g.doi);
        assert_eq!(item.year, g.year);
        let gold = item.gold().to_string();
        match item.task {
            TaskKind::A1RouteRetrieval => assert_eq!(gold, route_string(&r)),
            TaskKind::A2MissingStep => {
                let pos = q.step_index.unwrap();
                assert_eq!(gold, r[pos]);
                assert_eq!(q.route[pos], MASK);
                assert_eq!(q.route_length, Some(r.len()));
                for (i, l) in q.route.iter().enumerate() {
                    if i != pos {
                        assert_eq!(*l, r[i]);
                    }
                }
            }
            TaskKind::A3NextActivity => {
                let p = q.route.len();
                assert!(p >= 1 && p < r.len());
                assert_eq!(q.route, r[..p]);
                assert_eq!(gold, r[p]);
            }
            TaskKind::B1ConditionPrediction => {
                let pos = q.step_index.unwrap();
                let act = g.activity(&g.ordered_activity_ids[pos]).unwrap();
                assert_eq!(gold, act.conditions[q.condition_key.as_ref().unwrap()]);
                assert_eq!(q.route, r);
            }
            TaskKind::B2FullConditionSet => {
                let pos = q.step_index.unwrap();
                let act = g.activity(&g.ordered_activity_ids[pos]).unwrap();
                assert_eq!(Some(gold), tuple_string(&act.conditions));
            }
            TaskKind::C1ToolSelection => {
                let tools = step_tools(g, q.step_index.unwrap());
                assert!(tools.contains(&gold));
                for (i, o) in item.options.iter().enumerate() {
                    if i != item.gold_index {
                        assert!(!tools.contains(o), "distractor {o} is also a correct tool");
                    }
                }
            }
            TaskKind::DProcessOrdering => {
                let order = parse_order(&gold).unwrap();
                let shown: Vec<&str> = order.iter().map(|&k| item.provenance.activity_ids[k].as_str()).collect();
                assert_eq!(shown, g.ordered_activity_ids);
                let labels: Vec<&str> = order.iter().map(|&k| q.steps[k].label.as_str()).collect();
                assert_eq!(labels, r);
                let cons = visible_constraints(&q.steps);
                assert!(satisfies(&order, &cons));
                for (i, o) in item.options.iter().enumerate() {
                    if i != item.gold_index {
                        assert!(!satisfies(&parse_order(o).unwrap(), &cons), "distractor {o} is a valid order");
                    }
                }
            }
        }
    }
}

/// Emitted plus skipped items per (graph, task) equals what the graph can
/// support under the per-task caps.
#[test]
fn item_counts_are_conserved() {
    let (graphs, bench) = common::synthetic_with_skips(160, 32);
    let caps = TaskCaps::default();
    let mut seen: BTreeMap<(String, TaskKind), usize> = BTreeMap::new();
    for it in &bench.items {
        *seen.entry((it.graph_id.clone(), it.task)).or_default() += 1;
    }
    for s in &bench.skipped {
        if let Some(t) = s.task {
            *seen.entry((s.graph_id.clone(), t)).or_default() += 1;
        }
    }
    for g in &graphs {
        let n = g.ordered_activity_ids.len();
        let acts = g.ordered_activities();
        let pairs: usize = acts.iter().map(|a| a.conditions.len()).sum();
        let tuples = acts.iter().filter(|a| tuple_string(&a.conditions).is_some()).count();
        let tooled = (0..n).filter(|&p| !step_tools(g, p).is_empty()).count();
        let multi = usize::from(n >= 2);
        let expected = [
            (TaskKind::A1RouteRetrieval, caps.a1.min(1)),
            (TaskKind::A2MissingStep, multi * caps.a2.min(n)),
            (TaskKind::A3NextActivity, multi * caps.a3.min(n.saturating_sub(1))),
            (TaskKind::B1ConditionPrediction, caps.b1.min(pairs)),
            (TaskKind::B2FullConditionSet, caps.b2.min(tuples)),
            (TaskKind::C1ToolSelection, caps.c1.min(tooled)),
            (TaskKind::DProcessOrdering, multi * caps.d.min(1)),
        ];
        for (task, want) in expected {
            let got = seen.get(&(g.record_id.clone(), task)).copied().unwrap_or(0);
            assert_eq!(got, want, "{} {}", g.record_id, task.name());
        }
    }
}

#[test]
fn generation_is_seeded() {
    let (_, a) = common::synthetic(60, 5);
    let (_, b) = common::synthetic(60, 5);
    let (_, c) = common::synthetic(60, 6);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn gold_letter_is_not_predictable() {
    let (_, items) = common::synthetic(300, 8);
    let mut by_letter = [0usize; 4];
    for it in &items {
        by_letter[it.gold_index] += 1;
    }
    for c in by_letter {
        let share = c as f64 / items.len() as f64;
        assert!((share - 0.25).abs() < 0.03, "{by_letter:?}");
    }
}

#[test]
fn split_partitions_follow_their_rules() {
    let (_, items) = common::synthetic(200, 13);
    let n = items.len();
    for protocol in Protocol::ALL {
        let a = split(&items, protocol, 13).unwrap();
        assert_eq!(a.mapping.len(), n, "every item lands in exactly one partition");
        let counts: usize = Partition::ALL.iter().map(|p| a.select(&items, *p).len()).sum();
        assert_eq!(counts, n);
        for it in &items {
            let p = a.partition_of(&it.item_id).unwrap();
            let y = it.year.unwrap();
            let battery = it.material_class == MaterialClass::Battery;
            match protocol {
                Protocol::Random => assert_ne!(p, Partition::Excluded),
                Protocol::Year => {
                    let want = if y <= 2019 {
                        Partition::Train
                    } else if y == 2020 {
                        Partition::Dev
                    } else {
                        Partition::Test
                    };
                    assert_eq!(p, want);
                }
                Protocol::Type => assert_eq!(battery, p == Partition::Test),
                Protocol::Dual => {
                    let want = match (battery, y) {
                        (false, ..=2019) => Partition::Train,
                        (false, 2020) => Partition::Dev,
                        (true, 2021..) => Partition::Test,
                        _ => Partition::Excluded,
                    };
                    assert_eq!(p, want);
                }
            }
        }
    }

    let random = split(&items, Protocol::Random, 13).unwrap();
    assert_eq!(random.select(&items, Partition::Train).len(), (0.8 * n as f64).floor() as usize);
    assert_eq!(random.select(&items, Partition::Dev).len(), (0.1 * n as f64).floor() as usize);

    let by_doi = split_by_type(&items, MaterialClass::Battery, 0.1, 13, Granularity::Doi).unwrap();
    let train_dois: BTreeSet<&str> = by_doi.select(&items, Partition::Train).iter().map(|i| i.doi.as_str()).collect();
    assert!(by_doi.select(&items, Partition::Dev).iter().all(|i| !train_dois.contains(i.doi.as_str())));
}

#[test]
fn contamination_by_hand() {
    let (_, items) = common::synthetic(200, 14);
    let dual = split(&items, Protocol::Dual, 14).unwrap();
    let random = split(&items, Protocol::Random, 14).unwrap();
    let dois = |a: &matproc::splitter::SplitAssignment, p| -> BTreeSet<String> {
        a.select(&items, p).iter().map(|i| i.doi.clone()).collect()
    };
    let train = dois(&random, Partition::Train);
    let test = dois(&random, Partition::Test);
    let want = test.intersection(&train).count() as f64 / test.len() as f64;
    assert_eq!(contamination(&random, &random, &items).unwrap(), want);
    assert_eq!(contamination(&dual, &dual, &items).unwrap(), 0.0);
}
