mod common;

use std::collections::BTreeSet;

use matproc::memory::StepWeights;
use matproc::provgraph::MaterialClass;
use matproc::retrieval::embed::{cosine, unit_interval, HashedNgramEmbedder};
use matproc::retrieval::{retrieve, Embedders, QueryProcess, RetrievalWeights, RetrievedPrecedent};
use matproc::scoring::{argmax, fuse_scores, min_max, score_options_neural, score_options_symbolic, SymbolicConfig};
use matproc::taskgen::{BenchItem, Question, TaskKind, MASK};
use proptest::prelude::*;

fn item(task: TaskKind, question: Question, options: &[&str]) -> BenchItem {
    BenchItem {
        item_id: "q".into(),
        task,
        question,
        options: options.iter().map(|s| s.to_string()).collect(),
        gold_index: 0,
        graph_id: "held-out".into(),
        doi: "10.9/q".into(),
        year: Some(2022),
        material_class: MaterialClass::Battery,
        provenance: Default::default(),
    }
}

fn three_routes() -> Vec<matproc::provgraph::ProcessGraph> {
    vec![
        common::route_graph("r1", &["mix", "grind", "sinter"]),
        common::route_graph("r2", &["mix", "press", "sinter"]),
        common::route_graph("r3", &["mix", "grind", "anneal"]),
    ]
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn missing_step_by_hand() {
    let mem = common::memory_of(&three_routes());
    let cfg = SymbolicConfig::default();

    // Middle slot: P(.|mix) = {grind 2/3, press 1/3}; into sinter = {grind 1/2,
    // press 1/2}; middle bin = {grind 2/3, press 1/3}.
    let q = Question {
        route: vec!["mix".into(), MASK.into(), "sinter".into()],
        step_index: Some(1),
        route_length: Some(3),
        ..Question::default()
    };
    let got = score_options_symbolic(&item(TaskKind::A2MissingStep, q, &["grind", "press", "anneal", "mix"]), &[], &mem, &cfg).unwrap();
    let want = [
        0.4 * 2.0 / 3.0 + 0.3 * 0.5 + 0.3 * 2.0 / 3.0,
        0.4 / 3.0 + 0.3 * 0.5 + 0.3 / 3.0,
        0.0,
        0.0,
    ];
    assert!(got.iter().zip(want).all(|(g, w)| close(*g, w)), "{got:?} vs {want:?}");

    // Last slot: no right neighbour, so final-step frequency stands in.
    let q = Question {
        route: vec!["mix".into(), "grind".into(), MASK.into()],
        step_index: Some(2),
        route_length: Some(3),
        ..Question::default()
    };
    let got = score_options_symbolic(&item(TaskKind::A2MissingStep, q, &["sinter", "anneal", "press", "mix"]), &[], &mem, &cfg).unwrap();
    let want = [0.4 * 0.5 + 0.3 * 2.0 / 3.0 + 0.3 * 2.0 / 3.0, 0.4 * 0.5 + 0.3 / 3.0 + 0.3 / 3.0, 0.0, 0.0];
    assert!(got.iter().zip(want).all(|(g, w)| close(*g, w)), "{got:?} vs {want:?}");
}

#[test]
fn retrieval_three_processes() {
    let graphs = vec![
        common::route_graph("r1", &["mix", "grind", "sinter"]),
        common::route_graph("r2", &["mix", "press", "sinter"]),
        common::route_graph("r3", &["mix", "grind", "anneal", "press"]),
    ];
    let mem = common::memory_of(&graphs);
    let embedders = Embedders::builtin(0);
    let query = QueryProcess::from_graph(&graphs[0]);
    let q = query.embed(&embedders).unwrap();
    let hits = retrieve(&q, &mem, &RetrievalWeights::default(), 3).unwrap();

    assert_eq!(hits[0].graph_id, "r1");
    assert!(close(hits[0].s_text, 1.0) && close(hits[0].s_struct, 1.0) && close(hits[0].s_heur, 1.0));
    let heur = |id: &str| match id {
        "r1" => 1.0,
        // activities 2/4, length 1, precursors 1
        "r2" => (0.5 + 1.0 + 1.0) / 3.0,
        // activities 2/5, length 3/4, precursors 1
        _ => (0.4 + 0.75 + 1.0) / 3.0,
    };
    let qv = HashedNgramEmbedder::vector(&query.text);
    for h in &hits {
        assert!(close(h.s_heur, heur(&h.graph_id)), "{h:?}");
        let pv = HashedNgramEmbedder::vector(mem.text_of(&h.graph_id).unwrap());
        assert!(close(h.s_text, unit_interval(cosine(&qv, &pv))), "{h:?}");
        assert!(close(h.s_ret, 0.4 * h.s_text + 0.3 * h.s_struct + 0.3 * h.s_heur));
    }
    assert!(hits.windows(2).all(|w| w[0].s_ret >= w[1].s_ret));

    let only_heur = retrieve(&q, &mem, &RetrievalWeights::views(false, false, true).unwrap(), 3).unwrap();
    let order: Vec<&str> = only_heur.iter().map(|h| h.graph_id.as_str()).collect();
    assert_eq!(order, ["r1", "r2", "r3"]);
}

#[test]
fn neural_scores_recomputed() {
    let mem = common::memory_of(&three_routes());
    let q = Question {
        precursors: vec!["precursor".into()],
        route: vec!["mix".into(), "grind".into()],
        ..Question::default()
    };
    let it = item(TaskKind::A3NextActivity, q, &["sinter", "anneal", "press"]);
    let precedents: Vec<RetrievedPrecedent> = ["r1", "r2"]
        .iter()
        .map(|id| RetrievedPrecedent {
            graph_id: id.to_string(),
            s_text: 0.0,
            s_struct: 0.0,
            s_heur: 0.0,
            s_ret: 0.0,
        })
        .collect();
    let got = score_options_neural(&it, &precedents, &mem, &HashedNgramEmbedder).unwrap();
    for (i, opt) in it.options.iter().enumerate() {
        let text = format!("precursors: precursor | route: mix -> grind -> {opt} | products: ");
        let v = HashedNgramEmbedder::vector(&text);
        let want = precedents
            .iter()
            .map(|p| unit_interval(cosine(&v, &HashedNgramEmbedder::vector(mem.text_of(&p.graph_id).unwrap()))))
            .fold(f64::MIN, f64::max);
        assert!(close(got[i], want), "{opt}: {} vs {want}", got[i]);
    }
}

#[test]
fn step_matching_ties_break_by_graph_then_position() {
    let mem = common::memory_of(&three_routes());
    let q = matproc::memory::StepQuery {
        label: Some("mix".into()),
        prev: None,
        next: None,
        normalized_position: None,
        input_forms: BTreeSet::new(),
    };
    let hits = mem.match_steps(&q, 10, &StepWeights::default()).unwrap();
    let ids: Vec<(&str, usize)> = hits.iter().map(|(_, e)| (e.graph_id.as_str(), e.position)).collect();
    assert_eq!(&ids[..3], [("r1", 0), ("r2", 0), ("r3", 0)]);
    // label 1, neighbours {} vs {next} 0, no position, formless inputs J(∅,∅) = 1
    assert!(hits[..3].iter().all(|(s, _)| close(*s, 1.0 + 0.25)));
}

fn labels() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("mix".to_string()),
        Just("grind".to_string()),
        Just("press".to_string()),
        Just("sinter".to_string()),
        Just("anneal".to_string()),
        Just("levitate".to_string()),
    ]
}

proptest! {
    #[test]
    fn next_distribution_sums_to_one(prefix in proptest::collection::vec(labels(), 0..6)) {
        let mem = common::memory_of(&three_routes());
        let d = mem.next_distribution(&prefix);
        let total: f64 = d.probs.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{:?}", d);
        prop_assert!(d.probs.values().all(|p| *p >= 0.0));
    }

    #[test]
    fn hashed_vectors_are_unit(text in ".{0,40}") {
        let v = HashedNgramEmbedder::vector(&text);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_is_first_maximum(v in proptest::collection::vec(-5i32..5, 1..8)) {
        let f: Vec<f64> = v.iter().map(|x| *x as f64).collect();
        let max = f.iter().cloned().fold(f64::MIN, f64::max);
        let first = f.iter().position(|x| *x == max).unwrap();
        prop_assert_eq!(argmax(&f), first);
    }

    #[test]
    fn min_max_ignores_affine_maps(v in proptest::collection::vec(-100.0f64..100.0, 1..8), a in 0.01f64..50.0, b in -100.0f64..100.0) {
        let x = min_max(&v);
        let y = min_max(&v.iter().map(|t| a * t + b).collect::<Vec<_>>());
        prop_assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-6), "{:?} {:?}", x, y);
        prop_assert!(x.iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn fusion_stays_between_views(sym in proptest::collection::vec(0.0f64..1.0, 4), neu in proptest::collection::vec(0.0f64..1.0, 4), lambda in 0.0f64..=1.0) {
        let s = fuse_scores("p", &sym, &neu, lambda).unwrap();
        for i in 0..4 {
            let (lo, hi) = if s.sym[i] < s.neu[i] { (s.sym[i], s.neu[i]) } else { (s.neu[i], s.sym[i]) };
            prop_assert!(s.fused[i] >= lo - 1e-12 && s.fused[i] <= hi + 1e-12);
            prop_assert!((s.fused[i] - (lambda * s.sym[i] + (1.0 - lambda) * s.neu[i])).abs() < 1e-12);
        }
    }
}
