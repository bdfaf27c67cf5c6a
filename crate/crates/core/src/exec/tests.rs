use std::collections::HashMap;

use super::*;
use crate::query::{parse, Target};
use crate::scorer::{build_scorer, LexicalScorer, ScorerSpec};
use crate::tree::load_memory;

const Q1: &str = r#"//Day[avg(/POI[node ~= "conference"])]"#;
const Q2: &str = r#"//Day[3]/POI[1 - [node ~= "workshop"]]"#;

fn fixture_path(rel: &str) -> String {
    format!("{}/../../fixtures/{rel}", env!("CARGO_MANIFEST_DIR"))
}

fn acl() -> MemoryTree {
    load_memory(&std::fs::read_to_string(fixture_path("acl_trip.json")).unwrap()).unwrap()
}

fn id(s: &str) -> NodeId {
    NodeId::from(s)
}

/// Scores by looking up the text in a table; unknown texts score 0.
struct Table(HashMap<String, f64>);

impl Scorer for Table {
    fn score(&self, text: &str, _condition: &str) -> Result<Score, ScorerError> {
        Ok(Score::saturating(*self.0.get(text).unwrap_or(&0.0)))
    }
}

/// root(R) -> a(A) -> {b(B) -> c(C)}, plus d(A) under root.
fn small() -> MemoryTree {
    load_memory(
        r#"{
  "schema": {
    "nodeTypes": ["R", "A", "B", "C"],
    "allowedChildren": {"R": ["A"], "A": ["B"], "B": ["C"], "C": []},
    "allowedAttributes": {"R": [], "A": ["t"], "B": ["t"], "C": ["t"]}
  },
  "root": {"id": "root", "type": "R", "attributes": {}, "children": [
    {"id": "a", "type": "A", "attributes": {"t": "x"}, "children": [
      {"id": "b", "type": "B", "attributes": {"t": "y"}, "children": [
        {"id": "c", "type": "C", "attributes": {"t": "z"}, "children": []}
      ]}
    ]},
    {"id": "d", "type": "A", "attributes": {"t": "w"}, "children": []}
  ]}
}"#,
    )
    .unwrap()
}

fn weights(set: &WeightedNodeSet) -> Vec<(&str, f64)> {
    set.iter().map(|(id, w)| (id.as_str(), w)).collect()
}

#[test]
fn empty_query_is_identity() {
    let tree = acl();
    let (out, trace) = evaluate(&tree, &Query::empty(), &LexicalScorer).unwrap();
    assert_eq!(weights(&out), vec![("itinerary", 1.0)]);
    assert!(trace.steps.is_empty());
}

#[test]
fn descendant_duplicates_keep_max_weight() {
    let tree = small();
    let input = WeightedNodeSet::collect(&tree, [(id("a"), 0.2), (id("root"), 0.9)]);
    let out = eval_axis(&tree, Axis::Descendant, &input);
    assert_eq!(
        weights(&out),
        vec![("a", 0.9), ("b", 0.9), ("c", 0.9), ("d", 0.9)]
    );
}

#[test]
fn child_axis_carries_parent_weight() {
    let tree = small();
    let input = WeightedNodeSet::collect(&tree, [(id("b"), 0.4), (id("root"), 0.5)]);
    let out = eval_axis(&tree, Axis::Child, &input);
    assert_eq!(weights(&out), vec![("a", 0.5), ("c", 0.4), ("d", 0.5)]);
}

#[test]
fn collect_sorts_into_document_order() {
    let tree = small();
    let set = WeightedNodeSet::collect(&tree, [(id("d"), 0.1), (id("b"), 0.2), (id("zz"), 1.0)]);
    assert_eq!(weights(&set), vec![("b", 0.2), ("d", 0.1)]);
}

#[test]
fn positional_selectors() {
    let tree = acl();
    let all = WeightedNodeSet::collect(
        &tree,
        ["poi-1-1", "poi-1-2", "poi-1-3", "poi-2-1"].map(|s| (id(s), 1.0)),
    );
    let pick = |p| -> Vec<&str> {
        eval_positional(p, all.clone())
            .ids()
            .map(|i| match i.as_str() {
                "poi-1-1" => "1",
                "poi-1-2" => "2",
                "poi-1-3" => "3",
                _ => "4",
            })
            .collect()
    };
    assert_eq!(pick(Positional::Index(2)), ["2"]);
    assert_eq!(pick(Positional::Index(9)), Vec::<&str>::new());
    assert_eq!(pick(Positional::FromEnd(1)), ["4"]);
    assert_eq!(pick(Positional::FromEnd(4)), ["1"]);
    assert_eq!(pick(Positional::FromEnd(5)), Vec::<&str>::new());
    assert_eq!(pick(Positional::Range(2, 3)), ["2", "3"]);
    assert_eq!(pick(Positional::Range(3, 99)), ["3", "4"]);
    assert_eq!(pick(Positional::Range(3, 2)), Vec::<&str>::new());
}

#[test]
fn third_day_selected_with_weight_one() {
    let tree = acl();
    let q = parse("//Day[3]").unwrap();
    let (out, _) = evaluate(&tree, &q, &LexicalScorer).unwrap();
    assert_eq!(weights(&out), vec![("day-3", 1.0)]);
}

#[test]
fn aggregators() {
    assert!((aggregate(AggOp::Avg, &[1.0, 0.0, 1.0]) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(aggregate(AggOp::Gmean, &[0.5, 0.0]), 0.0);
    assert!((aggregate(AggOp::Gmean, &[0.25, 1.0]) - 0.5).abs() < 1e-15);
    assert_eq!(aggregate(AggOp::Min, &[0.3, 0.1, 0.7]), 0.1);
    assert_eq!(aggregate(AggOp::Max, &[0.3, 0.1, 0.7]), 0.7);
    for op in [AggOp::Avg, AggOp::Min, AggOp::Max, AggOp::Gmean] {
        assert_eq!(aggregate(op, &[]), 0.0);
    }
}

#[test]
fn avg_over_child_scores() {
    let tree = acl();
    let table = Table(
        [
            ("POI airport arrival and hotel check-in 10:00", 1.0),
            ("POI conference registration and badge pickup 15:00", 0.0),
            ("POI conference welcome reception 18:00", 1.0),
        ]
        .map(|(k, v)| (k.to_string(), v))
        .into(),
    );
    let expr = Relevance::agg(
        AggOp::Avg,
        Step::new(Axis::Child, Selector::Type("POI".into())).with_relevance(Relevance::node("x")),
    );
    let s = rel(&tree, &id("day-1"), &expr, &table).unwrap().value();
    assert!((s - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn not_complements() {
    let tree = small();
    let table = Table([("z".to_string(), 0.25)].into());
    let expr = Relevance::negate(Relevance::attr("t", "q"));
    assert_eq!(rel(&tree, &id("c"), &expr, &table).unwrap().value(), 0.75);
}

#[test]
fn binary_operators() {
    let tree = small();
    let table = Table([("x".to_string(), 0.2), ("A x".to_string(), 0.6)].into());
    let l = || Relevance::attr("t", "q");
    let r = || Relevance::local(Target::Node, "q");
    let eval = |op| rel(&tree, &id("a"), &Relevance::binary(op, l(), r()), &table).unwrap().value();
    assert!((eval(BinOp::Avg) - 0.4).abs() < 1e-15);
    assert!((eval(BinOp::Prod) - 0.12).abs() < 1e-15);
    assert_eq!(eval(BinOp::Min), 0.2);
    assert_eq!(eval(BinOp::Max), 0.6);
}

#[test]
fn missing_attribute_scores_zero() {
    let tree = small();
    let expr = Relevance::attr("nope", "x");
    assert_eq!(rel(&tree, &id("a"), &expr, &LexicalScorer).unwrap().value(), 0.0);
}

#[test]
fn agg_without_inner_relevance_counts_evidence() {
    let tree = small();
    let has_b = Relevance::agg(AggOp::Max, Step::new(Axis::Child, Selector::Type("B".into())));
    assert_eq!(rel(&tree, &id("a"), &has_b, &LexicalScorer).unwrap().value(), 1.0);
    assert_eq!(rel(&tree, &id("d"), &has_b, &LexicalScorer).unwrap().value(), 0.0);
}

#[test]
fn agg_ignores_outer_weights_and_uses_inner_positional() {
    let tree = acl();
    let q = parse(r#"//Day[max(/POI[2][node ~= "conference"])]"#).unwrap();
    let (out, _) = evaluate(&tree, &q, &LexicalScorer).unwrap();
    assert_eq!(
        weights(&out),
        vec![("day-1", 1.0), ("day-2", 1.0), ("day-3", 0.0)]
    );
}

#[test]
fn q1_lexical_ranks_day_two_first() {
    let tree = acl();
    let q = parse(Q1).unwrap();
    let (out, trace) = evaluate(&tree, &q, &LexicalScorer).unwrap();
    let w = weights(&out);
    assert_eq!(w[0].0, "day-1");
    assert!((w[0].1 - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(w[1], ("day-2", 1.0));
    assert_eq!(w[2], ("day-3", 0.0));
    assert_eq!(rank(&out).top().map(NodeId::as_str), Some("day-2"));
    assert_eq!(trace.steps.len(), 1);
}

#[test]
fn q1_embedding_replay_day_two_is_0565() {
    let tree = acl();
    let spec = ScorerSpec::embedding(
        format!("file://{}", fixture_path("scorer_replays/acl_embeddings.json")),
        "replay-embed-acl",
    );
    let scorer = build_scorer(&spec).unwrap();
    let (out, trace) = evaluate(&tree, &parse(Q1).unwrap(), scorer.as_ref()).unwrap();
    let ranked = rank(&out);
    assert_eq!(ranked.top().map(NodeId::as_str), Some("day-2"));
    assert!((ranked.entries[0].1 - 0.565).abs() <= 5e-4, "{}", ranked.entries[0].1);

    let day2 = id("day-2");
    let locals: Vec<_> = trace.steps[0]
        .relevance
        .iter()
        .filter(|d| d.0.as_str().starts_with("poi-2-"))
        .map(|d| (d.2 * 1000.0).round() / 1000.0)
        .collect();
    assert_eq!(locals, vec![0.603, 0.482, 0.608]);
    let agg: Vec<_> = trace.details_for(0, &day2).collect();
    assert_eq!(agg.len(), 1);
    assert_eq!(agg[0].1, r#"avg(/POI[node ~= "conference"])"#);
}

#[test]
fn q2_zeroes_the_workshop() {
    let tree = acl();
    let (out, _) = evaluate(&tree, &parse(Q2).unwrap(), &LexicalScorer).unwrap();
    assert_eq!(
        weights(&out),
        vec![("poi-3-1", 0.0), ("poi-3-2", 1.0), ("poi-3-3", 1.0)]
    );
    let ranked = rank(&out);
    assert_eq!(ranked.entries.last().unwrap().0.as_str(), "poi-3-1");
}

#[test]
fn rank_breaks_ties_by_document_order() {
    let tree = acl();
    let set = WeightedNodeSet::collect(
        &tree,
        [("poi-2-1", 0.5), ("poi-1-1", 0.5), ("poi-3-1", 0.9), ("day-1", 0.5)].map(|(s, w)| (id(s), w)),
    );
    let order: Vec<_> = rank(&set).entries.iter().map(|(i, _)| i.as_str().to_string()).collect();
    assert_eq!(order, ["poi-3-1", "day-1", "poi-1-1", "poi-2-1"]);
    assert_eq!(rank(&WeightedNodeSet::empty()).top(), None);
}

#[test]
fn trace_chains_inputs_and_outputs() {
    let tree = acl();
    let q = parse(r#"/Version//Day[1:2]/POI[node ~= "conference"]"#).unwrap();
    let (out, trace) = evaluate(&tree, &q, &LexicalScorer).unwrap();
    assert_eq!(trace.steps.len(), 3);
    assert_eq!(trace.steps[0].input, WeightedNodeSet::root(&tree));
    for pair in trace.steps.windows(2) {
        assert_eq!(pair[0].output, pair[1].input);
    }
    assert_eq!(trace.steps[2].output, out);
    assert_eq!(trace.steps[2].index, 2);
    assert_eq!(trace.steps[2].step, r#"/POI[node ~= "conference"]"#);
    assert_eq!(trace.steps[2].relevance.len(), 6);
}

#[test]
fn trace_serializes_as_pairs_and_triples() {
    let tree = acl();
    let (_, trace) = evaluate(&tree, &parse(Q2).unwrap(), &LexicalScorer).unwrap();
    let v = serde_json::to_value(&trace).unwrap();
    assert_eq!(v["steps"][0]["output"], serde_json::json!([["day-3", 1.0]]));
    let first = &v["steps"][1]["relevance"][0];
    assert_eq!(first[0], "poi-3-1");
    assert_eq!(first[1], r#"[node ~= "workshop"]"#);
    assert_eq!(first[2], 1.0);
    let back: ExecutionTrace = serde_json::from_value(v).unwrap();
    assert_eq!(back, trace);
}

#[test]
fn steps_compose() {
    let tree = acl();
    let q = parse(r#"//Day[gmean(/POI[node ~= "conference"])]/POI[node ~= "poster"]"#).unwrap();
    let (whole, _) = evaluate(&tree, &q, &LexicalScorer).unwrap();
    let mut w = WeightedNodeSet::root(&tree);
    for s in &q.steps {
        w = eval_step(&tree, s, w, &LexicalScorer).unwrap();
    }
    assert_eq!(whole, w);
}

#[test]
fn reference_agrees_on_fixture_queries() {
    let tree = acl();
    for q in [
        Q1,
        Q2,
        "//*",
        "//POI[-1]",
        r#"//Day[gmean(POI[node ~= "conference"])]"#,
        r#"//Day[min(max(/POI[node ~= "conference"]), 1 - [date ~= "2026-07-03"])]"#,
        r#"/Version[1]/Day[2:3]/POI[[node ~= "session"] * [title ~= "poster session"]]"#,
    ] {
        let q = parse(q).unwrap();
        let (a, _) = evaluate(&tree, &q, &LexicalScorer).unwrap();
        let b = reference_evaluate(&tree, &q, &LexicalScorer).unwrap();
        assert_eq!(a.len(), b.len(), "{q}");
        for ((x, wx), (y, wy)) in a.iter().zip(b.iter()) {
            assert_eq!(x, y, "{q}");
            assert!((wx - wy).abs() <= 1e-9, "{q}");
        }
    }
}

#[test]
fn scorer_errors_propagate() {
    let tree = acl();
    let spec = ScorerSpec::embedding("http://127.0.0.1:1/embed", "m");
    let scorer = build_scorer(&spec).unwrap();
    let err = evaluate(&tree, &parse(Q1).unwrap(), scorer.as_ref()).unwrap_err();
    assert!(err.is_retriable());
}
