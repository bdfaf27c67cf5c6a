//! A deliberately naive evaluator used as a test oracle.
//!
//! Every step is computed as a comprehension over all nodes of the tree:
//! a node is reached when one of the input nodes is its parent (child axis)
//! or one of its strict ancestors (descendant axis), found by walking parent
//! links. Nothing here shares code with the main executor apart from the
//! scorer itself.

use super::WeightedNodeSet;
use crate::query::{AggOp, Axis, BinOp, Positional, Query, Relevance, Selector, Step, Target};
use crate::scorer::{Scorer, ScorerError};
use crate::tree::{MemoryTree, NodeId};

pub fn reference_evaluate(
    tree: &MemoryTree,
    query: &Query,
    scorer: &dyn Scorer,
) -> Result<WeightedNodeSet, ScorerError> {
    let mut w: Vec<(NodeId, f64)> = vec![(tree.root_id().clone(), 1.0)];
    for step in &query.steps {
        w = step_ref(tree, step, &w, scorer)?;
    }
    Ok(WeightedNodeSet { entries: w })
}

fn step_ref(
    tree: &MemoryTree,
    step: &Step,
    input: &[(NodeId, f64)],
    scorer: &dyn Scorer,
) -> Result<Vec<(NodeId, f64)>, ScorerError> {
    let selected = structural_ref(tree, step, input);
    match &step.relevance {
        None => Ok(selected),
        Some(p) => selected
            .into_iter()
            .map(|(u, w)| Ok((u.clone(), w * rel_ref(tree, &u, p, scorer)?)))
            .collect(),
    }
}

fn structural_ref(tree: &MemoryTree, step: &Step, input: &[(NodeId, f64)]) -> Vec<(NodeId, f64)> {
    let mut reached = Vec::new();
    for u in tree.document_order() {
        let sources: Vec<f64> = input
            .iter()
            .filter(|(v, _)| related(tree, step.axis, v, u))
            .map(|(_, w)| *w)
            .collect();
        if sources.is_empty() {
            continue;
        }
        let type_ok = match &step.selector {
            Selector::Wildcard => true,
            Selector::Type(t) => tree.node(u).map(|n| &n.node_type == t).unwrap_or(false),
        };
        if type_ok {
            let best = sources.iter().fold(f64::NEG_INFINITY, |a, &b| if b > a { b } else { a });
            reached.push((u.clone(), best));
        }
    }
    match step.positional {
        None => reached,
        Some(p) => {
            let len = reached.len() as i64;
            reached
                .into_iter()
                .zip(1i64..)
                .filter(|(_, k)| match p {
                    Positional::Index(i) => *k == i as i64,
                    Positional::FromEnd(i) => *k == len - i as i64 + 1,
                    Positional::Range(i, j) => *k >= i as i64 && *k <= j as i64 && *k <= len,
                })
                .map(|(e, _)| e)
                .collect()
        }
    }
}

fn related(tree: &MemoryTree, axis: Axis, v: &NodeId, u: &NodeId) -> bool {
    match axis {
        Axis::Child => tree.parent(u) == Some(v),
        Axis::Descendant => {
            let mut cur = tree.parent(u);
            while let Some(p) = cur {
                if p == v {
                    return true;
                }
                cur = tree.parent(p);
            }
            false
        }
    }
}

fn rel_ref(
    tree: &MemoryTree,
    u: &NodeId,
    expr: &Relevance,
    scorer: &dyn Scorer,
) -> Result<f64, ScorerError> {
    Ok(match expr {
        Relevance::Local { target, condition } => {
            let node = tree.node(u).map_err(|_| ScorerError::UnknownNode(u.clone()))?;
            let text = match target {
                Target::Node => {
                    let mut parts = vec![node.node_type.clone()];
                    for v in node.attributes.values() {
                        if !v.trim().is_empty() {
                            parts.push(v.trim().to_string());
                        }
                    }
                    Some(parts.join(" "))
                }
                Target::Attribute(a) => node.attributes.get(a).cloned(),
            };
            match text {
                Some(t) => scorer.score(&t, condition)?.value(),
                None => 0.0,
            }
        }
        Relevance::Not(p) => 1.0 - rel_ref(tree, u, p, scorer)?,
        Relevance::Binary { op, left, right } => {
            let a = rel_ref(tree, u, left, scorer)?;
            let b = rel_ref(tree, u, right, scorer)?;
            match op {
                BinOp::Avg => 0.5 * a + 0.5 * b,
                BinOp::Prod => a * b,
                BinOp::Min => if a < b { a } else { b },
                BinOp::Max => if a > b { a } else { b },
            }
        }
        Relevance::Agg { op, step } => {
            let evidence = structural_ref(tree, step, &[(u.clone(), 1.0)]);
            let mut scores = Vec::new();
            for (x, _) in &evidence {
                scores.push(match &step.relevance {
                    Some(p) => rel_ref(tree, x, p, scorer)?,
                    None => 1.0,
                });
            }
            if scores.is_empty() {
                0.0
            } else {
                let n = scores.len() as f64;
                match op {
                    AggOp::Avg => scores.iter().sum::<f64>() / n,
                    AggOp::Min => scores.iter().cloned().reduce(|a, b| if b < a { b } else { a }).unwrap(),
                    AggOp::Max => scores.iter().cloned().reduce(|a, b| if b > a { b } else { a }).unwrap(),
                    AggOp::Gmean => scores.iter().product::<f64>().powf(1.0 / n),
                }
            }
        }
    })
}
