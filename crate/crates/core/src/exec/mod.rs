//! Query evaluation over weighted node sets.
//!
//! Evaluation starts from `{(root, 1)}` and threads a weighted node set
//! through the steps. Each step expands along its axis, filters by node type,
//! applies its positional selector in document order, and finally multiplies
//! every weight by the node's relevance score. Weights therefore only ever
//! shrink, and stay inside `[0, 1]`.

mod reference;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::query::{AggOp, Axis, BinOp, Positional, Query, Relevance, Selector, Step};
use crate::scorer::{atom, Score, Scorer, ScorerError};
use crate::tree::{MemoryTree, NodeId};

pub use reference::reference_evaluate;
pub use trace::{ExecutionTrace, RelevanceDetail, StepTrace};

/// `(node, weight)` pairs, one per node, held in document order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightedNodeSet {
    entries: Vec<(NodeId, f64)>,
}

impl WeightedNodeSet {
    pub fn empty() -> Self {
        WeightedNodeSet::default()
    }

    /// `{(root, 1)}`, the starting point of every evaluation.
    pub fn root(tree: &MemoryTree) -> Self {
        WeightedNodeSet {
            entries: vec![(tree.root_id().clone(), 1.0)],
        }
    }

    /// Builds a set from arbitrary pairs: unknown ids are dropped, duplicates
    /// merged with [`merge_duplicate`], result sorted into document order.
    pub fn collect(tree: &MemoryTree, pairs: impl IntoIterator<Item = (NodeId, f64)>) -> Self {
        let mut by_pos: BTreeMap<usize, (NodeId, f64)> = BTreeMap::new();
        for (id, w) in pairs {
            let Ok(pos) = tree.position(&id) else { continue };
            by_pos
                .entry(pos)
                .and_modify(|e| e.1 = merge_duplicate(e.1, w))
                .or_insert((id, w));
        }
        WeightedNodeSet {
            entries: by_pos.into_values().collect(),
        }
    }

    pub fn entries(&self) -> &[(NodeId, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, f64)> {
        self.entries.iter().map(|(id, w)| (id, *w))
    }

    pub fn ids(&self) -> impl Iterator<Item = &NodeId> {
        self.entries.iter().map(|(id, _)| id)
    }

    pub fn weight(&self, id: &NodeId) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == id).map(|(_, w)| *w)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn map_weights(
        self,
        mut f: impl FnMut(&NodeId, f64) -> Result<f64, ScorerError>,
    ) -> Result<Self, ScorerError> {
        let entries = self
            .entries
            .into_iter()
            .map(|(id, w)| f(&id, w).map(|w| (id, w)))
            .collect::<Result<_, _>>()?;
        Ok(WeightedNodeSet { entries })
    }
}

/// Weight kept when one node is reached from several weighted sources
/// (e.g. `//` from both a node and its ancestor).
pub fn merge_duplicate(a: f64, b: f64) -> f64 {
    a.max(b)
}

/// Runs `query` from `{(root, 1)}` and records a per-step trace.
pub fn evaluate(
    tree: &MemoryTree,
    query: &Query,
    scorer: &dyn Scorer,
) -> Result<(WeightedNodeSet, ExecutionTrace), ScorerError> {
    evaluate_from(tree, query, WeightedNodeSet::root(tree), scorer)
}

/// Runs `query` from an arbitrary starting set.
pub fn evaluate_from(
    tree: &MemoryTree,
    query: &Query,
    start: WeightedNodeSet,
    scorer: &dyn Scorer,
) -> Result<(WeightedNodeSet, ExecutionTrace), ScorerError> {
    let mut trace = ExecutionTrace::default();
    let mut current = start;
    for (index, step) in query.steps.iter().enumerate() {
        let mut details = Vec::new();
        let output = step_inner(tree, step, current.clone(), scorer, Some(&mut details))?;
        trace.steps.push(StepTrace {
            index,
            step: step.to_string(),
            input: current,
            output: output.clone(),
            relevance: details,
        });
        current = output;
    }
    Ok((current, trace))
}

/// Axis, then node selector, then positional, then relevance.
pub fn eval_step(
    tree: &MemoryTree,
    step: &Step,
    input: WeightedNodeSet,
    scorer: &dyn Scorer,
) -> Result<WeightedNodeSet, ScorerError> {
    step_inner(tree, step, input, scorer, None)
}

fn step_inner(
    tree: &MemoryTree,
    step: &Step,
    input: WeightedNodeSet,
    scorer: &dyn Scorer,
    details: Option<&mut Vec<RelevanceDetail>>,
) -> Result<WeightedNodeSet, ScorerError> {
    let structural = structural(tree, step, &input);
    match &step.relevance {
        Some(expr) => relevance_inner(tree, expr, structural, scorer, details),
        None => Ok(structural),
    }
}

/// The step without its relevance part.
fn structural(tree: &MemoryTree, step: &Step, input: &WeightedNodeSet) -> WeightedNodeSet {
    let w = eval_axis(tree, step.axis, input);
    let w = eval_node_selector(tree, &step.selector, w);
    match &step.positional {
        Some(p) => eval_positional(*p, w),
        None => w,
    }
}

pub fn eval_axis(tree: &MemoryTree, axis: Axis, input: &WeightedNodeSet) -> WeightedNodeSet {
    let expanded = input.iter().flat_map(|(v, w)| {
        let reached: &[NodeId] = match axis {
            Axis::Child => tree.children(v).unwrap_or_default(),
            Axis::Descendant => tree.descendants(v).unwrap_or_default(),
        };
        reached.iter().map(move |u| (u.clone(), w))
    });
    WeightedNodeSet::collect(tree, expanded)
}

pub fn eval_node_selector(
    tree: &MemoryTree,
    selector: &Selector,
    input: WeightedNodeSet,
) -> WeightedNodeSet {
    match selector {
        Selector::Wildcard => input,
        Selector::Type(ty) => WeightedNodeSet {
            entries: input
                .entries
                .into_iter()
                .filter(|(id, _)| tree.node(id).is_ok_and(|n| &n.node_type == ty))
                .collect(),
        },
    }
}

/// Selects by 1-based position; `input` is already in document order.
pub fn eval_positional(positional: Positional, input: WeightedNodeSet) -> WeightedNodeSet {
    let n = input.len();
    let (from, to) = match positional {
        Positional::Index(i) => (i, i),
        Positional::FromEnd(i) if i <= n => (n - i + 1, n - i + 1),
        Positional::FromEnd(_) => (1, 0),
        Positional::Range(i, j) => (i, j.min(n)),
    };
    WeightedNodeSet {
        entries: input
            .entries
            .into_iter()
            .enumerate()
            .filter(|(k, _)| (from..=to).contains(&(k + 1)))
            .map(|(_, e)| e)
            .collect(),
    }
}

/// Multiplies each weight by the node's relevance. Zero-weight entries are
/// kept.
pub fn eval_relevance(
    tree: &MemoryTree,
    expr: &Relevance,
    input: WeightedNodeSet,
    scorer: &dyn Scorer,
) -> Result<WeightedNodeSet, ScorerError> {
    relevance_inner(tree, expr, input, scorer, None)
}

fn relevance_inner(
    tree: &MemoryTree,
    expr: &Relevance,
    input: WeightedNodeSet,
    scorer: &dyn Scorer,
    mut details: Option<&mut Vec<RelevanceDetail>>,
) -> Result<WeightedNodeSet, ScorerError> {
    input.map_weights(|id, w| {
        let r = rel_inner(tree, id, expr, scorer, details.as_deref_mut())?;
        Ok(w * r.value())
    })
}

/// Relevance of one node under `expr`.
pub fn rel(
    tree: &MemoryTree,
    id: &NodeId,
    expr: &Relevance,
    scorer: &dyn Scorer,
) -> Result<Score, ScorerError> {
    rel_inner(tree, id, expr, scorer, None)
}

fn rel_inner(
    tree: &MemoryTree,
    id: &NodeId,
    expr: &Relevance,
    scorer: &dyn Scorer,
    mut details: Option<&mut Vec<RelevanceDetail>>,
) -> Result<Score, ScorerError> {
    let score = match expr {
        Relevance::Local { target, condition } => atom(scorer, tree, id, target, condition)?,
        Relevance::Not(inner) => {
            let s = rel_inner(tree, id, inner, scorer, details.as_deref_mut())?;
            Score::saturating(1.0 - s.value())
        }
        Relevance::Binary { op, left, right } => {
            let l = rel_inner(tree, id, left, scorer, details.as_deref_mut())?.value();
            let r = rel_inner(tree, id, right, scorer, details.as_deref_mut())?.value();
            Score::saturating(combine(*op, l, r))
        }
        Relevance::Agg { op, step } => {
            let evidence = structural(tree, step, &WeightedNodeSet::singleton(id.clone()));
            let mut scores = Vec::with_capacity(evidence.len());
            for x in evidence.ids() {
                scores.push(match &step.relevance {
                    Some(inner) => rel_inner(tree, x, inner, scorer, details.as_deref_mut())?.value(),
                    None => 1.0,
                });
            }
            Score::saturating(aggregate(*op, &scores))
        }
    };
    if let Some(d) = details {
        d.push(RelevanceDetail(id.clone(), expr.to_string(), score.value()));
    }
    Ok(score)
}

impl WeightedNodeSet {
    fn singleton(id: NodeId) -> Self {
        WeightedNodeSet {
            entries: vec![(id, 1.0)],
        }
    }
}

fn combine(op: BinOp, l: f64, r: f64) -> f64 {
    match op {
        BinOp::Avg => (l + r) / 2.0,
        BinOp::Prod => l * r,
        BinOp::Min => l.min(r),
        BinOp::Max => l.max(r),
    }
}

/// Aggregates evidence scores. An empty evidence set scores 0; the geometric
/// mean is 0 as soon as one score is 0.
pub fn aggregate(op: AggOp, scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let n = scores.len() as f64;
    match op {
        AggOp::Avg => scores.iter().sum::<f64>() / n,
        AggOp::Min => scores.iter().copied().fold(f64::INFINITY, f64::min),
        AggOp::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        AggOp::Gmean => {
            if scores.iter().any(|&s| s <= 0.0) {
                0.0
            } else {
                (scores.iter().map(|s| s.ln()).sum::<f64>() / n).exp()
            }
        }
    }
}

/// Results ordered by descending weight, ties in document order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResults {
    pub entries: Vec<(NodeId, f64)>,
}

impl RankedResults {
    pub fn top(&self) -> Option<&NodeId> {
        self.entries.first().map(|(id, _)| id)
    }
}

pub fn rank(set: &WeightedNodeSet) -> RankedResults {
    let mut entries = set.entries.clone();
    // stable sort keeps document order among equal weights
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    RankedResults { entries }
}

#[cfg(test)]
mod tests;
