use serde::{Deserialize, Serialize};

use super::WeightedNodeSet;
use crate::tree::NodeId;

/// `(node, rendered sub-expression, score)`; serialized as a 3-element array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceDetail(pub NodeId, pub String, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub index: usize,
    pub step: String,
    pub input: WeightedNodeSet,
    pub output: WeightedNodeSet,
    /// Every relevance sub-score computed while evaluating the step,
    /// innermost first.
    pub relevance: Vec<RelevanceDetail>,
}

/// `{"steps": [{"index", "step", "input", "output", "relevance"}]}`
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub steps: Vec<StepTrace>,
}

impl ExecutionTrace {
    /// Sub-scores recorded for `node` in step `index`.
    pub fn details_for<'a>(
        &'a self,
        index: usize,
        node: &'a NodeId,
    ) -> impl Iterator<Item = &'a RelevanceDetail> + 'a {
        self.steps
            .get(index)
            .into_iter()
            .flat_map(|s| s.relevance.iter())
            .filter(move |d| &d.0 == node)
    }
}
