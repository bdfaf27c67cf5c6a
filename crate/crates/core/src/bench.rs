//! Replays a scripted session and measures, per turn, how many context
//! tokens each retrieval strategy would hand to a model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{flat_retrieve, flatten};
use crate::response::{run_query, MutateRequest, QueryError, QueryRequest};
use crate::scorer::{Scorer, ScorerError};
use crate::tree::{count_tokens, MemoryTree, MutationError, NodeId};

pub const DEFAULT_FLAT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScript {
    pub turns: Vec<Turn>,
}

/// One user turn. A turn may carry a mutation, a query, or both; the
/// mutation is applied first so the query sees the updated memory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Turn {
    /// Natural-language request; used as the flat baseline's query text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutate: Option<MutateRequest>,
    /// Node the turn is about, when annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    InContext,
    Flat,
    Sxq,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::InContext, Strategy::Flat, Strategy::Sxq];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::InContext => "in-context",
            Strategy::Flat => "flat",
            Strategy::Sxq => "sxq",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected in-context, flat or sxq)"))
    }
}

/// One CSV row: `turn,strategy,tokens,hit`. Turns are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub turn: usize,
    pub strategy: Strategy,
    pub tokens: usize,
    pub hit: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
#[error("turn {turn}: {failure}")]
pub struct BenchError {
    pub turn: usize,
    pub failure: BenchFailure,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchFailure {
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    pub flat_k: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategies: Strategy::ALL.to_vec(),
            flat_k: DEFAULT_FLAT_K,
        }
    }
}

/// Replays `script` on `tree`. The in-context strategy pays for the whole
/// transcript so far plus the full current memory; flat pays for its top-k
/// items; sxq pays for the top result's subtree.
pub fn run_bench(
    mut tree: MemoryTree,
    script: &SessionScript,
    config: &BenchConfig,
    scorer: &dyn Scorer,
) -> Result<Vec<BenchRow>, BenchError> {
    let mut transcript = String::new();
    let mut rows = Vec::new();
    for (i, turn) in script.turns.iter().enumerate() {
        let number = i + 1;
        let fail = |failure: BenchFailure| BenchError { turn: number, failure };
        if let Some(m) = &turn.mutate {
            tree = m.spec.apply(&tree, &m.summary).map_err(|e| fail(e.into()))?;
        }
        for text in [&turn.request, &turn.query].into_iter().flatten() {
            transcript.push_str(text);
            transcript.push('\n');
        }
        if let Some(m) = &turn.mutate {
            transcript.push_str(&m.summary);
            transcript.push('\n');
        }
        let target = turn.target.as_ref().filter(|t| tree.contains(t));
        let annotated = turn.target.is_some();

        for &strategy in &config.strategies {
            let (tokens, hit) = match strategy {
                Strategy::InContext => {
                    let memory = tree.serialize_subtree(tree.root_id()).expect("root exists");
                    (count_tokens(&transcript) + memory.token_count, annotated.then_some(target.is_some()))
                }
                Strategy::Flat => match turn.request.as_ref().or(turn.query.as_ref()) {
                    None => (0, None),
                    Some(text) => {
                        let hits = flat_retrieve(&flatten(&tree), text, config.flat_k, scorer)
                            .map_err(|e| fail(e.into()))?;
                        let tokens = hits.iter().map(|h| count_tokens(&h.text)).sum();
                        let hit = annotated
                            .then(|| hits.first().is_some_and(|h| Some(&h.node_id) == target));
                        (tokens, hit)
                    }
                },
                Strategy::Sxq => match &turn.query {
                    None => (0, None),
                    Some(q) => {
                        let mut request = QueryRequest::new(q.clone());
                        request.top_k = 1;
                        let resp = run_query(&tree, &request, scorer).map_err(|e| fail(e.into()))?;
                        let hit = annotated.then(|| match (&resp.top_id, target) {
                            (Some(top), Some(t)) => tree.is_ancestor_or_self(top, t),
                            _ => false,
                        });
                        (resp.context_token_count, hit)
                    }
                },
            };
            rows.push(BenchRow {
                turn: number,
                strategy,
                tokens,
                hit,
            });
        }
    }
    Ok(rows)
}
