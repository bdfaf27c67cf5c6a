//! Request and response bodies shared by the CLI and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::exec::{evaluate, rank, ExecutionTrace};
use crate::query::{parse, ParseError};
use crate::scorer::{Scorer, ScorerError, ScorerSpec};
use crate::tree::{MemoryTree, MutationSpec, NodeId, SubtreeSerialization, Violation};

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryRequest {
    pub query: String,
    #[serde(default)]
    pub scorer: ScorerSpec,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub include_trace: bool,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

impl QueryRequest {
    pub fn new(query: impl Into<String>) -> Self {
        QueryRequest {
            query: query.into(),
            scorer: ScorerSpec::lexical(),
            top_k: DEFAULT_TOP_K,
            include_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub id: NodeId,
    pub weight: f64,
    /// Node ids from the root down to `id`.
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryResponse {
    pub results: Vec<ResultEntry>,
    pub top_id: Option<NodeId>,
    /// Serialization of the top result's subtree.
    pub context: Option<SubtreeSerialization>,
    pub context_token_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ExecutionTrace>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Parses, evaluates and ranks `request.query` against `tree`.
pub fn run_query(
    tree: &MemoryTree,
    request: &QueryRequest,
    scorer: &dyn Scorer,
) -> Result<QueryResponse, QueryError> {
    if request.top_k == 0 {
        return Err(QueryError::InvalidRequest("topK must be at least 1".into()));
    }
    let query = parse(&request.query)?;
    let (set, trace) = evaluate(tree, &query, scorer)?;
    let ranked = rank(&set);
    let results: Vec<ResultEntry> = ranked
        .entries
        .iter()
        .take(request.top_k)
        .map(|(id, w)| ResultEntry {
            id: id.clone(),
            weight: *w,
            path: tree.path(id).expect("result ids come from the tree"),
        })
        .collect();
    let top_id = ranked.top().cloned();
    let context = top_id
        .as_ref()
        .map(|id| tree.serialize_subtree(id).expect("top id comes from the tree"));
    Ok(QueryResponse {
        results,
        context_token_count: context.as_ref().map_or(0, |c| c.token_count),
        top_id,
        context,
        trace: request.include_trace.then_some(trace),
    })
}

/// A mutation plus the edit summary stored on the new version. Also the
/// shape of one mutation journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutateRequest {
    pub spec: MutationSpec,
    pub summary: String,
}

/// JSON error body used by both front ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ErrorBody {
    pub fn new(error: &str, message: impl Into<String>) -> Self {
        ErrorBody {
            error: error.to_string(),
            message: message.into(),
            offset: None,
            expected: Vec::new(),
            violations: Vec::new(),
        }
    }

    pub fn syntax(e: &ParseError) -> Self {
        ErrorBody {
            offset: Some(e.offset),
            expected: e.expected.clone(),
            ..ErrorBody::new("syntax", e.to_string())
        }
    }

    pub fn schema(violations: Vec<Violation>) -> Self {
        let message = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        ErrorBody {
            violations,
            ..ErrorBody::new("schema", message)
        }
    }
}

impl From<&QueryError> for ErrorBody {
    fn from(e: &QueryError) -> Self {
        match e {
            QueryError::Syntax(p) => ErrorBody::syntax(p),
            QueryError::InvalidRequest(m) => ErrorBody::new("invalid-request", m.clone()),
            QueryError::Scorer(s) if s.is_retriable() => ErrorBody::new("scorer-transport", s.to_string()),
            QueryError::Scorer(s) => ErrorBody::new("scorer", s.to_string()),
        }
    }
}
