//! Atomic relevance scoring: `(node text, condition) -> [0, 1]`.
//!
//! Three scorers are available. The lexical scorer is deterministic and needs
//! nothing external. The embedding and entailment scorers call out to model
//! services over a small JSON protocol, or replay recorded outputs when the
//! endpoint is a `file://` URL.

mod cache;
mod embedding;
mod entailment;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::query::Target;
use crate::tree::{MemoryTree, NodeId};

pub use cache::Cache;
pub use embedding::{cosine, EmbeddingBackend, EmbeddingScorer, HttpEmbedder, ReplayEmbedder};
pub use entailment::{EntailmentScorer, HttpNli, NliBackend, NliProbabilities, ReplayNli};

pub const ENV_EMBED_URL: &str = "SXQ_EMBED_URL";
pub const ENV_NLI_URL: &str = "SXQ_NLI_URL";
pub const ENV_MODEL: &str = "SXQ_MODEL";

pub const DEFAULT_CACHE_CAPACITY: usize = 4096;

/// Relevance value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Score(f64);

impl Score {
    pub const ZERO: Score = Score(0.0);
    pub const ONE: Score = Score(1.0);

    /// `None` unless `value` is finite and within `[0, 1]`.
    pub fn new(value: f64) -> Option<Score> {
        (0.0..=1.0).contains(&value).then_some(Score(value))
    }

    /// Clamps into `[0, 1]`; NaN becomes 0.
    pub fn saturating(value: f64) -> Score {
        if value.is_nan() {
            Score(0.0)
        } else {
            Score(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Lexical,
    Embedding,
    Entailment,
}

impl std::str::FromStr for ScorerKind {
    type Err = ScorerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(ScorerKind::Lexical),
            "embedding" => Ok(ScorerKind::Embedding),
            "entailment" => Ok(ScorerKind::Entailment),
            other => Err(ScorerError::Config(format!("unknown scorer kind `{other}`"))),
        }
    }
}

/// Scorer configuration. `endpoint` and `model` are required for the two
/// model-backed kinds and must be absent for `lexical`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "modelName")]
    pub model: Option<String>,
    #[serde(default = "default_capacity")]
    pub cache_capacity: usize,
}

fn default_capacity() -> usize {
    DEFAULT_CACHE_CAPACITY
}

impl Default for ScorerSpec {
    fn default() -> Self {
        ScorerSpec::lexical()
    }
}

impl ScorerSpec {
    pub fn lexical() -> Self {
        ScorerSpec {
            kind: ScorerKind::Lexical,
            endpoint: None,
            model: None,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }

    pub fn embedding(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ScorerSpec {
            kind: ScorerKind::Embedding,
            endpoint: Some(endpoint.into()),
            model: Some(model.into()),
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }

    pub fn entailment(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ScorerSpec {
            kind: ScorerKind::Entailment,
            endpoint: Some(endpoint.into()),
            model: Some(model.into()),
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }

    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.cache_capacity = capacity;
        self
    }

    /// Fills a missing endpoint/model from `SXQ_EMBED_URL`, `SXQ_NLI_URL`
    /// and `SXQ_MODEL`.
    pub fn with_env_defaults(mut self) -> Self {
        let url_var = match self.kind {
            ScorerKind::Lexical => return self,
            ScorerKind::Embedding => ENV_EMBED_URL,
            ScorerKind::Entailment => ENV_NLI_URL,
        };
        if self.endpoint.is_none() {
            self.endpoint = std::env::var(url_var).ok().filter(|v| !v.is_empty());
        }
        if self.model.is_none() {
            self.model = std::env::var(ENV_MODEL).ok().filter(|v| !v.is_empty());
        }
        self
    }

    pub fn validate(&self) -> Result<(), ScorerError> {
        let external = self.kind != ScorerKind::Lexical;
        if external != self.endpoint.is_some() || external != self.model.is_some() {
            return Err(ScorerError::Config(if external {
                format!("{:?} scorer needs both an endpoint and a model name", self.kind)
            } else {
                "lexical scorer takes no endpoint or model".to_string()
            }));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScorerError {
    #[error("scorer configuration: {0}")]
    Config(String),
    #[error("transport error calling {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("malformed scorer response: {0}")]
    MalformedResponse(String),
    #[error("no recorded output for {0:?}")]
    ReplayMiss(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(NodeId),
}

impl ScorerError {
    /// Transport failures may succeed on retry; everything else will not.
    pub fn is_retriable(&self) -> bool {
        matches!(self, ScorerError::Transport { .. })
    }
}

/// Atomic relevance function. Implementations must be callable from many
/// threads at once.
pub trait Scorer: Send + Sync {
    fn score(&self, text: &str, condition: &str) -> Result<Score, ScorerError>;
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn score(&self, text: &str, condition: &str) -> Result<Score, ScorerError> {
        (**self).score(text, condition)
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, text: &str, condition: &str) -> Result<Score, ScorerError> {
        (**self).score(text, condition)
    }
}

/// Instantiates the scorer described by `spec`.
pub fn build_scorer(spec: &ScorerSpec) -> Result<Arc<dyn Scorer>, ScorerError> {
    spec.validate()?;
    let endpoint = spec.endpoint.as_deref().unwrap_or_default();
    let model = spec.model.clone().unwrap_or_default();
    Ok(match spec.kind {
        ScorerKind::Lexical => Arc::new(LexicalScorer),
        ScorerKind::Embedding => {
            let backend: Box<dyn EmbeddingBackend> = match replay_path(endpoint) {
                Some(path) => Box::new(ReplayEmbedder::from_file(path)?),
                None => Box::new(HttpEmbedder::new(endpoint)),
            };
            Arc::new(EmbeddingScorer::new(backend, model, spec.cache_capacity))
        }
        ScorerKind::Entailment => {
            let backend: Box<dyn NliBackend> = match replay_path(endpoint) {
                Some(path) => Box::new(ReplayNli::from_file(path)?),
                None => Box::new(HttpNli::new(endpoint)),
            };
            Arc::new(EntailmentScorer::new(backend, model, spec.cache_capacity))
        }
    })
}

fn replay_path(endpoint: &str) -> Option<&str> {
    endpoint.strip_prefix("file://")
}

/// Lowercased maximal runs of letters and digits.
pub fn lexical_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Fraction of distinct condition tokens that also occur in `text`.
pub fn lexical_score(text: &str, condition: &str) -> Score {
    let wanted: HashSet<String> = lexical_tokens(condition).collect();
    if wanted.is_empty() {
        return Score::ZERO;
    }
    let have: HashSet<String> = lexical_tokens(text).collect();
    let hits = wanted.iter().filter(|t| have.contains(*t)).count();
    Score::saturating(hits as f64 / wanted.len() as f64)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(&self, text: &str, condition: &str) -> Result<Score, ScorerError> {
        Ok(lexical_score(text, condition))
    }
}

/// Local relevance of one node. `Node` scores the canonical node text; an
/// attribute target scores the raw attribute value, and a node without that
/// attribute scores 0.
pub fn atom(
    scorer: &dyn Scorer,
    tree: &MemoryTree,
    id: &NodeId,
    target: &Target,
    condition: &str,
) -> Result<Score, ScorerError> {
    let node = tree
        .node(id)
        .map_err(|_| ScorerError::UnknownNode(id.clone()))?;
    match target {
        Target::Node => {
            let text = tree.node_text(id).expect("node exists");
            scorer.score(&text, condition)
        }
        Target::Attribute(name) => match node.attributes.get(name) {
            Some(value) => scorer.score(value, condition),
            None => Ok(Score::ZERO),
        },
    }
}
