use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Cache, Score, Scorer, ScorerError};

/// Turns strings into vectors, one per input, in input order.
pub trait EmbeddingBackend: Send + Sync {
    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, ScorerError>;
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

pub(super) fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .into()
}

/// POSTs JSON to `endpoint` and decodes the JSON reply.
pub(super) fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    endpoint: &str,
    body: &Req,
) -> Result<Resp, ScorerError> {
    let transport = |message: String| ScorerError::Transport {
        endpoint: endpoint.to_string(),
        message,
    };
    let mut resp = agent
        .post(endpoint)
        .send_json(body)
        .map_err(|e| transport(e.to_string()))?;
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| transport(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| ScorerError::MalformedResponse(e.to_string()))
}

/// `POST {"model", "input": [..]}` → `{"embeddings": [[..]]}`.
pub struct HttpEmbedder {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            agent: agent(),
        }
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, ScorerError> {
        let resp: EmbedResponse = post_json(
            &self.agent,
            &self.endpoint,
            &EmbedRequest {
                model,
                input: inputs,
            },
        )?;
        if resp.embeddings.len() != inputs.len() {
            return Err(ScorerError::MalformedResponse(format!(
                "asked for {} embeddings, got {}",
                inputs.len(),
                resp.embeddings.len()
            )));
        }
        Ok(resp.embeddings)
    }
}

/// Recorded embeddings keyed by input text.
///
/// File shape: `{"model": "...", "embeddings": {"text": [..], ...}}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReplayEmbedder {
    #[serde(default)]
    pub model: Option<String>,
    pub embeddings: HashMap<String, Vec<f64>>,
}

impl ReplayEmbedder {
    pub fn from_map(embeddings: HashMap<String, Vec<f64>>) -> Self {
        ReplayEmbedder {
            model: None,
            embeddings,
        }
    }

    pub fn from_file(path: &str) -> Result<Self, ScorerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScorerError::Config(format!("cannot read replay file {path}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| ScorerError::Config(format!("bad replay file {path}: {e}")))
    }
}

impl EmbeddingBackend for ReplayEmbedder {
    fn embed(&self, _model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, ScorerError> {
        inputs
            .iter()
            .map(|i| {
                self.embeddings
                    .get(i)
                    .cloned()
                    .ok_or_else(|| ScorerError::ReplayMiss(i.clone()))
            })
            .collect()
    }
}

/// Cosine similarity; 0 when either vector has zero length.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, ScorerError> {
    if a.len() != b.len() {
        return Err(ScorerError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Cosine similarity between the embedded node text and condition, with
/// negative similarities clamped to 0.
pub struct EmbeddingScorer {
    backend: Box<dyn EmbeddingBackend>,
    model: String,
    cache: Cache<(String, String), Arc<Vec<f64>>>,
}

impl EmbeddingScorer {
    pub fn new(backend: Box<dyn EmbeddingBackend>, model: impl Into<String>, cache_capacity: usize) -> Self {
        EmbeddingScorer {
            backend,
            model: model.into(),
            cache: Cache::new(cache_capacity),
        }
    }

    fn vectors(&self, inputs: [&str; 2]) -> Result<[Arc<Vec<f64>>; 2], ScorerError> {
        let mut found: [Option<Arc<Vec<f64>>>; 2] = [None, None];
        let mut missing: Vec<String> = Vec::new();
        for (slot, input) in found.iter_mut().zip(inputs) {
            *slot = self.cache.get(&(self.model.clone(), input.to_string()));
            if slot.is_none() && !missing.iter().any(|m| m == input) {
                missing.push(input.to_string());
            }
        }
        if !missing.is_empty() {
            let vectors = self.backend.embed(&self.model, &missing)?;
            if vectors.len() != missing.len() {
                return Err(ScorerError::MalformedResponse(format!(
                    "asked for {} embeddings, got {}",
                    missing.len(),
                    vectors.len()
                )));
            }
            for (input, v) in missing.into_iter().zip(vectors) {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(ScorerError::MalformedResponse("non-finite embedding".into()));
                }
                let v = Arc::new(v);
                for (slot, want) in found.iter_mut().zip(inputs) {
                    if slot.is_none() && want == input {
                        *slot = Some(v.clone());
                    }
                }
                self.cache.insert((self.model.clone(), input), v);
            }
        }
        let [a, b] = found;
        Ok([a.expect("filled"), b.expect("filled")])
    }
}

impl Scorer for EmbeddingScorer {
    fn score(&self, text: &str, condition: &str) -> Result<Score, ScorerError> {
        let [t, c] = self.vectors([text, condition])?;
        Ok(Score::saturating(cosine(&t, &c)?))
    }
}
