use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::embedding::{agent, post_json};
use super::{Cache, Score, Scorer, ScorerError};

/// Class probabilities returned by an NLI model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliProbabilities {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl NliProbabilities {
    fn check(self) -> Result<Self, ScorerError> {
        let ok = [self.entailment, self.neutral, self.contradiction]
            .iter()
            .all(|p| p.is_finite() && (0.0..=1.0).contains(p));
        if ok {
            Ok(self)
        } else {
            Err(ScorerError::MalformedResponse(format!(
                "probabilities out of range: {self:?}"
            )))
        }
    }
}

pub trait NliBackend: Send + Sync {
    fn classify(&self, model: &str, premise: &str, hypothesis: &str)
        -> Result<NliProbabilities, ScorerError>;
}

#[derive(Serialize)]
struct NliRequest<'a> {
    model: &'a str,
    premise: &'a str,
    hypothesis: &'a str,
}

/// `POST {"model", "premise", "hypothesis"}` →
/// `{"entailment", "neutral", "contradiction"}`.
pub struct HttpNli {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpNli {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpNli {
            endpoint: endpoint.into(),
            agent: agent(),
        }
    }
}

impl NliBackend for HttpNli {
    fn classify(
        &self,
        model: &str,
        premise: &str,
        hypothesis: &str,
    ) -> Result<NliProbabilities, ScorerError> {
        post_json(
            &self.agent,
            &self.endpoint,
            &NliRequest {
                model,
                premise,
                hypothesis,
            },
        )
    }
}

/// Recorded classifications, `premise -> hypothesis -> probabilities`.
///
/// File shape: `{"model": "...", "entailments": {"premise": {"hypothesis": {...}}}}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReplayNli {
    #[serde(default)]
    pub model: Option<String>,
    pub entailments: HashMap<String, HashMap<String, NliProbabilities>>,
}

impl ReplayNli {
    pub fn from_file(path: &str) -> Result<Self, ScorerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScorerError::Config(format!("cannot read replay file {path}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| ScorerError::Config(format!("bad replay file {path}: {e}")))
    }

    pub fn insert(&mut self, premise: &str, hypothesis: &str, p: NliProbabilities) {
        self.entailments
            .entry(premise.to_string())
            .or_default()
            .insert(hypothesis.to_string(), p);
    }
}

impl NliBackend for ReplayNli {
    fn classify(
        &self,
        _model: &str,
        premise: &str,
        hypothesis: &str,
    ) -> Result<NliProbabilities, ScorerError> {
        self.entailments
            .get(premise)
            .and_then(|h| h.get(hypothesis))
            .copied()
            .ok_or_else(|| ScorerError::ReplayMiss(format!("{premise} => {hypothesis}")))
    }
}

/// Probability that the node text (premise) entails the condition
/// (hypothesis).
pub struct EntailmentScorer {
    backend: Box<dyn NliBackend>,
    model: String,
    cache: Cache<(String, String, String), f64>,
}

impl EntailmentScorer {
    pub fn new(backend: Box<dyn NliBackend>, model: impl Into<String>, cache_capacity: usize) -> Self {
        EntailmentScorer {
            backend,
            model: model.into(),
            cache: Cache::new(cache_capacity),
        }
    }
}

impl Scorer for EntailmentScorer {
    fn score(&self, text: &str, condition: &str) -> Result<Score, ScorerError> {
        let key = (self.model.clone(), text.to_string(), condition.to_string());
        if let Some(p) = self.cache.get(&key) {
            return Ok(Score::saturating(p));
        }
        let probs = self.backend.classify(&self.model, text, condition)?.check()?;
        self.cache.insert(key, probs.entailment);
        Ok(Score::saturating(probs.entailment))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(e: f64, n: f64, c: f64) -> NliProbabilities {
        NliProbabilities {
            entailment: e,
            neutral: n,
            contradiction: c,
        }
    }

    fn scorer(entries: &[(&str, &str, NliProbabilities)], capacity: usize) -> EntailmentScorer {
        let mut r = ReplayNli::default();
        for (p, h, v) in entries {
            r.insert(p, h, *v);
        }
        EntailmentScorer::new(Box::new(r), "nli", capacity)
    }

    #[test]
    fn passes_through_entailment_probability() {
        let s = scorer(
            &[("p", "h", probs(0.9, 0.05, 0.05)), ("p", "z", probs(0.0, 0.5, 0.5))],
            4,
        );
        assert_eq!(s.score("p", "h").unwrap().value(), 0.9);
        assert_eq!(s.score("p", "z").unwrap().value(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_probabilities() {
        let s = scorer(&[("p", "h", probs(1.3, 0.0, 0.0))], 4);
        assert!(matches!(s.score("p", "h"), Err(ScorerError::MalformedResponse(_))));
    }

    #[test]
    fn caching_is_invisible() {
        let entries = [("p", "h", probs(0.42, 0.3, 0.28))];
        let a = scorer(&entries, 0);
        let b = scorer(&entries, 16);
        for _ in 0..2 {
            assert_eq!(a.score("p", "h").unwrap(), b.score("p", "h").unwrap());
        }
    }

    #[test]
    fn unreachable_endpoint_surfaces_transport_error() {
        let s = EntailmentScorer::new(Box::new(HttpNli::new("http://127.0.0.1:1/nli")), "m", 4);
        assert!(matches!(s.score("p", "h"), Err(ScorerError::Transport { .. })));
    }

    #[test]
    fn replay_fixture_loads() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/scorer_replays/acl_nli.json");
        let r = ReplayNli::from_file(path).unwrap();
        let p = r
            .classify("m", "POI conference opening keynote 09:00", "conference")
            .unwrap();
        assert_eq!(p.entailment, 0.93);
    }
}
