//! The `sxq` subcommands as plain functions returning an exit code and the
//! text destined for stdout, so they can be tested without a process.

use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sxq_core::baseline::{flat_retrieve, flatten};
use sxq_core::bench::{run_bench, BenchConfig, BenchFailure, SessionScript};
use sxq_core::response::{run_query, ErrorBody, QueryError, QueryRequest};
use sxq_core::scorer::{build_scorer, ScorerError, ScorerKind, ScorerSpec, DEFAULT_CACHE_CAPACITY};
use sxq_core::tree::{
    load_memory, parse_document, to_document, validate_schema, DocumentError, MemoryTree, MutationError,
    MutationSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SYNTAX: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SCORER: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

impl Outcome {
    fn json(code: i32, value: &impl Serialize) -> Self {
        let mut stdout = serde_json::to_string(value).expect("output serializes");
        stdout.push('\n');
        Outcome { code, stdout }
    }

    fn error(code: i32, body: ErrorBody) -> Self {
        Outcome::json(code, &body)
    }
}

/// Scorer flags shared by the subcommands that score.
#[derive(Debug, Clone)]
pub struct ScorerArgs {
    pub kind: ScorerKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl ScorerArgs {
    pub fn spec(&self) -> ScorerSpec {
        ScorerSpec {
            kind: self.kind,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
        .with_env_defaults()
    }
}

fn read_memory(path: &Path) -> Result<MemoryTree, Outcome> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Outcome::error(EXIT_INPUT, ErrorBody::new("io", format!("{}: {e}", path.display())))
    })?;
    load_memory(&text).map_err(|e| document_error(path, e))
}

fn document_error(path: &Path, e: DocumentError) -> Outcome {
    match e {
        DocumentError::Schema(v) => Outcome::error(EXIT_INPUT, ErrorBody::schema(v)),
        other => Outcome::error(EXIT_INPUT, ErrorBody::new("document", format!("{}: {other}", path.display()))),
    }
}

fn scorer_error(e: &ScorerError) -> Outcome {
    match e {
        ScorerError::Config(_) => Outcome::error(EXIT_INPUT, ErrorBody::new("scorer-config", e.to_string())),
        _ => Outcome::error(EXIT_SCORER, ErrorBody::from(&QueryError::Scorer(e.clone()))),
    }
}

/// `sxq query`: exit 0 on success, 1 on a syntax error, 2 on unreadable or
/// invalid input, 3 when the scorer fails.
pub fn cmd_query(memory: &Path, request: &QueryRequest) -> Outcome {
    run(|| {
        let tree = read_memory(memory)?;
        let scorer = build_scorer(&request.scorer).map_err(|e| scorer_error(&e))?;
        match run_query(&tree, request, scorer.as_ref()) {
            Ok(resp) => Ok(Outcome::json(EXIT_OK, &resp)),
            Err(QueryError::Scorer(e)) => Err(scorer_error(&e)),
            Err(e @ QueryError::Syntax(_)) => Err(Outcome::error(EXIT_SYNTAX, ErrorBody::from(&e))),
            Err(e @ QueryError::InvalidRequest(_)) => Err(Outcome::error(EXIT_INPUT, ErrorBody::from(&e))),
        }
    })
}

/// `sxq mutate`: writes the mutated document to `out`; `memory` is left
/// untouched.
pub fn cmd_mutate(memory: &Path, spec_file: &Path, summary: &str, out: &Path) -> Outcome {
    run(|| {
        let tree = read_memory(memory)?;
        let text = std::fs::read_to_string(spec_file).map_err(|e| {
            Outcome::error(EXIT_INPUT, ErrorBody::new("io", format!("{}: {e}", spec_file.display())))
        })?;
        let spec: MutationSpec = serde_json::from_str(&text).map_err(|e| {
            Outcome::error(EXIT_INPUT, ErrorBody::new("spec", format!("{}: {e}", spec_file.display())))
        })?;
        let next = spec.apply(&tree, summary).map_err(|e| match e {
            MutationError::Schema(v) => Outcome::error(EXIT_INPUT, ErrorBody::schema(v)),
            other => Outcome::error(EXIT_INPUT, ErrorBody::new("mutation", other.to_string())),
        })?;
        std::fs::write(out, to_document(&next)).map_err(|e| {
            Outcome::error(EXIT_INPUT, ErrorBody::new("io", format!("{}: {e}", out.display())))
        })?;
        let version = next.children(next.root_id()).expect("root").last().cloned();
        Ok(Outcome::json(EXIT_OK, &json!({"version": version, "out": out})))
    })
}

/// `sxq baseline`: flat top-k retrieval.
pub fn cmd_baseline(memory: &Path, request: &str, k: usize, scorer: &ScorerSpec) -> Outcome {
    run(|| {
        if k == 0 {
            return Err(Outcome::error(EXIT_INPUT, ErrorBody::new("invalid-request", "k must be at least 1")));
        }
        let tree = read_memory(memory)?;
        let scorer = build_scorer(scorer).map_err(|e| scorer_error(&e))?;
        let hits = flat_retrieve(&flatten(&tree), request, k, scorer.as_ref()).map_err(|e| scorer_error(&e))?;
        Ok(Outcome::json(EXIT_OK, &json!({ "results": hits })))
    })
}

/// `sxq bench`: per-turn token counts as CSV (`turn,strategy,tokens,hit`).
pub fn cmd_bench(memory: &Path, script: &Path, config: &BenchConfig, scorer: &ScorerSpec) -> Outcome {
    run(|| {
        let tree = read_memory(memory)?;
        let text = std::fs::read_to_string(script).map_err(|e| {
            Outcome::error(EXIT_INPUT, ErrorBody::new("io", format!("{}: {e}", script.display())))
        })?;
        let script: SessionScript = serde_json::from_str(&text)
            .map_err(|e| Outcome::error(EXIT_INPUT, ErrorBody::new("script", e.to_string())))?;
        let scorer = build_scorer(scorer).map_err(|e| scorer_error(&e))?;
        let rows = run_bench(tree, &script, config, scorer.as_ref()).map_err(|e| {
            let code = match &e.failure {
                BenchFailure::Query(QueryError::Syntax(_)) => EXIT_SYNTAX,
                BenchFailure::Query(QueryError::Scorer(s))
                | BenchFailure::Scorer(s)
                    if !matches!(s, ScorerError::Config(_)) =>
                {
                    EXIT_SCORER
                }
                _ => EXIT_INPUT,
            };
            Outcome::error(code, ErrorBody::new("bench", e.to_string()))
        })?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &rows {
            w.serialize(row).expect("in-memory csv write");
        }
        let bytes = w.into_inner().expect("in-memory csv flush");
        Ok(Outcome {
            code: EXIT_OK,
            stdout: String::from_utf8(bytes).expect("csv is utf-8"),
        })
    })
}

/// `sxq validate`: checks document shape and schema conformance.
pub fn cmd_validate(memory: &Path) -> Outcome {
    run(|| {
        let text = std::fs::read_to_string(memory).map_err(|e| {
            Outcome::error(EXIT_INPUT, ErrorBody::new("io", format!("{}: {e}", memory.display())))
        })?;
        let tree = parse_document(&text).map_err(|e| document_error(memory, e))?;
        let violations = validate_schema(&tree);
        if violations.is_empty() {
            Ok(Outcome::json(EXIT_OK, &json!({"valid": true, "nodes": tree.len()})))
        } else {
            Err(Outcome::error(EXIT_INPUT, ErrorBody::schema(violations)))
        }
    })
}

fn run(f: impl FnOnce() -> Result<Outcome, Outcome>) -> Outcome {
    f().unwrap_or_else(|e| e)
}
