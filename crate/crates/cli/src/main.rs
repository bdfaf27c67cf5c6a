use std::io::{IsTerminal, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use sxq::{
    cmd_baseline, cmd_bench, cmd_mutate, cmd_query, cmd_validate, Outcome, ScorerArgs, EXIT_INPUT,
};
use sxq_core::bench::{BenchConfig, Strategy, DEFAULT_FLAT_K};
use sxq_core::response::{QueryRequest, DEFAULT_TOP_K};
use sxq_core::scorer::ScorerKind;
use sxq_service::AppState;

#[derive(Parser)]
#[command(name = "sxq", version, about = "Structured retrieval over versioned memory trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScorerFlags {
    /// lexical, embedding or entailment
    #[arg(long, default_value = "lexical")]
    scorer: ScorerKind,
    /// Model server URL, or file://<replay.json> for recorded outputs
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

impl ScorerFlags {
    fn args(&self) -> ScorerArgs {
        ScorerArgs {
            kind: self.scorer,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a query and print the ranked results as JSON
    Query {
        #[arg(long)]
        memory: PathBuf,
        /// Query text
        #[arg(long, short)]
        query: String,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Include the per-step execution trace
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        scorer: ScorerFlags,
    },
    /// Apply a mutation spec as a new version and write the result elsewhere
    Mutate {
        #[arg(long)]
        memory: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        summary: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API over one memory file
    Serve {
        #[arg(long)]
        memory: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Mutation journal; defaults to <memory>.journal.jsonl
        #[arg(long)]
        journal: Option<PathBuf>,
    },
    /// Replay a session script and print per-turn token counts as CSV
    Bench {
        #[arg(long)]
        memory: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Comma-separated subset of in-context,flat,sxq
        #[arg(long, value_delimiter = ',', default_value = "in-context,flat,sxq")]
        strategies: Vec<Strategy>,
        /// Items the flat strategy retrieves per turn
        #[arg(long, default_value_t = DEFAULT_FLAT_K)]
        k: usize,
        #[command(flatten)]
        scorer: ScorerFlags,
    },
    /// Flat top-k retrieval over per-node texts
    Baseline {
        #[arg(long)]
        memory: PathBuf,
        #[arg(long)]
        request: String,
        #[arg(long, default_value_t = DEFAULT_FLAT_K)]
        k: usize,
        #[command(flatten)]
        scorer: ScorerFlags,
    },
    /// Check a memory file against its schema
    Validate {
        #[arg(long)]
        memory: PathBuf,
    },
}

fn main() -> ExitCode {
    let outcome = match Cli::parse().command {
        Command::Query {
            memory,
            query,
            top_k,
            trace,
            scorer,
        } => cmd_query(
            &memory,
            &QueryRequest {
                query,
                scorer: scorer.args().spec(),
                top_k,
                include_trace: trace,
            },
        ),
        Command::Mutate {
            memory,
            spec,
            summary,
            out,
        } => cmd_mutate(&memory, &spec, &summary, &out),
        Command::Serve {
            memory,
            port,
            host,
            journal,
        } => return serve(memory, SocketAddr::new(host, port), journal),
        Command::Bench {
            memory,
            script,
            strategies,
            k,
            scorer,
        } => {
            let config = BenchConfig {
                strategies,
                flat_k: k,
            };
            cmd_bench(&memory, &script, &config, &scorer.args().spec())
        }
        Command::Baseline {
            memory,
            request,
            k,
            scorer,
        } => cmd_baseline(&memory, &request, k, &scorer.args().spec()),
        Command::Validate { memory } => cmd_validate(&memory),
    };
    emit(outcome)
}

fn emit(outcome: Outcome) -> ExitCode {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not worth a panic
    let _ = out.write_all(outcome.stdout.as_bytes());
    let _ = out.flush();
    ExitCode::from(outcome.code as u8)
}

fn serve(memory: PathBuf, addr: SocketAddr, journal: Option<PathBuf>) -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let journal = journal.unwrap_or_else(|| {
        let mut p = memory.clone().into_os_string();
        p.push(".journal.jsonl");
        p.into()
    });
    let state = match AppState::load(&memory, Some(&journal)) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("sxq serve: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(sxq_service::serve(state, addr)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sxq serve: cannot listen on {addr}: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
