use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use evidence_reward::retrieval::{CHUNK_OVERLAP, CHUNK_SIZE};
use evidence_reward::{Domain, EngineConfig};
use evreward::commands;
use evreward::service::{self, AppState};
use evreward::settings::{build_backend, build_scorer, load_config, read_text, Overrides};
use evreward::{mock_server, spawn_server, CliError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DomainArg {
    Medical,
    Legal,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "evreward", version, about = "Evidence-grounded reward scoring and evaluation")]
struct Cli {
    /// JSON config file.
    #[arg(long, global = true, env = "EVREWARD_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, env = "EVREWARD_DOMAIN")]
    domain: Option<DomainArg>,
    /// Base URL of the scorer backend.
    #[arg(long, global = true, env = "EVREWARD_BACKEND_URL")]
    backend_url: Option<String>,
    #[arg(long, global = true, env = "EVREWARD_BEARER_TOKEN", hide_env_values = true)]
    bearer_token: Option<String>,
    /// Use the deterministic in-process backend.
    #[arg(long, global = true, env = "EVREWARD_MOCK")]
    mock: bool,
    /// Bootstrap seed.
    #[arg(long, global = true, env = "EVREWARD_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "EVREWARD_K")]
    k: Option<usize>,
    #[arg(long, global = true, env = "EVREWARD_TAU")]
    tau: Option<f64>,
    #[arg(long, global = true, env = "EVREWARD_GROUP_SIZE")]
    group_size: Option<usize>,
    /// Require completions to be a bare JSON object.
    #[arg(long, global = true, env = "EVREWARD_STRICT")]
    strict: bool,
    #[arg(long, global = true, value_enum, default_value_t, env = "EVREWARD_FORMAT")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-completion rewards and group advantages as JSONL.
    Score {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        rollouts: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Corpus metrics with bootstrap intervals.
    Evaluate {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        rollouts: PathBuf,
        /// Row label for CSV output.
        #[arg(long, default_value = "model")]
        method: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Self-consistency aggregation of sampled outputs.
    AggregateSc {
        #[arg(long)]
        samples: PathBuf,
        /// Emit clusters along with the aggregated output.
        #[arg(long)]
        detail: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Chunk and embed a `{doc_id, text}` JSONL corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = CHUNK_SIZE)]
        chunk_size: usize,
        #[arg(long, default_value_t = CHUNK_OVERLAP)]
        overlap: usize,
    },
    /// Top-k chunks for a query; k comes from --k.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Run the reward service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080", env = "EVREWARD_ADDR")]
        addr: SocketAddr,
    },
    /// Serve the mock backend over the backend wire protocol.
    MockBackend {
        #[arg(long, default_value = "127.0.0.1:8090")]
        addr: SocketAddr,
    },
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        domain: cli.domain.map(|d| match d {
            DomainArg::Medical => Domain::Medical,
            DomainArg::Legal => Domain::Legal,
        }),
        backend_url: cli.backend_url.clone(),
        bearer_token: cli.bearer_token.clone(),
        mock: cli.mock,
        seed: cli.seed,
        k: cli.k,
        tau: cli.tau,
        group_size: cli.group_size,
        strict: cli.strict,
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::input(format!("stdout: {e}")))
        }
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::input(format!("runtime: {e}")))
}

fn serve_forever(addr: SocketAddr, app: axum::Router) -> Result<(), CliError> {
    runtime()?.block_on(async move {
        let (local, handle) = spawn_server(addr, app)
            .await
            .map_err(|e| CliError::input(format!("bind {addr}: {e}")))?;
        eprintln!("listening on http://{local}");
        tokio::select! {
            r = handle => match r {
                Ok(Ok(())) => Ok(()),
                Ok(Err(e)) => Err(CliError::input(format!("server: {e}"))),
                Err(e) => Err(CliError::input(format!("server: {e}"))),
            },
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg: EngineConfig = load_config(cli.config.as_deref(), &overrides(&cli))?;
    match cli.command {
        Command::Score { cases, rollouts, output } => {
            let (cases, rollouts) = (read_text(&cases)?, read_text(&rollouts)?);
            let scorer = build_scorer(&cfg)?;
            let records = commands::score(&cases, &rollouts, &cfg, &scorer)?;
            emit(output.as_deref(), &commands::to_jsonl(&records))
        }
        Command::Evaluate { cases, rollouts, method, output } => {
            let (cases, rollouts) = (read_text(&cases)?, read_text(&rollouts)?);
            let scorer = build_scorer(&cfg)?;
            let report = commands::evaluate(&cases, &rollouts, &cfg, &scorer)?;
            let text = match cli.format {
                Format::Json => pretty(&report),
                Format::Csv => report.to_csv(&method),
            };
            emit(output.as_deref(), &text)
        }
        Command::AggregateSc { samples, detail, output } => {
            let samples = read_text(&samples)?;
            let scorer = build_scorer(&cfg)?;
            let result = commands::aggregate_sc(&samples, &cfg, &scorer)?;
            for d in &result.output.diagnostics {
                eprintln!("warning: {d}");
            }
            let text = if detail { pretty(&result) } else { pretty(&result.output) };
            emit(output.as_deref(), &text)
        }
        Command::Index { corpus, output, chunk_size, overlap } => {
            let corpus = read_text(&corpus)?;
            let scorer = build_scorer(&cfg)?;
            let index = commands::index(&corpus, chunk_size, overlap, &scorer)?;
            eprintln!("indexed {} chunks", index.len());
            emit(Some(&output), &index.to_json())
        }
        Command::Query { index, text } => {
            let index = read_text(&index)?;
            let scorer = build_scorer(&cfg)?;
            let hits = commands::run_query(&index, &text, cfg.top_k, &scorer)?;
            emit(None, &pretty(&hits))
        }
        Command::Serve { addr } => {
            let scorer = build_scorer(&cfg)?;
            scorer
                .backend()
                .health()
                .map_err(|e| CliError::Backend(format!("startup health check: {e}")))?;
            let state = AppState {
                config: Arc::new(cfg),
                scorer: Arc::new(scorer),
            };
            serve_forever(addr, service::router(state))
        }
        Command::MockBackend { addr } => {
            let mut mock_cfg = cfg.clone();
            mock_cfg.backend.mock = true;
            serve_forever(addr, mock_server::router(build_backend(&mock_cfg)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
