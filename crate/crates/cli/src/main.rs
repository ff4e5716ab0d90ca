mod render;

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ivie_core::batch::layout_all_lines;
use ivie_core::layout::layout_blocks;
use ivie_core::pipeline::{provider_from_config, Delivery};
use ivie_core::session::{serve_stdio, Session, SessionConfig, WsServer, DEFAULT_DEBOUNCE};
use ivie_core::{
    BlockExplanation, ExecMode, ExplanationSet, ExpressionExplanation, GridMetrics, LabelBox,
    MarginBox, Pipeline, PipelineOptions, ProviderConfig, ProviderKind, Suggestion,
};
use serde::Serialize;

const EXIT_USAGE: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ivie",
    version,
    about = "Anchored explanations for generated code"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explain a file (or stdin) as one suggestion and print the result.
    Explain(ExplainArgs),
    /// Run the editor protocol server.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderArg {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GranularityArg {
    Expressions,
    Blocks,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputArg {
    Json,
    AnnotatedText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExecArg {
    Parallel,
    Sequential,
}

#[derive(Debug, Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "mock")]
    provider: ProviderArg,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    temperature: f64,
    #[arg(long, default_value_t = 1000)]
    max_tokens: u32,
    /// Completion endpoint for the remote provider.
    #[arg(long)]
    endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "IVIE_API_KEY")]
    api_key_env: String,
    #[arg(long, value_enum, default_value = "both")]
    granularity: GranularityArg,
    #[arg(long, default_value_t = 120)]
    viewport_cols: usize,
    #[arg(long, value_enum, default_value = "parallel")]
    exec: ExecArg,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    /// Input file, or `-` for stdin.
    #[arg(default_value = "-")]
    input: String,
    #[arg(long, value_enum, default_value = "json")]
    output: OutputArg,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Debug, Args)]
#[group(id = "transport", required = true, multiple = false, args = ["stdio", "listen"])]
struct ServeArgs {
    /// Speak the protocol over stdin/stdout.
    #[arg(long)]
    stdio: bool,
    /// Accept websocket connections on this address.
    #[arg(long, value_name = "ADDR")]
    listen: Option<String>,
    /// Milliseconds to wait before contacting a remote provider.
    #[arg(long, default_value_t = DEFAULT_DEBOUNCE.as_millis() as u64)]
    debounce_ms: u64,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Debug)]
struct UsageError(anyhow::Error);

#[derive(Debug)]
struct ProviderFailure(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::fmt::Display for ProviderFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for ProviderFailure {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(UsageError(e))
}

fn provider_failure(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(ProviderFailure(e))
}

impl EngineArgs {
    fn provider_config(&self) -> Result<ProviderConfig> {
        let mut cfg = ProviderConfig {
            provider_kind: match self.provider {
                ProviderArg::Mock => ProviderKind::Mock,
                ProviderArg::Remote => ProviderKind::Remote,
            },
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            api_key_env_var: self.api_key_env.clone(),
            ..ProviderConfig::default()
        };
        if let Some(m) = &self.model {
            cfg.model_id = m.clone();
        }
        if let Some(url) = &self.endpoint {
            cfg.endpoint_url = url.clone();
        }
        cfg.validate().map_err(|e| usage(e.into()))?;
        Ok(cfg)
    }

    fn grid(&self) -> Result<GridMetrics> {
        let grid = GridMetrics {
            viewport_cols: self.viewport_cols,
            ..GridMetrics::default()
        };
        grid.validate().map_err(|e| usage(e.into()))?;
        Ok(grid)
    }

    fn granularity(&self) -> ivie_core::Granularity {
        match self.granularity {
            GranularityArg::Expressions => ivie_core::Granularity::Expressions,
            GranularityArg::Blocks => ivie_core::Granularity::Blocks,
            GranularityArg::Both => ivie_core::Granularity::Both,
        }
    }

    fn exec(&self) -> ExecMode {
        match self.exec {
            ExecArg::Parallel => ExecMode::Parallel,
            ExecArg::Sequential => ExecMode::Sequential,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct LayoutDoc {
    anchor_col: Option<usize>,
    margins: Vec<MarginBox>,
    /// Labels each line shows when hovered, at absolute rows.
    labels_by_line: BTreeMap<usize, Vec<LabelBox>>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct ExplainDoc {
    lines: Vec<String>,
    expressions_by_line: BTreeMap<usize, Vec<ExpressionExplanation>>,
    blocks: Vec<BlockExplanation>,
    layout: LayoutDoc,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    failures: Vec<String>,
}

fn read_input(input: &str) -> Result<(String, String)> {
    if input == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")
            .map_err(usage)?;
        return Ok(("stdin".into(), text));
    }
    let path = PathBuf::from(input);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)?;
    Ok((input.to_string(), text))
}

fn split_lines(text: &str) -> Vec<String> {
    let mut lines: Vec<String> = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    if lines.len() > 1 && lines.last().is_some_and(String::is_empty) {
        lines.pop();
    }
    lines
}

fn explain(args: &ExplainArgs) -> Result<ExitCode> {
    let cfg = args.engine.provider_config()?;
    let grid = args.engine.grid()?;
    let (doc_id, text) = read_input(&args.input)?;
    let lines = split_lines(&text);
    let suggestion = Suggestion::whole_file(doc_id, lines).map_err(|e| usage(e.into()))?;

    let provider = provider_from_config(&cfg).map_err(|e| provider_failure(e.into()))?;
    let options = PipelineOptions {
        exec: args.engine.exec(),
        delivery: Delivery::Settled,
        granularity: args.engine.granularity(),
        start_delay: Duration::ZERO,
    };
    let pipeline = Pipeline::new(provider, cfg).with_options(options);
    let events = pipeline
        .run_to_end(&suggestion)
        .map_err(|e| provider_failure(e.into()))?;
    let mut set =
        ExplanationSet::new(&suggestion.suggestion_id).with_granularity(options.granularity);
    let mut failures = Vec::new();
    for ev in &events {
        set.apply(ev);
        if let ivie_core::ExplanationEvent::RequestFailed { line, reason } = ev {
            failures.push(match line {
                Some(l) => format!("line {l}: {reason}"),
                None => format!("blocks: {reason}"),
            });
        }
    }

    let margins = layout_blocks(&suggestion.line_lengths(), &set.blocks, &grid);
    let labels_by_line: BTreeMap<usize, Vec<LabelBox>> =
        layout_all_lines(&suggestion, &set, &grid, options.exec)
            .into_iter()
            .enumerate()
            .filter(|(_, labels)| !labels.is_empty())
            .collect();

    let mut out = io::stdout().lock();
    match args.output {
        OutputArg::Json => {
            let doc = ExplainDoc {
                layout: LayoutDoc {
                    anchor_col: margins.first().map(|m| m.anchor_col),
                    margins,
                    labels_by_line,
                },
                lines: suggestion.lines.clone(),
                expressions_by_line: set.expressions_by_line.clone(),
                blocks: set.blocks.clone(),
                failures: failures.clone(),
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
        OutputArg::AnnotatedText => {
            out.write_all(
                render::annotated(&suggestion.lines, &margins, &labels_by_line, &grid).as_bytes(),
            )?;
        }
    }
    out.flush()?;

    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &failures {
            eprintln!("ivie: request failed: {f}");
        }
        Ok(ExitCode::from(EXIT_PROVIDER))
    }
}

fn serve(args: &ServeArgs) -> Result<ExitCode> {
    let config = SessionConfig {
        provider: args.engine.provider_config()?,
        grid: args.engine.grid()?,
        granularity: args.engine.granularity(),
        exec: args.engine.exec(),
        debounce: Duration::from_millis(args.debounce_ms),
        ..SessionConfig::default()
    };
    let provider =
        provider_from_config(&config.provider).map_err(|e| provider_failure(e.into()))?;
    if args.stdio {
        serve_stdio(Session::with_provider(config, provider))?;
        return Ok(ExitCode::SUCCESS);
    }
    let addr = args
        .listen
        .as_deref()
        .ok_or_else(|| usage(anyhow!("--listen needs an address")))?;
    let server = WsServer::bind(addr)
        .with_context(|| format!("cannot listen on {addr}"))
        .map_err(usage)?;
    eprintln!("ivie: listening on ws://{}", server.local_addr()?);
    let provider: Arc<dyn ivie_core::Provider> = provider;
    server.run(move || Session::with_provider(config.clone(), Arc::clone(&provider)))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match &cli.command {
        Command::Explain(args) => explain(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ivie: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else if e.downcast_ref::<ProviderFailure>().is_some() {
                ExitCode::from(EXIT_PROVIDER)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
