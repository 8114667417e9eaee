use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pidrag::chat::{connect, new_session, DEFAULT_SYSTEM_TEMPLATE, DEFAULT_TOKEN_BUDGET};
use pidrag_cli::repl::run_repl;
use pidrag_cli::*;
use pidrag_service::{serve, ServiceConfig, DEFAULT_MAX_UPLOAD};

#[derive(Parser)]
#[command(name = "pidrag", version, about = "DEXPI P&IDs as knowledge graphs for LLM chat")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a DEXPI document and report what it contains.
    Parse {
        file: PathBuf,
        /// Fail on any diagnostic.
        #[arg(long)]
        strict: bool,
        /// Print the parsed model as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Build the complete graph of a DEXPI document.
    Graph {
        file: PathBuf,
        #[arg(long, default_value = "graphml")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a graph (or DEXPI document) to the high-level graph.
    Condense {
        graph: PathBuf,
        /// Condensation policy JSON; the built-in policy by default.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "graphml")]
        format: String,
        /// Write the condensation report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Convert a graph between JSON and GraphML.
    Export {
        graph: PathBuf,
        #[arg(long)]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count tokens of a file.
    Tokens {
        file: PathBuf,
        #[arg(long, default_value = "heuristic")]
        tokenizer: String,
    },
    /// Chat about a P&ID on the terminal.
    Chat {
        /// DEXPI document or graph file.
        graph: PathBuf,
        #[arg(long, default_value = "high")]
        level: String,
        #[arg(long)]
        provider: String,
        #[arg(long)]
        model: String,
        /// Provider URL; the script path for the scripted provider.
        #[arg(long)]
        endpoint: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// System prompt template containing {GRAPH}.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
        budget: usize,
    },
    /// Run benchmark cases and write a CSV report.
    Eval {
        file: PathBuf,
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
        budget: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "pidrag-store")]
        store: PathBuf,
        /// Directory with the built chat UI.
        #[arg(long)]
        ui: Option<PathBuf>,
        /// Enable the scripted provider with scripts from this directory.
        #[arg(long)]
        scripts: Option<PathBuf>,
        /// Require this bearer token on the API; defaults to $PIDRAG_TOKEN.
        #[arg(long, env = "PIDRAG_TOKEN", hide_env_values = true)]
        token: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_UPLOAD)]
        max_upload: usize,
        #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
        budget: usize,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        template: Option<PathBuf>,
    },
}

fn template(path: Option<&PathBuf>) -> Result<String, CliError> {
    match path {
        Some(p) => read(p),
        None => Ok(DEFAULT_SYSTEM_TEMPLATE.to_string()),
    }
}

async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Parse { file, strict, json } => write_out(None, &cmd_parse(&file, strict, json)?),
        Command::Graph { file, format, out } => write_out(out.as_deref(), &cmd_graph(&file, parse_format(&format)?)?),
        Command::Condense {
            graph,
            policy,
            out,
            format,
            report,
        } => {
            let (high, r) = cmd_condense(&graph, &load_policy(policy.as_deref())?)?;
            let text = pidrag::io::export(&high, parse_format(&format)?).map_err(CliError::from)?;
            write_out(out.as_deref(), &text)?;
            if let Some(p) = report {
                write_out(Some(&p), &serde_json::to_string_pretty(&r).unwrap_or_default())?;
            }
            eprintln!("{}", report_summary(&r));
            Ok(())
        }
        Command::Export { graph, format, out } => write_out(out.as_deref(), &cmd_export(&graph, parse_format(&format)?)?),
        Command::Tokens { file, tokenizer } => write_out(None, &cmd_tokens(&file, &tokenizer)?),
        Command::Chat {
            graph,
            level,
            provider,
            model,
            endpoint,
            policy,
            template: tpl,
            budget,
        } => {
            let g = chat_graph(&graph, parse_level(&level)?, &load_policy(policy.as_deref())?)?;
            let spec = provider_spec(&provider, &model, endpoint.as_deref().and_then(|p| p.to_str()))?;
            let client = connect(&spec)?;
            let mut session = new_session(&g, &template(tpl.as_ref())?, budget)?;
            eprintln!(
                "{} nodes, {} edges; /history shows the conversation, /quit leaves",
                g.node_count(),
                g.edge_count()
            );
            let stdin = std::io::stdin().lock();
            let mut stdout = std::io::stdout();
            run_repl(&mut session, client.as_ref(), stdin, &mut stdout)
                .await
                .map_err(|source| CliError::Io {
                    path: "<stdio>".into(),
                    source,
                })?;
            Ok(())
        }
        Command::Eval {
            file,
            cases,
            out,
            policy,
            template: tpl,
            budget,
        } => {
            let report = cmd_eval(&file, &cases, &load_policy(policy.as_deref())?, &template(tpl.as_ref())?, budget).await?;
            write_out(Some(&out), &report.to_csv())?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Serve {
            addr,
            store,
            ui,
            scripts,
            token,
            max_upload,
            budget,
            policy,
            template: tpl,
        } => {
            let mut config = ServiceConfig::new(store);
            config.ui_dir = ui;
            config.scripts_dir = scripts;
            config.auth_token = token.filter(|t| !t.is_empty());
            config.max_upload_bytes = max_upload;
            config.token_budget = budget;
            config.policy = load_policy(policy.as_deref())?;
            config.system_template = template(tpl.as_ref())?;
            Ok(serve(config, addr).await?)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
