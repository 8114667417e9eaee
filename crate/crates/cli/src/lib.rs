//! Command implementations behind the `pidrag` binary.

pub mod repl;

use std::io::Write;
use std::path::{Path, PathBuf};

use pidrag::build::BuildError;
use pidrag::chat::{ChatError, ProviderError, ProviderSpec};
use pidrag::condense::{CondensationPolicy, CondensationReport, CondenseError};
use pidrag::eval::{load_cases, run_benchmark, BenchmarkInputs, BenchmarkReport, CasesError, GraphLevel};
use pidrag::io::{export, import, GraphFormat, GraphIoError};
use pidrag::tokens::{estimate_tokens_with, tokenizer_by_name, TokenizerError};
use pidrag::{build_graph, condense, export_graphml, parse_dexpi_with, ParseError, ParseOptions, PropertyGraph};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Condense(#[from] CondenseError),
    #[error(transparent)]
    GraphIo(#[from] GraphIoError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Cases(#[from] CasesError),
    #[error(transparent)]
    Service(#[from] pidrag_service::ServiceError),
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to `path`, or to stdout when there is none.
pub fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            let newline = if text.ends_with('\n') { "" } else { "\n" };
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.write_all(newline.as_bytes())) {
                // A closed pipe (`| head`) is not a failure.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: "<stdout>".into(),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}

pub fn parse_format(name: &str) -> Result<GraphFormat, CliError> {
    GraphFormat::parse(name).ok_or_else(|| CliError::Usage(format!("unknown format {name:?}; expected json or graphml")))
}

pub fn parse_level(name: &str) -> Result<GraphLevel, CliError> {
    GraphLevel::parse(name).ok_or_else(|| CliError::Usage(format!("unknown level {name:?}; expected complete or high")))
}

/// True when the root element is a DEXPI `PlantModel`.
pub fn is_dexpi(text: &str) -> bool {
    let mut rest = text;
    while let Some(i) = rest.find('<') {
        rest = &rest[i..];
        if rest.starts_with("<?") || rest.starts_with("<!") {
            rest = &rest[1..];
            continue;
        }
        let name: String = rest[1..]
            .chars()
            .take_while(|c| !c.is_whitespace() && *c != '>' && *c != '/')
            .collect();
        return name.rsplit(':').next() == Some("PlantModel");
    }
    false
}

/// Complete graph of a DEXPI document, or any graph file as stored.
pub fn load_graph(path: &Path) -> Result<PropertyGraph, CliError> {
    let text = read(path)?;
    if is_dexpi(&text) {
        let parsed = parse_dexpi_with(&text, ParseOptions::default())?;
        return Ok(build_graph(&parsed.model)?);
    }
    Ok(import(&text, GraphFormat::detect(path, &text))?)
}

pub fn load_policy(path: Option<&Path>) -> Result<CondensationPolicy, CliError> {
    match path {
        Some(p) => Ok(CondensationPolicy::from_json(&read(p)?)?),
        None => Ok(CondensationPolicy::default()),
    }
}

pub fn cmd_parse(path: &Path, strict: bool, json: bool) -> Result<String, CliError> {
    let out = parse_dexpi_with(&read(path)?, ParseOptions { strict })?;
    if json {
        let value = serde_json::json!({ "model": out.model, "diagnostics": out.diagnostics });
        return Ok(serde_json::to_string_pretty(&value).unwrap_or_default());
    }
    let m = &out.model;
    let mut lines = vec![
        format!("items: {}", m.items.len()),
        format!("piping connections: {}", m.piping_connections.len()),
        format!("signal connections: {}", m.signal_connections.len()),
        format!("locations: {}", m.locations.len()),
    ];
    for (k, v) in &m.metadata {
        lines.push(format!("{k}: {v}"));
    }
    lines.push(format!("diagnostics: {}", out.diagnostics.len()));
    lines.extend(out.diagnostics.iter().map(|d| format!("  {d}")));
    Ok(lines.join("\n"))
}

pub fn cmd_graph(path: &Path, format: GraphFormat) -> Result<String, CliError> {
    let parsed = parse_dexpi_with(&read(path)?, ParseOptions::default())?;
    Ok(export(&build_graph(&parsed.model)?, format)?)
}

pub fn cmd_condense(path: &Path, policy: &CondensationPolicy) -> Result<(PropertyGraph, CondensationReport), CliError> {
    Ok(condense(&load_graph(path)?, policy)?)
}

pub fn report_summary(r: &CondensationReport) -> String {
    format!(
        "nodes {} -> {} ({:.1}%), edges {} -> {} ({:.1}%), tokens {} -> {} ({:.1}%)",
        r.nodes_before,
        r.nodes_after,
        100.0 * r.node_reduction(),
        r.edges_before,
        r.edges_after,
        100.0 * r.edge_reduction(),
        r.tokens_before,
        r.tokens_after,
        100.0 * r.token_reduction(),
    )
}

pub fn cmd_export(path: &Path, format: GraphFormat) -> Result<String, CliError> {
    Ok(export(&load_graph(path)?, format)?)
}

/// Token counts for a file; for a DEXPI document also for both graph levels
/// as GraphML.
pub fn cmd_tokens(path: &Path, tokenizer: &str) -> Result<String, CliError> {
    let tok = tokenizer_by_name(tokenizer)?;
    let text = read(path)?;
    let count = |s: &str| estimate_tokens_with(s, tok.as_deref());
    let file = count(&text);
    let mut lines = vec![format!("file: {} tokens ({} chars, {tokenizer})", file.token_count, file.char_count)];
    if is_dexpi(&text) {
        let parsed = parse_dexpi_with(&text, ParseOptions::default())?;
        let complete = build_graph(&parsed.model)?;
        let (high, _) = condense(&complete, &CondensationPolicy::default())?;
        for (name, g) in [("complete", &complete), ("high", &high)] {
            let xml = export_graphml(g).map_err(GraphIoError::from)?;
            lines.push(format!("{name} graph: {} tokens", count(&xml).token_count));
        }
    }
    Ok(lines.join("\n"))
}

/// The graph a chat runs on: the complete graph of the input, condensed for
/// the high level.
pub fn chat_graph(path: &Path, level: GraphLevel, policy: &CondensationPolicy) -> Result<PropertyGraph, CliError> {
    let graph = load_graph(path)?;
    Ok(match level {
        GraphLevel::Complete => graph,
        GraphLevel::High => condense(&graph, policy)?.0,
    })
}

/// Provider spec from command-line values. For `scripted` the endpoint is
/// the script path.
pub fn provider_spec(provider: &str, model: &str, endpoint: Option<&str>) -> Result<ProviderSpec, CliError> {
    if provider.eq_ignore_ascii_case("scripted") {
        let script = endpoint.ok_or_else(|| CliError::Usage("the scripted provider needs --endpoint <script.json>".into()))?;
        return Ok(ProviderSpec::scripted(script, model));
    }
    let spec = ProviderSpec::named(provider, model)?;
    Ok(match endpoint {
        Some(e) => spec.with_endpoint(e),
        None => spec,
    })
}

pub async fn cmd_eval(
    document: &Path,
    cases: &Path,
    policy: &CondensationPolicy,
    template: &str,
    budget: usize,
) -> Result<BenchmarkReport, CliError> {
    let inputs = BenchmarkInputs::from_document(&read(document)?, policy, template, budget)?;
    let cases = load_cases(cases)?;
    Ok(run_benchmark(&cases, &inputs).await)
}
