//! Document to complete and high-level graphs in one call, and batches of documents.

use crate::build::{build_graph_with, BuildError, BuildOptions};
use crate::condense::{condense, CondensationPolicy, CondensationReport, CondenseError};
use crate::dexpi::{parse_dexpi_with, ParseError, ParseOptions};
use crate::graph::PropertyGraph;
use crate::model::{Diagnostic, PidModel};
use crate::taxonomy::Taxonomy;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Condense(#[from] CondenseError),
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub model: PidModel,
    pub diagnostics: Vec<Diagnostic>,
    pub complete: PropertyGraph,
    pub high: PropertyGraph,
    pub report: CondensationReport,
}

/// Parse, build and condense one document.
pub fn run_pipeline(
    text: &str,
    policy: &CondensationPolicy,
    options: ParseOptions,
) -> Result<PipelineOutput, PipelineError> {
    let parsed = parse_dexpi_with(text, options)?;
    let built = build_graph_with(
        &parsed.model,
        Taxonomy::dexpi(),
        BuildOptions {
            strict: options.strict,
        },
    )?;
    let (high, report) = condense(&built.graph, policy)?;
    let mut diagnostics = parsed.diagnostics;
    diagnostics.extend(built.diagnostics);
    Ok(PipelineOutput {
        model: parsed.model,
        diagnostics,
        complete: built.graph,
        high,
        report,
    })
}

/// One document at a time, in order.
pub fn run_sequential<S: AsRef<str>>(
    docs: &[S],
    policy: &CondensationPolicy,
    options: ParseOptions,
) -> Vec<Result<PipelineOutput, PipelineError>> {
    docs.iter()
        .map(|d| run_pipeline(d.as_ref(), policy, options))
        .collect()
}

/// Documents spread over the rayon pool; results keep input order. Without
/// the `parallel` feature this is [`run_sequential`].
pub fn run_parallel<S: AsRef<str> + Sync>(
    docs: &[S],
    policy: &CondensationPolicy,
    options: ParseOptions,
) -> Vec<Result<PipelineOutput, PipelineError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        docs.par_iter()
            .map(|d| run_pipeline(d.as_ref(), policy, options))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_sequential(docs, policy, options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::export_graphml;
    use crate::synth::{synth_dexpi, SynthParams};

    #[test]
    fn batch_modes_agree() {
        let docs: Vec<String> = (0..6).map(|s| synth_dexpi(&SynthParams::new(s))).collect();
        let policy = CondensationPolicy::default();
        let a = run_sequential(&docs, &policy, ParseOptions::default());
        let b = run_parallel(&docs, &policy, ParseOptions::default());
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            assert_eq!(export_graphml(&x.high).unwrap(), export_graphml(&y.high).unwrap());
            assert_eq!(x.report, y.report);
        }
    }

    #[test]
    fn malformed_document_fails_alone() {
        let docs = ["<broken".to_string(), synth_dexpi(&SynthParams::new(1))];
        let out = run_parallel(&docs, &CondensationPolicy::default(), ParseOptions::default());
        assert!(matches!(out[0], Err(PipelineError::Parse(_))));
        assert!(out[1].is_ok());
    }
}
