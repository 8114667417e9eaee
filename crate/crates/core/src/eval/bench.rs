//! Question benchmark: asks the three standard questions per provider and
//! graph level and scores the answers against graph-derived truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chat::{ask, connect, new_session, ChatProvider, ProviderError, ProviderKind, ProviderSpec};
use crate::condense::{condense, CondensationPolicy};
use crate::graph::PropertyGraph;
use crate::pipeline::{run_pipeline, PipelineError};

use super::score::{extract_tags, score_recall, score_sequence, tag_vocabulary, tags_with_label};
use super::trace::{find_inlets, trace_flow};
use super::EvalError;

pub const Q1_TEXT: &str = "Describe the process from inlet to outlet.";
pub const Q2_TEXT: &str = "List all valves and their specifications.";
pub const Q3_TEXT: &str = "Analyze the flowsheet and give recommendations regarding process safety.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionId {
    #[serde(rename = "Q1_pattern")]
    Q1Pattern,
    #[serde(rename = "Q2_completeness")]
    Q2Completeness,
    #[serde(rename = "Q3_inference")]
    Q3Inference,
}

impl QuestionId {
    pub fn default_text(self) -> &'static str {
        match self {
            QuestionId::Q1Pattern => Q1_TEXT,
            QuestionId::Q2Completeness => Q2_TEXT,
            QuestionId::Q3Inference => Q3_TEXT,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionId::Q1Pattern => "Q1_pattern",
            QuestionId::Q2Completeness => "Q2_completeness",
            QuestionId::Q3Inference => "Q3_inference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphLevel {
    Complete,
    High,
}

impl GraphLevel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "complete" => Some(GraphLevel::Complete),
            "high" => Some(GraphLevel::High),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraphLevel::Complete => "complete",
            GraphLevel::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub question_id: QuestionId,
    /// Defaults to the standard text for `question_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub graph_level: GraphLevel,
    pub provider: ProviderSpec,
}

impl EvalCase {
    pub fn question_text(&self) -> &str {
        self.question
            .as_deref()
            .unwrap_or_else(|| self.question_id.default_text())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Score {
    Fraction(f64),
    /// Flowsheet-specific recommendations, entered by a reviewer.
    Count(u32),
    /// Awaiting human review.
    Pending,
}

impl Score {
    pub fn render(&self) -> String {
        match self {
            Score::Fraction(f) => format!("{f:.3}"),
            Score::Count(n) => n.to_string(),
            Score::Pending => "pending".into(),
        }
    }

    pub fn fraction(&self) -> Option<f64> {
        match self {
            Score::Fraction(f) => Some(*f),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub case: EvalCase,
    pub answer: String,
    pub status: CaseStatus,
    pub score: Score,
    /// Tags extracted from the answer, in order of first mention.
    pub extracted: Vec<String>,
    pub notes: String,
}

/// Reference answers derived from the graphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    /// Equipment tags in flow order from the inlet.
    pub sequence: Vec<String>,
    /// Tags that count toward the sequence score.
    pub sequence_vocabulary: Vec<String>,
    pub valves: BTreeSet<String>,
    /// Every tag an answer may mention.
    pub vocabulary: Vec<String>,
}

impl Truth {
    /// Sequence from a trace of `graph` starting at its first inlet; valve
    /// set from the `valve` label.
    pub fn derive(graph: &PropertyGraph) -> Result<Self, EvalError> {
        let inlet = find_inlets(graph).first().copied().ok_or(EvalError::EmptyTruth)?;
        let trace = trace_flow(graph, inlet)?;
        Ok(Truth {
            sequence: trace.tags_with_label(graph, "equipment"),
            sequence_vocabulary: tags_with_label(graph, "equipment").into_iter().collect(),
            valves: tags_with_label(graph, "valve"),
            vocabulary: tag_vocabulary(graph),
        })
    }
}

/// Scores one answer. Q3 is left for a reviewer.
pub fn score_answer(question: QuestionId, answer: &str, truth: &Truth) -> Result<(Score, Vec<String>), EvalError> {
    Ok(match question {
        QuestionId::Q1Pattern => {
            let tags = extract_tags(answer, &truth.sequence_vocabulary);
            (Score::Fraction(score_sequence(&tags, &truth.sequence)?), tags)
        }
        QuestionId::Q2Completeness => {
            let tags = extract_tags(answer, &truth.vocabulary);
            (Score::Fraction(score_recall(&tags, &truth.valves)?), tags)
        }
        QuestionId::Q3Inference => (Score::Pending, extract_tags(answer, &truth.vocabulary)),
    })
}

pub struct BenchmarkInputs {
    pub complete: PropertyGraph,
    pub high: PropertyGraph,
    pub truth: Truth,
    pub system_template: String,
    pub token_budget: usize,
}

impl BenchmarkInputs {
    fn graph(&self, level: GraphLevel) -> &PropertyGraph {
        match level {
            GraphLevel::Complete => &self.complete,
            GraphLevel::High => &self.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub results: Vec<EvalResult>,
}

impl BenchmarkInputs {
    /// Parses, builds and condenses `document`; truth comes from the
    /// complete graph.
    pub fn from_document(
        document: &str,
        policy: &CondensationPolicy,
        system_template: &str,
        token_budget: usize,
    ) -> Result<Self, CasesError> {
        let out = run_pipeline(document, policy, Default::default())?;
        Self::from_graph(out.complete, policy, system_template, token_budget)
    }

    pub fn from_graph(
        complete: PropertyGraph,
        policy: &CondensationPolicy,
        system_template: &str,
        token_budget: usize,
    ) -> Result<Self, CasesError> {
        let (high, _) = condense(&complete, policy).map_err(PipelineError::from)?;
        Ok(BenchmarkInputs {
            truth: Truth::derive(&complete)?,
            complete,
            high,
            system_template: system_template.to_string(),
            token_budget,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CasesError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid cases file: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Truth(#[from] EvalError),
}

/// Reads a JSON array of cases. Relative script paths of scripted
/// providers are taken relative to the cases file.
pub fn load_cases(path: &Path) -> Result<Vec<EvalCase>, CasesError> {
    let text = std::fs::read_to_string(path).map_err(|e| CasesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cases: Vec<EvalCase> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for c in &mut cases {
        if c.provider.kind().ok() == Some(ProviderKind::Scripted) && Path::new(&c.provider.endpoint).is_relative() {
            c.provider.endpoint = base.join(&c.provider.endpoint).to_string_lossy().into_owned();
        }
    }
    Ok(cases)
}

type Connector<'a> = dyn Fn(&ProviderSpec) -> Result<Box<dyn ChatProvider>, ProviderError> + Sync + 'a;

/// Runs `cases` with providers built by [`connect`].
pub async fn run_benchmark(cases: &[EvalCase], inputs: &BenchmarkInputs) -> BenchmarkReport {
    run_benchmark_with(cases, inputs, &connect).await
}

/// Cases sharing a provider and graph level are asked in order within one
/// session, so earlier answers are context for later questions. Groups run
/// concurrently. A failed case is recorded and the run continues.
pub async fn run_benchmark_with(cases: &[EvalCase], inputs: &BenchmarkInputs, connector: &Connector<'_>) -> BenchmarkReport {
    let mut groups: BTreeMap<(String, String, String, GraphLevel), Vec<usize>> = BTreeMap::new();
    for (i, c) in cases.iter().enumerate() {
        let key = (
            c.provider.provider_name.clone(),
            c.provider.model_id.clone(),
            c.provider.endpoint.clone(),
            c.graph_level,
        );
        groups.entry(key).or_default().push(i);
    }
    let runs = groups
        .into_values()
        .map(|idx| run_group(cases, idx, inputs, connector));
    let mut slots: Vec<Option<EvalResult>> = vec![None; cases.len()];
    for group in futures::future::join_all(runs).await {
        for (i, r) in group {
            slots[i] = Some(r);
        }
    }
    BenchmarkReport {
        results: slots.into_iter().flatten().collect(),
    }
}

async fn run_group(
    cases: &[EvalCase],
    idx: Vec<usize>,
    inputs: &BenchmarkInputs,
    connector: &Connector<'_>,
) -> Vec<(usize, EvalResult)> {
    let first = &cases[idx[0]];
    let failed = |i: usize, note: String| {
        (
            i,
            EvalResult {
                case: cases[i].clone(),
                answer: String::new(),
                status: CaseStatus::Failed,
                score: Score::Fraction(0.0),
                extracted: Vec::new(),
                notes: note,
            },
        )
    };
    let provider = match connector(&first.provider) {
        Ok(p) => p,
        Err(e) => return idx.into_iter().map(|i| failed(i, e.to_string())).collect(),
    };
    let graph = inputs.graph(first.graph_level);
    let mut session = match new_session(graph, &inputs.system_template, inputs.token_budget) {
        Ok(s) => s,
        Err(e) => return idx.into_iter().map(|i| failed(i, e.to_string())).collect(),
    };
    let mut out = Vec::with_capacity(idx.len());
    for i in idx {
        let case = &cases[i];
        match ask(&mut session, case.question_text(), provider.as_ref(), |_| {}).await {
            Ok(reply) => {
                let (score, extracted, notes) = match score_answer(case.question_id, &reply.content, &inputs.truth) {
                    Ok((s, t)) => (s, t, String::new()),
                    Err(e) => (Score::Pending, Vec::new(), e.to_string()),
                };
                out.push((
                    i,
                    EvalResult {
                        case: case.clone(),
                        answer: reply.content,
                        status: CaseStatus::Ok,
                        score,
                        extracted,
                        notes,
                    },
                ));
            }
            Err(e) => out.push(failed(i, e.to_string())),
        }
    }
    out
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = [
            "case", "question_id", "graph_level", "provider", "model", "status", "score", "extracted", "notes", "answer",
        ];
        // Writing to a Vec cannot fail.
        let _ = w.write_record(header);
        for (i, r) in self.results.iter().enumerate() {
            let _ = w.write_record([
                &(i + 1).to_string(),
                r.case.question_id.as_str(),
                r.case.graph_level.as_str(),
                &r.case.provider.provider_name,
                &r.case.provider.model_id,
                status_str(r.status),
                &r.score.render(),
                &r.extracted.join("; "),
                &r.notes,
                &r.answer,
            ]);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    pub fn to_table(&self) -> String {
        let rows: Vec<[String; 6]> = self
            .results
            .iter()
            .enumerate()
            .map(|(i, r)| {
                [
                    (i + 1).to_string(),
                    r.case.question_id.as_str().to_string(),
                    r.case.graph_level.as_str().to_string(),
                    format!("{}/{}", r.case.provider.provider_name, r.case.provider.model_id),
                    status_str(r.status).to_string(),
                    r.score.render(),
                ]
            })
            .collect();
        let header = ["#", "question", "level", "provider", "status", "score"];
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |cells: Vec<&str>, out: &mut String| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(header.to_vec(), &mut out);
        line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect(), &mut out);
        for row in &rows {
            line(row.iter().map(String::as_str).collect(), &mut out);
        }
        out
    }
}

fn status_str(s: CaseStatus) -> &'static str {
    match s {
        CaseStatus::Ok => "ok",
        CaseStatus::Failed => "failed",
    }
}
