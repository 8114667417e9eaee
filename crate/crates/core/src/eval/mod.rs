//! Ground-truth oracles and answer scoring.

mod bench;
mod score;
mod trace;

pub use bench::{
    load_cases, run_benchmark, run_benchmark_with, score_answer, BenchmarkInputs, BenchmarkReport, CaseStatus, CasesError,
    EvalCase, EvalResult, GraphLevel, QuestionId, Score, Truth, Q1_TEXT, Q2_TEXT, Q3_TEXT,
};
pub use score::{extract_tags, list_nodes_by_label, score_recall, score_sequence, tag_vocabulary, tags_with_label};
pub use trace::{find_inlets, trace_flow, FlowTrace, TraceStep};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("node {0} not found")]
    UnknownNode(String),
    #[error("inlet {inlet} has incoming flow from {from}")]
    InletHasInflow { inlet: String, from: String },
    #[error("ground truth is empty")]
    EmptyTruth,
}
