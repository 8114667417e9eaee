//! Benchmark scoring end to end with scripted providers.

use std::path::PathBuf;

use pidrag::chat::{ChatProvider, ProviderError, ProviderSpec, ScriptedProvider, DEFAULT_SYSTEM_TEMPLATE, DEFAULT_TOKEN_BUDGET};
use pidrag::condense::CondensationPolicy;
use pidrag::eval::{
    load_cases, run_benchmark, run_benchmark_with, BenchmarkInputs, CaseStatus, EvalCase, GraphLevel, QuestionId, Score,
};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn inputs(doc: &str) -> BenchmarkInputs {
    let text = std::fs::read_to_string(fixtures().join(doc)).unwrap();
    BenchmarkInputs::from_document(&text, &CondensationPolicy::default(), DEFAULT_SYSTEM_TEMPLATE, DEFAULT_TOKEN_BUDGET)
        .unwrap()
}

fn case(q: QuestionId, level: GraphLevel, script: &str, model: &str) -> EvalCase {
    EvalCase {
        question_id: q,
        question: None,
        graph_level: level,
        provider: ProviderSpec::scripted(fixtures().join("scripts").join(script), model),
    }
}

fn fraction(s: &Score) -> f64 {
    s.fraction().unwrap()
}

#[tokio::test]
async fn reference_cases_score_as_scripted() {
    let inputs = inputs("reference/C01V04-VER.EX01.xml");
    let cases = load_cases(&fixtures().join("scripts/cases.json")).unwrap();
    let report = run_benchmark(&cases, &inputs).await;
    assert_eq!(report.results.len(), cases.len());
    let got: Vec<(QuestionId, GraphLevel, &str, String)> = report
        .results
        .iter()
        .map(|r| (r.case.question_id, r.case.graph_level, r.case.provider.model_id.as_str(), r.score.render()))
        .collect();
    use GraphLevel::*;
    use QuestionId::*;
    assert_eq!(
        got,
        [
            (Q1Pattern, Complete, "good", "1.000".to_string()),
            (Q2Completeness, Complete, "good", "1.000".into()),
            (Q3Inference, Complete, "good", "pending".into()),
            (Q1Pattern, High, "good", "1.000".into()),
            (Q2Completeness, High, "good", "1.000".into()),
            (Q3Inference, High, "good", "pending".into()),
            (Q1Pattern, High, "partial", "0.000".into()),
            (Q2Completeness, High, "partial", "0.545".into()),
        ]
    );
    assert!(report.results.iter().all(|r| r.status == CaseStatus::Ok));
    assert_eq!(report.results[1].extracted.len(), 11);
    let partial = &report.results[7];
    assert_eq!(partial.extracted.len(), 6);
    assert_eq!(fraction(&partial.score), 6.0 / 11.0);
}

#[tokio::test]
async fn half_matching_sequence_scores_one_half() {
    let inputs = inputs("dexpi/four_units.xml");
    assert_eq!(inputs.truth.sequence, ["P101", "H102", "T103", "P104"]);
    let cases = [case(QuestionId::Q1Pattern, GraphLevel::High, "four_units_answers.json", "any")];
    let report = run_benchmark(&cases, &inputs).await;
    assert_eq!(report.results[0].extracted, ["P101", "H102", "P104"]);
    assert_eq!(fraction(&report.results[0].score), 0.5);
}

#[tokio::test]
async fn csv_report_is_deterministic() {
    let inputs = inputs("reference/C01V04-VER.EX01.xml");
    let cases = load_cases(&fixtures().join("scripts/cases.json")).unwrap();
    let a = run_benchmark(&cases, &inputs).await.to_csv();
    let b = run_benchmark(&cases, &inputs).await.to_csv();
    assert_eq!(a, b);
    let mut rows = csv::Reader::from_reader(a.as_bytes());
    assert_eq!(
        rows.headers().unwrap().iter().collect::<Vec<_>>(),
        ["case", "question_id", "graph_level", "provider", "model", "status", "score", "extracted", "notes", "answer"]
    );
    assert_eq!(rows.records().count(), cases.len());
}

#[tokio::test]
async fn later_questions_see_earlier_answers() {
    let inputs = inputs("dexpi/four_units.xml");
    let cases = [
        case(QuestionId::Q1Pattern, GraphLevel::Complete, "four_units_answers.json", "m"),
        case(QuestionId::Q2Completeness, GraphLevel::Complete, "four_units_answers.json", "m"),
    ];
    let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    let log = seen.clone();
    let connector = move |spec: &ProviderSpec| -> Result<Box<dyn ChatProvider>, ProviderError> {
        Ok(Box::new(Recording {
            inner: ScriptedProvider::from_file(spec.clone())?,
            log: log.clone(),
        }))
    };
    run_benchmark_with(&cases, &inputs, &connector).await;
    assert_eq!(*seen.lock().unwrap(), [2, 4]);
}

struct Recording {
    inner: ScriptedProvider,
    log: std::sync::Arc<std::sync::Mutex<Vec<usize>>>,
}

#[async_trait::async_trait]
impl ChatProvider for Recording {
    fn spec(&self) -> &ProviderSpec {
        self.inner.spec()
    }

    async fn stream(&self, messages: &[pidrag::chat::ChatMessage]) -> Result<pidrag::chat::ChunkStream, ProviderError> {
        self.log.lock().unwrap().push(messages.len());
        self.inner.stream(messages).await
    }
}

#[tokio::test]
async fn failures_are_recorded_and_do_not_stop_the_run() {
    let inputs = inputs("dexpi/four_units.xml");
    let mut missing = case(QuestionId::Q1Pattern, GraphLevel::High, "no_such_script.json", "m");
    missing.question = Some("custom question".into());
    let cases = [
        missing,
        case(QuestionId::Q1Pattern, GraphLevel::High, "four_units_answers.json", "m"),
        EvalCase {
            provider: ProviderSpec::named("bogus", "m").unwrap_or_else(|_| ProviderSpec::scripted("", "m")),
            ..case(QuestionId::Q3Inference, GraphLevel::High, "", "m")
        },
    ];
    let report = run_benchmark(&cases, &inputs).await;
    assert_eq!(report.results[0].status, CaseStatus::Failed);
    assert!(report.results[0].notes.contains("no_such_script.json"));
    assert_eq!(report.results[1].status, CaseStatus::Ok);
    assert_eq!(report.results[2].status, CaseStatus::Failed);
    assert!(report.to_table().lines().count() == 5);
}
