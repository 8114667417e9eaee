//! File-driven provider that replays canned answers.

use std::time::Duration;

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::provider::{ChatProvider, ChunkStream, ProviderError, ProviderSpec};
use super::{ChatMessage, Role};

pub const DEFAULT_FAULT: &str = "injected provider fault";

/// One canned answer. The first rule whose `when` occurs in the question
/// (case-insensitive) and whose `model` matches is replayed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    #[serde(default)]
    pub when: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub chunks: Vec<String>,
    /// Shorthand for a single chunk.
    #[serde(default)]
    pub text: Option<String>,
    /// Emit this many chunks, then fail.
    #[serde(default)]
    pub fail_after: Option<usize>,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub delay_ms: u64,
}

impl ScriptRule {
    fn matches(&self, question: &str, model: &str) -> bool {
        let when = self
            .when
            .as_ref()
            .is_none_or(|w| question.to_lowercase().contains(&w.to_lowercase()));
        let model_ok = self.model.as_ref().is_none_or(|m| m == model);
        when && model_ok
    }

    fn chunks(&self) -> Vec<String> {
        let mut chunks = self.chunks.clone();
        if let Some(t) = &self.text {
            chunks.push(t.clone());
        }
        chunks
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Script {
    rules: Vec<ScriptRule>,
}

#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    spec: ProviderSpec,
    rules: Vec<ScriptRule>,
}

impl ScriptedProvider {
    pub fn new(spec: ProviderSpec, rules: Vec<ScriptRule>) -> Self {
        ScriptedProvider { spec, rules }
    }

    /// Replays `chunks` for every question.
    pub fn fixed<S: Into<String>>(chunks: impl IntoIterator<Item = S>) -> Self {
        let rule = ScriptRule {
            chunks: chunks.into_iter().map(Into::into).collect(),
            ..ScriptRule::default()
        };
        Self::new(ProviderSpec::scripted("", "scripted"), vec![rule])
    }

    pub fn from_json(spec: ProviderSpec, text: &str) -> Result<Self, ProviderError> {
        let script: Script = serde_json::from_str(text).map_err(|e| ProviderError::Script(e.to_string()))?;
        Ok(Self::new(spec, script.rules))
    }

    /// Loads the script at `spec.endpoint`.
    pub fn from_file(spec: ProviderSpec) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(&spec.endpoint)
            .map_err(|e| ProviderError::Script(format!("{}: {e}", spec.endpoint)))?;
        Self::from_json(spec, &text)
    }

    pub fn rules(&self) -> &[ScriptRule] {
        &self.rules
    }
}

#[async_trait]
impl ChatProvider for ScriptedProvider {
    fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    async fn stream(&self, messages: &[ChatMessage]) -> Result<ChunkStream, ProviderError> {
        let question = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let rule = self
            .rules
            .iter()
            .find(|r| r.matches(question, &self.spec.model_id))
            .ok_or_else(|| ProviderError::Script(format!("no rule matches question {question:?}")))?
            .clone();
        let chunks = rule.chunks();
        let delay = Duration::from_millis(rule.delay_ms);
        let mut items: Vec<Result<String, ProviderError>> = match rule.fail_after {
            Some(n) => chunks.into_iter().take(n).map(Ok).collect(),
            None => chunks.into_iter().map(Ok).collect(),
        };
        if rule.fail_after.is_some() {
            let msg = rule.error.clone().unwrap_or_else(|| DEFAULT_FAULT.to_string());
            items.push(Err(ProviderError::Fault(msg)));
        }
        let s = stream::iter(items).then(move |item| async move {
            if !delay.is_zero() {
                tokio::time::sleep(delay).await;
            }
            item
        });
        Ok(s.boxed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use futures::TryStreamExt;

    async fn collect(p: &ScriptedProvider, q: &str) -> Result<Vec<String>, ProviderError> {
        p.stream(&[ChatMessage::user(q)]).await?.try_collect().await
    }

    #[tokio::test]
    async fn first_matching_rule_wins() {
        let json = r#"{"rules": [
            {"when": "valves", "chunks": ["V1", " V2"]},
            {"when": "inlet", "model": "other", "text": "wrong model"},
            {"text": "fallback"}
        ]}"#;
        let p = ScriptedProvider::from_json(ProviderSpec::scripted("x", "m"), json).unwrap();
        assert_eq!(collect(&p, "List all VALVES").await.unwrap(), ["V1", " V2"]);
        assert_eq!(collect(&p, "inlet?").await.unwrap(), ["fallback"]);
    }

    #[tokio::test]
    async fn fault_after_chunks() {
        let json = r#"{"rules": [{"chunks": ["a", "b", "c"], "fail_after": 1, "error": "boom"}]}"#;
        let p = ScriptedProvider::from_json(ProviderSpec::scripted("x", "m"), json).unwrap();
        let items: Vec<_> = p.stream(&[ChatMessage::user("q")]).await.unwrap().collect().await;
        assert_eq!(items.len(), 2);
        assert_eq!(items[0], Ok("a".to_string()));
        assert_eq!(items[1], Err(ProviderError::Fault("boom".into())));
    }

    #[tokio::test]
    async fn no_match_is_error() {
        let json = r#"{"rules": [{"when": "zzz", "text": "x"}]}"#;
        let p = ScriptedProvider::from_json(ProviderSpec::scripted("x", "m"), json).unwrap();
        assert!(matches!(collect(&p, "q").await, Err(ProviderError::Script(_))));
        assert!(ScriptedProvider::from_json(ProviderSpec::scripted("x", "m"), r#"{"rules":[{"bogus":1}]}"#).is_err());
    }
}
