//! Graph-context chat sessions with bounded memory and streamed answers.

mod http;
mod provider;
mod scripted;

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use futures::StreamExt;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::PropertyGraph;
use crate::io::graphml::{export_graphml, GraphmlError};
use crate::tokens::heuristic_tokens;

pub use http::{AnthropicClient, LocalClient, OpenAiClient};
pub use provider::{connect, ChatProvider, ChunkStream, ProviderError, ProviderKind, ProviderSpec};
pub use scripted::{ScriptRule, ScriptedProvider, DEFAULT_FAULT};

/// System template with the graph spliced in at `{GRAPH}`.
pub const DEFAULT_SYSTEM_TEMPLATE: &str = include_str!("../../data/system_prompt.txt");
pub const GRAPH_PLACEHOLDER: &str = "{GRAPH}";
/// Prompt budget used when none is configured; fits a 128k-token context.
pub const DEFAULT_TOKEN_BUDGET: usize = 120_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
            timestamp: now_millis(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, thiserror::Error)]
pub enum ChatError {
    #[error("graph context needs {context_tokens} tokens but the budget is {budget}; condense the graph or raise the budget")]
    Budget { context_tokens: usize, budget: usize },
    #[error("system prompt and question need {tokens} tokens, over the budget of {budget}")]
    QuestionOverBudget { tokens: usize, budget: usize },
    #[error("question is empty")]
    EmptyQuestion,
    #[error("system template has no {GRAPH_PLACEHOLDER} placeholder")]
    MissingPlaceholder,
    #[error("provider returned an empty answer")]
    EmptyResponse,
    #[error("a completion is already in flight for session {0}")]
    Busy(String),
    #[error(transparent)]
    Graph(#[from] GraphmlError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: String,
    pub system_prompt: String,
    pub graph_context: String,
    pub history: Vec<ChatMessage>,
    pub token_budget: usize,
}

/// Tokens of an assembled prompt: the heuristic estimate of each message
/// body, summed.
pub fn prompt_tokens(messages: &[ChatMessage]) -> usize {
    messages.iter().map(|m| heuristic_tokens(&m.content)).sum()
}

pub fn new_session(graph: &PropertyGraph, system_template: &str, budget: usize) -> Result<ChatSession, ChatError> {
    if !system_template.contains(GRAPH_PLACEHOLDER) {
        return Err(ChatError::MissingPlaceholder);
    }
    let graph_context = export_graphml(graph)?;
    let context_tokens = heuristic_tokens(&graph_context);
    if context_tokens >= budget {
        return Err(ChatError::Budget { context_tokens, budget });
    }
    Ok(ChatSession {
        id: session_id(),
        system_prompt: system_template.replace(GRAPH_PLACEHOLDER, &graph_context),
        graph_context,
        history: Vec::new(),
        token_budget: budget,
    })
}

fn session_id() -> String {
    let n: u64 = rand::rng().random();
    format!("{n:016x}")
}

/// `[system, ..history.., user(question)]`, dropping the oldest
/// user/assistant pairs until the prompt fits the budget.
pub fn build_prompt(session: &ChatSession, question: &str) -> Result<Vec<ChatMessage>, ChatError> {
    if question.trim().is_empty() {
        return Err(ChatError::EmptyQuestion);
    }
    let fixed = heuristic_tokens(&session.system_prompt) + heuristic_tokens(question);
    if fixed > session.token_budget {
        return Err(ChatError::QuestionOverBudget {
            tokens: fixed,
            budget: session.token_budget,
        });
    }
    let mut start = 0;
    let mut history_tokens = prompt_tokens(&session.history);
    while fixed + history_tokens > session.token_budget {
        let end = (start + 2).min(session.history.len());
        history_tokens -= prompt_tokens(&session.history[start..end]);
        start = end;
    }
    let mut messages = Vec::with_capacity(session.history.len() - start + 2);
    messages.push(ChatMessage::system(session.system_prompt.clone()));
    messages.extend(session.history[start..].iter().cloned());
    messages.push(ChatMessage::user(question));
    Ok(messages)
}

/// Streams an answer, calling `on_chunk` for every chunk in order. The
/// question and answer are appended to the history only if the stream
/// completes; on any error the session is left untouched.
pub async fn ask(
    session: &mut ChatSession,
    question: &str,
    provider: &dyn ChatProvider,
    mut on_chunk: impl FnMut(&str) + Send,
) -> Result<ChatMessage, ChatError> {
    let messages = build_prompt(session, question)?;
    let mut stream = provider.stream(&messages).await?;
    let mut answer = String::new();
    while let Some(chunk) = stream.next().await {
        let chunk = chunk?;
        if chunk.is_empty() {
            continue;
        }
        on_chunk(&chunk);
        answer.push_str(&chunk);
    }
    if answer.is_empty() {
        return Err(ChatError::EmptyResponse);
    }
    let user = messages.last().cloned().unwrap_or_else(|| ChatMessage::user(question));
    let reply = ChatMessage::assistant(answer);
    session.history.push(user);
    session.history.push(reply.clone());
    Ok(reply)
}

/// A session shared between tasks; at most one `ask` runs at a time.
#[derive(Debug, Clone)]
pub struct SharedSession {
    id: String,
    inner: Arc<tokio::sync::Mutex<ChatSession>>,
}

impl SharedSession {
    pub fn new(session: ChatSession) -> Self {
        SharedSession {
            id: session.id.clone(),
            inner: Arc::new(tokio::sync::Mutex::new(session)),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub async fn snapshot(&self) -> ChatSession {
        self.inner.lock().await.clone()
    }

    /// Like [`ask`], but fails with [`ChatError::Busy`] instead of waiting
    /// when another completion holds the session.
    pub async fn try_ask(
        &self,
        question: &str,
        provider: &dyn ChatProvider,
        on_chunk: impl FnMut(&str) + Send,
    ) -> Result<ChatMessage, ChatError> {
        let mut guard = self.try_begin()?;
        ask(&mut guard, question, provider, on_chunk).await
    }

    /// Claims the session for one completion.
    pub fn try_begin(&self) -> Result<tokio::sync::OwnedMutexGuard<ChatSession>, ChatError> {
        self.inner
            .clone()
            .try_lock_owned()
            .map_err(|_| ChatError::Busy(self.id.clone()))
    }
}
