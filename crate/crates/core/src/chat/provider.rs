use std::path::PathBuf;

use async_trait::async_trait;
use futures::stream::BoxStream;
use serde::{Deserialize, Serialize};

use super::http::{AnthropicClient, LocalClient, OpenAiClient};
use super::scripted::ScriptedProvider;
use super::ChatMessage;

pub type ChunkStream = BoxStream<'static, Result<String, ProviderError>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("unknown provider {0:?}; expected openai, anthropic, local or scripted")]
    UnknownProvider(String),
    #[error("credential missing: set the {env} environment variable")]
    MissingCredential { env: String },
    #[error("authentication rejected (HTTP {status}); check the credential in {env}")]
    Auth { env: String, status: u16 },
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("provider reported an error: {0}")]
    Remote(String),
    #[error("script error: {0}")]
    Script(String),
    #[error("{0}")]
    Fault(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    OpenAi,
    Anthropic,
    Local,
    Scripted,
}

impl ProviderKind {
    pub fn parse(name: &str) -> Result<Self, ProviderError> {
        match name.to_ascii_lowercase().as_str() {
            "openai" => Ok(ProviderKind::OpenAi),
            "anthropic" => Ok(ProviderKind::Anthropic),
            "local" | "ollama" => Ok(ProviderKind::Local),
            "scripted" => Ok(ProviderKind::Scripted),
            _ => Err(ProviderError::UnknownProvider(name.to_string())),
        }
    }

    fn default_endpoint(self) -> &'static str {
        match self {
            ProviderKind::OpenAi => "https://api.openai.com/v1/chat/completions",
            ProviderKind::Anthropic => "https://api.anthropic.com/v1/messages",
            ProviderKind::Local => "http://localhost:11434/api/chat",
            ProviderKind::Scripted => "",
        }
    }
}

/// How to reach a model. Holds the name of the credential variable, never
/// the credential itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub provider_name: String,
    pub model_id: String,
    /// URL for HTTP providers, script path for the scripted provider.
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env: Option<String>,
    #[serde(default = "yes")]
    pub supports_streaming: bool,
}

fn yes() -> bool {
    true
}

impl ProviderSpec {
    /// Spec with the default endpoint and `<PROVIDER>_API_KEY` credential.
    pub fn named(provider: &str, model: &str) -> Result<Self, ProviderError> {
        let kind = ProviderKind::parse(provider)?;
        let credential_env = match kind {
            ProviderKind::OpenAi | ProviderKind::Anthropic | ProviderKind::Local => {
                Some(format!("{}_API_KEY", provider.to_ascii_uppercase()))
            }
            ProviderKind::Scripted => None,
        };
        Ok(ProviderSpec {
            provider_name: provider.to_ascii_lowercase(),
            model_id: model.to_string(),
            endpoint: kind.default_endpoint().to_string(),
            credential_env,
            supports_streaming: true,
        })
    }

    /// Scripted provider replaying `path`.
    pub fn scripted(path: impl Into<PathBuf>, model: &str) -> Self {
        ProviderSpec {
            provider_name: "scripted".into(),
            model_id: model.to_string(),
            endpoint: path.into().to_string_lossy().into_owned(),
            credential_env: None,
            supports_streaming: true,
        }
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> Self {
        self.endpoint = endpoint.into();
        self
    }

    pub fn kind(&self) -> Result<ProviderKind, ProviderError> {
        ProviderKind::parse(&self.provider_name)
    }

    /// Reads the credential variable. Local endpoints may run without one.
    pub(crate) fn credential(&self, required: bool) -> Result<Option<String>, ProviderError> {
        let Some(env) = &self.credential_env else {
            return Ok(None);
        };
        match std::env::var(env) {
            Ok(v) if !v.is_empty() => Ok(Some(v)),
            _ if required => Err(ProviderError::MissingCredential { env: env.clone() }),
            _ => Ok(None),
        }
    }

    pub(crate) fn credential_name(&self) -> String {
        self.credential_env.clone().unwrap_or_else(|| "(none)".into())
    }
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    fn spec(&self) -> &ProviderSpec;

    /// Starts a completion. Chunks arrive in generation order.
    async fn stream(&self, messages: &[ChatMessage]) -> Result<ChunkStream, ProviderError>;
}

/// Builds the client named by `spec`, reading credentials from the environment.
pub fn connect(spec: &ProviderSpec) -> Result<Box<dyn ChatProvider>, ProviderError> {
    Ok(match spec.kind()? {
        ProviderKind::OpenAi => Box::new(OpenAiClient::new(spec.clone())?),
        ProviderKind::Anthropic => Box::new(AnthropicClient::new(spec.clone())?),
        ProviderKind::Local => Box::new(LocalClient::new(spec.clone())?),
        ProviderKind::Scripted => Box::new(ScriptedProvider::from_file(spec.clone())?),
    })
}
