//! Streaming HTTP clients: OpenAI-style chat completions (SSE),
//! Anthropic-style messages (SSE) and a local NDJSON endpoint.

use async_trait::async_trait;
use eventsource_stream::Eventsource;
use futures::stream::{self, BoxStream, StreamExt};
use serde_json::{json, Value};

use super::provider::{ChatProvider, ChunkStream, ProviderError, ProviderSpec};
use super::{ChatMessage, Role};

const ANTHROPIC_VERSION: &str = "2023-06-01";
const ANTHROPIC_MAX_TOKENS: u32 = 4096;

/// What one decoded event means for the answer.
enum Piece {
    Text(String),
    Skip,
    Done,
}

fn net(e: reqwest::Error) -> ProviderError {
    ProviderError::Network(e.to_string())
}

fn client() -> reqwest::Client {
    reqwest::Client::new()
}

async fn check(resp: reqwest::Response, spec: &ProviderSpec) -> Result<reqwest::Response, ProviderError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    if status.as_u16() == 401 || status.as_u16() == 403 {
        return Err(ProviderError::Auth {
            env: spec.credential_name(),
            status: status.as_u16(),
        });
    }
    let body = resp.text().await.unwrap_or_default();
    Err(ProviderError::Http {
        status: status.as_u16(),
        body: body.chars().take(500).collect(),
    })
}

fn plain_messages(messages: &[ChatMessage]) -> Vec<Value> {
    messages
        .iter()
        .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
        .collect()
}

/// Decodes an SSE body, mapping each event through `decode` until it yields `Done`.
fn sse_chunks(
    resp: reqwest::Response,
    decode: fn(Option<&str>, &str) -> Result<Piece, ProviderError>,
) -> ChunkStream {
    let events = resp.bytes_stream().eventsource();
    events
        .map(move |ev| match ev {
            Ok(ev) => decode(Some(ev.event.as_str()).filter(|e| !e.is_empty()), &ev.data),
            Err(e) => Err(ProviderError::Network(e.to_string())),
        })
        .take_while(|p| std::future::ready(!matches!(p, Ok(Piece::Done))))
        .filter_map(|p| {
            std::future::ready(match p {
                Ok(Piece::Text(t)) => Some(Ok(t)),
                Ok(_) => None,
                Err(e) => Some(Err(e)),
            })
        })
        .boxed()
}

/// Splits a byte stream into newline-delimited lines.
fn ndjson_lines(resp: reqwest::Response) -> BoxStream<'static, Result<String, ProviderError>> {
    let bytes = resp.bytes_stream().boxed();
    stream::unfold((bytes, Vec::<u8>::new(), false), |(mut bytes, mut buf, mut eof)| async move {
        loop {
            if let Some(pos) = buf.iter().position(|&b| b == b'\n') {
                let line: Vec<u8> = buf.drain(..=pos).collect();
                let text = String::from_utf8_lossy(&line).trim().to_string();
                if text.is_empty() {
                    continue;
                }
                return Some((Ok(text), (bytes, buf, eof)));
            }
            if eof {
                if buf.is_empty() {
                    return None;
                }
                let text = String::from_utf8_lossy(&buf).trim().to_string();
                buf.clear();
                if text.is_empty() {
                    return None;
                }
                return Some((Ok(text), (bytes, buf, eof)));
            }
            match bytes.next().await {
                Some(Ok(b)) => buf.extend_from_slice(&b),
                Some(Err(e)) => return Some((Err(net(e)), (bytes, buf, true))),
                None => eof = true,
            }
        }
    })
    .boxed()
}

fn single(text: String) -> ChunkStream {
    stream::iter([Ok(text)]).boxed()
}

fn parse(data: &str) -> Result<Value, ProviderError> {
    serde_json::from_str(data).map_err(|e| ProviderError::Protocol(format!("{e}: {data}")))
}

#[derive(Debug, Clone)]
pub struct OpenAiClient {
    spec: ProviderSpec,
    key: String,
    http: reqwest::Client,
}

impl OpenAiClient {
    pub fn new(spec: ProviderSpec) -> Result<Self, ProviderError> {
        let key = spec.credential(true)?.unwrap_or_default();
        Ok(OpenAiClient { spec, key, http: client() })
    }

    fn decode(_event: Option<&str>, data: &str) -> Result<Piece, ProviderError> {
        if data.trim() == "[DONE]" {
            return Ok(Piece::Done);
        }
        let v = parse(data)?;
        if let Some(err) = v.get("error") {
            return Err(ProviderError::Remote(error_text(err)));
        }
        match v.pointer("/choices/0/delta/content").and_then(Value::as_str) {
            Some(t) => Ok(Piece::Text(t.to_string())),
            None => Ok(Piece::Skip),
        }
    }
}

fn error_text(err: &Value) -> String {
    err.get("message")
        .and_then(Value::as_str)
        .map(str::to_string)
        .unwrap_or_else(|| err.to_string())
}

#[async_trait]
impl ChatProvider for OpenAiClient {
    fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    async fn stream(&self, messages: &[ChatMessage]) -> Result<ChunkStream, ProviderError> {
        let body = json!({
            "model": self.spec.model_id,
            "messages": plain_messages(messages),
            "stream": self.spec.supports_streaming,
        });
        let resp = self
            .http
            .post(&self.spec.endpoint)
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .await
            .map_err(net)?;
        let resp = check(resp, &self.spec).await?;
        if !self.spec.supports_streaming {
            let v: Value = resp.json().await.map_err(net)?;
            let text = v
                .pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .ok_or_else(|| ProviderError::Protocol("missing choices[0].message.content".into()))?;
            return Ok(single(text.to_string()));
        }
        Ok(sse_chunks(resp, Self::decode))
    }
}

#[derive(Debug, Clone)]
pub struct AnthropicClient {
    spec: ProviderSpec,
    key: String,
    http: reqwest::Client,
}

impl AnthropicClient {
    pub fn new(spec: ProviderSpec) -> Result<Self, ProviderError> {
        let key = spec.credential(true)?.unwrap_or_default();
        Ok(AnthropicClient { spec, key, http: client() })
    }

    fn decode(event: Option<&str>, data: &str) -> Result<Piece, ProviderError> {
        let v = parse(data)?;
        let kind = event
            .or_else(|| v.get("type").and_then(Value::as_str))
            .unwrap_or("");
        match kind {
            "content_block_delta" => Ok(v
                .pointer("/delta/text")
                .and_then(Value::as_str)
                .map(|t| Piece::Text(t.to_string()))
                .unwrap_or(Piece::Skip)),
            "message_stop" => Ok(Piece::Done),
            "error" => Err(ProviderError::Remote(error_text(v.get("error").unwrap_or(&v)))),
            _ => Ok(Piece::Skip),
        }
    }
}

#[async_trait]
impl ChatProvider for AnthropicClient {
    fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    async fn stream(&self, messages: &[ChatMessage]) -> Result<ChunkStream, ProviderError> {
        let system: Vec<&str> = messages
            .iter()
            .filter(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
            .collect();
        let turns: Vec<ChatMessage> = messages.iter().filter(|m| m.role != Role::System).cloned().collect();
        let body = json!({
            "model": self.spec.model_id,
            "max_tokens": ANTHROPIC_MAX_TOKENS,
            "system": system.join("\n\n"),
            "messages": plain_messages(&turns),
            "stream": self.spec.supports_streaming,
        });
        let resp = self
            .http
            .post(&self.spec.endpoint)
            .header("x-api-key", &self.key)
            .header("anthropic-version", ANTHROPIC_VERSION)
            .json(&body)
            .send()
            .await
            .map_err(net)?;
        let resp = check(resp, &self.spec).await?;
        if !self.spec.supports_streaming {
            let v: Value = resp.json().await.map_err(net)?;
            let blocks = v
                .get("content")
                .and_then(Value::as_array)
                .ok_or_else(|| ProviderError::Protocol("missing content array".into()))?;
            let text: String = blocks
                .iter()
                .filter_map(|b| b.get("text").and_then(Value::as_str))
                .collect();
            return Ok(single(text));
        }
        Ok(sse_chunks(resp, Self::decode))
    }
}

/// Local model server speaking newline-delimited JSON
/// (`{"message":{"content":..},"done":false}` per line).
#[derive(Debug, Clone)]
pub struct LocalClient {
    spec: ProviderSpec,
    key: Option<String>,
    http: reqwest::Client,
}

impl LocalClient {
    pub fn new(spec: ProviderSpec) -> Result<Self, ProviderError> {
        let key = spec.credential(false)?;
        Ok(LocalClient { spec, key, http: client() })
    }

    fn decode(line: &str) -> Result<Piece, ProviderError> {
        let v = parse(line)?;
        if let Some(err) = v.get("error") {
            return Err(ProviderError::Remote(
                err.as_str().map(str::to_string).unwrap_or_else(|| error_text(err)),
            ));
        }
        let text = v.pointer("/message/content").and_then(Value::as_str).unwrap_or("");
        if v.get("done").and_then(Value::as_bool) == Some(true) {
            return Ok(if text.is_empty() { Piece::Done } else { Piece::Text(text.to_string()) });
        }
        Ok(Piece::Text(text.to_string()))
    }
}

#[async_trait]
impl ChatProvider for LocalClient {
    fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    async fn stream(&self, messages: &[ChatMessage]) -> Result<ChunkStream, ProviderError> {
        let body = json!({
            "model": self.spec.model_id,
            "messages": plain_messages(messages),
            "stream": self.spec.supports_streaming,
        });
        let mut req = self.http.post(&self.spec.endpoint).json(&body);
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = check(req.send().await.map_err(net)?, &self.spec).await?;
        if !self.spec.supports_streaming {
            let v: Value = resp.json().await.map_err(net)?;
            let text = v
                .pointer("/message/content")
                .and_then(Value::as_str)
                .ok_or_else(|| ProviderError::Protocol("missing message.content".into()))?;
            return Ok(single(text.to_string()));
        }
        let chunks = ndjson_lines(resp)
            .map(|line| line.and_then(|l| Self::decode(&l)))
            .take_while(|p| std::future::ready(!matches!(p, Ok(Piece::Done))))
            .filter_map(|p| {
                std::future::ready(match p {
                    Ok(Piece::Text(t)) if !t.is_empty() => Some(Ok(t)),
                    Ok(_) => None,
                    Err(e) => Some(Err(e)),
                })
            });
        Ok(chunks.boxed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn openai_events() {
        let d = r#"{"choices":[{"delta":{"content":"Hi"}}]}"#;
        assert!(matches!(OpenAiClient::decode(None, d).unwrap(), Piece::Text(t) if t == "Hi"));
        assert!(matches!(OpenAiClient::decode(None, "[DONE]").unwrap(), Piece::Done));
        assert!(matches!(
            OpenAiClient::decode(None, r#"{"choices":[{"delta":{"role":"assistant"}}]}"#).unwrap(),
            Piece::Skip
        ));
        assert!(OpenAiClient::decode(None, "not json").is_err());
    }

    #[test]
    fn anthropic_events() {
        let d = r#"{"type":"content_block_delta","index":0,"delta":{"type":"text_delta","text":"Yo"}}"#;
        assert!(matches!(AnthropicClient::decode(Some("content_block_delta"), d).unwrap(), Piece::Text(t) if t == "Yo"));
        assert!(matches!(
            AnthropicClient::decode(None, r#"{"type":"message_stop"}"#).unwrap(),
            Piece::Done
        ));
        let err = r#"{"type":"error","error":{"type":"overloaded_error","message":"Overloaded"}}"#;
        assert_eq!(
            AnthropicClient::decode(Some("error"), err).err(),
            Some(ProviderError::Remote("Overloaded".into()))
        );
    }

    #[test]
    fn local_lines() {
        assert!(matches!(
            LocalClient::decode(r#"{"message":{"content":"a"},"done":false}"#).unwrap(),
            Piece::Text(t) if t == "a"
        ));
        assert!(matches!(LocalClient::decode(r#"{"done":true}"#).unwrap(), Piece::Done));
        assert!(LocalClient::decode(r#"{"error":"model not found"}"#).is_err());
    }
}
