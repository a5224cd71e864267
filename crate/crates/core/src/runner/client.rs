//! Chat endpoint clients.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    pub max_new_tokens: usize,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: String,
}

pub trait ChatClient: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse>;
}

/// Deterministic client for tests and offline runs.
///
/// Rules are checked in order against the last message; the first rule whose
/// pattern is a substring wins. With `follow_evidence`, an unmatched answer
/// prompt is answered with the letter of the highest evidence score.
#[derive(Debug, Clone, Default)]
pub struct MockChatClient {
    pub rules: Vec<(String, String)>,
    pub default: String,
    pub follow_evidence: bool,
}

impl MockChatClient {
    pub fn new(default: impl Into<String>) -> Self {
        Self {
            default: default.into(),
            ..Self::default()
        }
    }

    pub fn rule(mut self, pattern: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push((pattern.into(), response.into()));
        self
    }

    /// Offline stand-in used by the CLI when no endpoint is configured.
    pub fn evidence_follower() -> Self {
        Self {
            rules: vec![(super::prompt::PLAN_MARKER.into(), "Plan: compare each option with the retrieved precedents.".into())],
            default: "A".into(),
            follow_evidence: true,
        }
    }

    fn from_evidence(text: &str) -> Option<String> {
        let mut best: Option<(char, f64)> = None;
        for line in text.lines() {
            let Some(rest) = line.strip_prefix(super::prompt::EVIDENCE_PREFIX) else {
                continue;
            };
            let (letter, score) = rest.split_once(": ")?;
            let letter = letter.trim().chars().next()?;
            let score: f64 = score.trim().parse().ok()?;
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((letter, score));
            }
        }
        best.map(|(l, _)| format!("Answer: {l}"))
    }
}

impl ChatClient for MockChatClient {
    fn id(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let last = request.messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let text = self
            .rules
            .iter()
            .find(|(p, _)| last.contains(p.as_str()))
            .map(|(_, r)| r.clone())
            .or_else(|| self.follow_evidence.then(|| Self::from_evidence(last)).flatten())
            .unwrap_or_else(|| self.default.clone());
        Ok(ChatResponse {
            text,
            finish_reason: "stop".into(),
        })
    }
}

/// Chat-completions client: `POST {model, messages, max_tokens, temperature}`
/// and reads `choices[0].message.content`.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    pub url: String,
    pub token: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retries: usize,
}

impl HttpChatClient {
    pub const URL_VAR: &'static str = "MATPROC_CHAT_URL";
    pub const TOKEN_VAR: &'static str = "MATPROC_CHAT_TOKEN";
    pub const MODEL_VAR: &'static str = "MATPROC_CHAT_MODEL";

    pub fn from_env() -> Option<Self> {
        let url = std::env::var(Self::URL_VAR).ok().filter(|u| !u.is_empty())?;
        Some(Self {
            url,
            token: std::env::var(Self::TOKEN_VAR).ok(),
            model: std::env::var(Self::MODEL_VAR).unwrap_or_else(|_| "default".into()),
            timeout: Duration::from_secs(120),
            retries: 2,
        })
    }

    fn parse(body: &Value) -> Result<ChatResponse> {
        let choice = body
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| Error::Endpoint("response has no choices".into()))?;
        let text = choice
            .pointer("/message/content")
            .or_else(|| choice.get("text"))
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Endpoint("response has no text".into()))?;
        Ok(ChatResponse {
            text: text.to_string(),
            finish_reason: choice
                .get("finish_reason")
                .and_then(Value::as_str)
                .unwrap_or("unknown")
                .to_string(),
        })
    }
}

impl ChatClient for HttpChatClient {
    fn id(&self) -> String {
        format!("endpoint:{}#{}", self.url, self.model)
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::Endpoint(e.to_string()))?;
        let payload = json!({
            "model": self.model,
            "messages": request.messages,
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
        });
        let attempts = self.retries + 1;
        let mut last_err = Error::ClientTimeout(attempts);
        for _ in 0..attempts {
            let mut req = client.post(&self.url).json(&payload);
            if let Some(t) = &self.token {
                req = req.bearer_auth(t);
            }
            match req.send().and_then(|r| r.error_for_status()).and_then(|r| r.json::<Value>()) {
                Ok(body) => return Self::parse(&body),
                Err(e) if e.is_timeout() => last_err = Error::ClientTimeout(attempts),
                Err(e) => last_err = Error::Endpoint(e.to_string()),
            }
        }
        Err(last_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> ChatRequest {
        ChatRequest {
            messages: vec![Message::user(text)],
            max_new_tokens: 16,
            temperature: 0.0,
        }
    }

    #[test]
    fn mock_rules_and_evidence() {
        let m = MockChatClient::new("no idea").rule("sinter", "Answer: B");
        assert_eq!(m.complete(&req("about sinter")).unwrap().text, "Answer: B");
        assert_eq!(m.complete(&req("other")).unwrap().text, "no idea");
        let f = MockChatClient::evidence_follower();
        let p = format!("x\n{0}A: 0.100\n{0}B: 0.900\n{0}C: 0.300", super::super::prompt::EVIDENCE_PREFIX);
        assert_eq!(f.complete(&req(&p)).unwrap().text, "Answer: B");
    }

    #[test]
    fn parses_chat_completions() {
        let body = json!({"choices": [{"message": {"role": "assistant", "content": "C"}, "finish_reason": "stop"}]});
        let r = HttpChatClient::parse(&body).unwrap();
        assert_eq!(r.text, "C");
        assert_eq!(r.finish_reason, "stop");
        assert!(HttpChatClient::parse(&json!({})).is_err());
    }

    #[test]
    fn unreachable_endpoint_errors() {
        let c = HttpChatClient {
            url: "http://127.0.0.1:9/v1/chat/completions".into(),
            token: None,
            model: "m".into(),
            timeout: Duration::from_millis(200),
            retries: 1,
        };
        assert!(c.complete(&req("x")).is_err());
    }
}
