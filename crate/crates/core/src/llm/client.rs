use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{format_understand_line, parse_understand_line, BackendConfig, BackendMode};
use crate::error::{Error, Result};
use crate::task::{Backend, ParsedTask, RespondRequest, SkillFailure, UnderstandRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
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

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub bearer: Option<String>,
    pub body: String,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Connection-level failure (refused, reset, timed out). Always retried.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportError(pub String);

/// Blocking POST of a JSON body.
pub trait Transport: Send + Sync {
    fn post_json(&self, req: &HttpRequest) -> std::result::Result<HttpResponse, TransportError>;
}

/// [`Transport`] over reqwest's blocking client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, req: &HttpRequest) -> std::result::Result<HttpResponse, TransportError> {
        let mut builder = self
            .client
            .post(&req.url)
            .timeout(req.timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(req.body.clone());
        if let Some(token) = &req.bearer {
            builder = builder.bearer_auth(token);
        }
        let resp = builder.send().map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attempt {
    Ok,
    Transport(String),
    Status(u16),
}

/// Chat-completion client. In stub mode it answers from a script and never
/// touches the transport.
pub struct ChatClient {
    config: BackendConfig,
    transport: Option<Arc<dyn Transport>>,
    backoff: Duration,
    script: Mutex<VecDeque<Result<String>>>,
    requests: Mutex<Vec<Value>>,
    attempts: Mutex<Vec<Attempt>>,
}

impl ChatClient {
    pub fn new(config: BackendConfig, transport: Option<Arc<dyn Transport>>) -> Result<Self> {
        config.validate()?;
        if config.mode == BackendMode::Remote && transport.is_none() {
            return Err(Error::Parameter("remote backend needs a transport".into()));
        }
        Ok(Self {
            config,
            transport,
            backoff: Duration::from_millis(250),
            script: Mutex::new(VecDeque::new()),
            requests: Mutex::new(Vec::new()),
            attempts: Mutex::new(Vec::new()),
        })
    }

    /// Remote client over HTTP.
    pub fn http(config: BackendConfig) -> Result<Self> {
        let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new()?);
        Self::new(config, Some(transport))
    }

    /// Stub client answering from `replies` in order.
    pub fn stub<I: IntoIterator<Item = String>>(replies: I) -> Self {
        let client = Self::new(BackendConfig::stub(), None).expect("stub config is valid");
        client.script.lock().unwrap().extend(replies.into_iter().map(Ok));
        client
    }

    /// First retry waits `base`, each further retry doubles it.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Queues a scripted reply (or failure) for stub mode.
    pub fn push_reply(&self, reply: Result<String>) {
        self.script.lock().unwrap().push_back(reply);
    }

    /// Request bodies seen so far, in call order.
    pub fn requests(&self) -> Vec<Value> {
        self.requests.lock().unwrap().clone()
    }

    pub fn attempts(&self) -> Vec<Attempt> {
        self.attempts.lock().unwrap().clone()
    }

    fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.config.model.clone().unwrap_or_default(),
            "messages": messages,
            "temperature": self.config.temperature,
        })
    }

    /// Sends the conversation and returns the first choice's content.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let body = self.request_body(messages);
        self.requests.lock().unwrap().push(body.clone());
        match self.config.mode {
            BackendMode::Rules => Err(Error::Parameter("the rules backend has no completion endpoint".into())),
            BackendMode::Stub => self
                .script
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or_else(|| Err(Error::BackendUnavailable("stub script exhausted".into()))),
            BackendMode::Remote => self.complete_remote(body),
        }
    }

    fn complete_remote(&self, body: Value) -> Result<String> {
        let transport = self.transport.as_ref().expect("checked in new");
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let req = HttpRequest {
            url: format!("{}/v1/chat/completions", endpoint.trim_end_matches('/')),
            bearer: std::env::var(&self.config.api_key_env).ok().filter(|k| !k.is_empty()),
            body: body.to_string(),
            timeout: Duration::from_secs_f64(self.config.timeout_secs),
        };
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff.saturating_mul(1 << (attempt - 1).min(16)));
            }
            match transport.post_json(&req) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    self.attempts.lock().unwrap().push(Attempt::Ok);
                    return extract_content(&resp.body);
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    log::warn!("chat completion attempt {} got HTTP {}", attempt + 1, resp.status);
                    self.attempts.lock().unwrap().push(Attempt::Status(resp.status));
                    last = format!("HTTP {}", resp.status);
                }
                Ok(resp) => {
                    self.attempts.lock().unwrap().push(Attempt::Status(resp.status));
                    return Err(Error::Protocol(format!("HTTP {}: {}", resp.status, resp.body)));
                }
                Err(TransportError(e)) => {
                    log::warn!("chat completion attempt {} failed: {e}", attempt + 1);
                    self.attempts.lock().unwrap().push(Attempt::Transport(e.clone()));
                    last = e;
                }
            }
        }
        Err(Error::BackendUnavailable(format!(
            "{} attempts failed, last: {last}",
            self.config.max_retries + 1
        )))
    }
}

fn extract_content(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| Error::Protocol(format!("invalid JSON: {e}")))?;
    let choices = v
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Protocol("response has no choices array".into()))?;
    choices
        .first()
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Protocol("first choice has no message content".into()))
}

/// Builds the user turn for a respond call; includes the understood task
/// when one is supplied.
fn respond_user_message(req: &RespondRequest<'_>) -> String {
    match req.understood {
        Some(t) => format!(
            "Customer: {}\nUnderstood task: {}",
            req.utterance,
            format_understand_line(t)
        ),
        None => format!("Customer: {}", req.utterance),
    }
}

/// Backend that sends both prompts through a [`ChatClient`].
pub struct RemoteBackend {
    client: ChatClient,
}

impl RemoteBackend {
    pub fn new(client: ChatClient) -> Self {
        Self { client }
    }

    pub fn client(&self) -> &ChatClient {
        &self.client
    }
}

impl Backend for RemoteBackend {
    fn understand(&self, req: &UnderstandRequest<'_>) -> Result<ParsedTask> {
        let text = self.client.complete(&[
            ChatMessage::system(req.prompts.understand_prompt.clone()),
            ChatMessage::user(format!("Customer: {}", req.utterance)),
        ])?;
        Ok(parse_understand_line(&text, req.registry))
    }

    fn respond(&self, req: &RespondRequest<'_>) -> Result<String> {
        let text = self.client.complete(&[
            ChatMessage::system(req.prompt.to_string()),
            ChatMessage::user(respond_user_message(req)),
        ])?;
        let line = text.trim();
        if line.is_empty() {
            return Err(Error::Protocol("empty response text".into()));
        }
        Ok(line.to_string())
    }

    fn bypass(&self, failure: &SkillFailure) -> Option<String> {
        let prompt = "You are a restaurant service robot. A skill failed. Ask a nearby human for help \
                      in one short, polite sentence that says what went wrong and what they can do. \
                      Example: skill detect(orange juice) failed: not found -> \
                      \"I could not find the orange juice. Could you place it in my hand?\"";
        let detail = format!("skill {} failed: {}", failure.invocation, failure.reason);
        self.client
            .complete(&[ChatMessage::system(prompt), ChatMessage::user(detail)])
            .ok()
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
    }
}

/// Backend whose two calls are answered by a stub [`ChatClient`] each.
/// Understand replies are decoded with the understand-line grammar.
pub struct StubBackend {
    pub understand: ChatClient,
    pub respond: ChatClient,
}

impl StubBackend {
    pub fn new(understand_replies: Vec<String>, respond_replies: Vec<String>) -> Self {
        Self {
            understand: ChatClient::stub(understand_replies),
            respond: ChatClient::stub(respond_replies),
        }
    }
}

impl Backend for StubBackend {
    fn understand(&self, req: &UnderstandRequest<'_>) -> Result<ParsedTask> {
        let text = self.understand.complete(&[
            ChatMessage::system(req.prompts.understand_prompt.clone()),
            ChatMessage::user(format!("Customer: {}", req.utterance)),
        ])?;
        Ok(parse_understand_line(&text, req.registry))
    }

    fn respond(&self, req: &RespondRequest<'_>) -> Result<String> {
        self.respond.complete(&[
            ChatMessage::system(req.prompt.to_string()),
            ChatMessage::user(respond_user_message(req)),
        ])
    }
}
