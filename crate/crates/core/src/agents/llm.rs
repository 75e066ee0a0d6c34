use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::ingestion::TokenBucket;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlmParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for LlmParams {
    fn default() -> Self {
        Self {
            max_tokens: 1024,
            temperature: 0.2,
            seed: 42,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("provider transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("provider returned an unusable payload: {0}")]
    Payload(String),
}

/// A text-completion backend.
pub trait LlmProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, prompt: &str, params: &LlmParams) -> Result<String, LlmError>;
}

/// Providers selectable by id.
#[derive(Clone, Default)]
pub struct ProviderRegistry {
    providers: BTreeMap<String, Arc<dyn LlmProvider>>,
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The mock provider, plus the chat-completions provider when
    /// `CODHY_LLM_BASE_URL` and `CODHY_LLM_MODEL` are set.
    pub fn from_env() -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(super::MockProvider::new()));
        if let Some(p) = ChatCompletionsProvider::from_env() {
            reg.register(Arc::new(p));
        }
        reg
    }

    pub fn register(&mut self, provider: Arc<dyn LlmProvider>) {
        self.providers.insert(provider.id().to_string(), provider);
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn LlmProvider>> {
        self.providers.get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.providers.keys().cloned().collect()
    }
}

/// Replays queued responses in order and records every prompt it saw.
#[derive(Default)]
pub struct ScriptedProvider {
    id: String,
    queue: Mutex<VecDeque<Result<String, LlmError>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedProvider {
    pub fn new<I>(id: &str, responses: I) -> Self
    where
        I: IntoIterator<Item = Result<String, LlmError>>,
    {
        Self {
            id: id.to_string(),
            queue: Mutex::new(responses.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn from_texts<I, S>(id: &str, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(id, texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log").clone()
    }
}

impl LlmProvider for ScriptedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str, _: &LlmParams) -> Result<String, LlmError> {
        self.prompts.lock().expect("prompt log").push(prompt.to_string());
        self.queue
            .lock()
            .expect("script queue")
            .pop_front()
            .unwrap_or_else(|| Err(LlmError::Payload("script exhausted".into())))
    }
}

/// OpenAI-compatible `/chat/completions` endpoint, rate-limited per process.
pub struct ChatCompletionsProvider {
    base_url: String,
    model: String,
    api_key: Option<String>,
    http: Client,
    bucket: TokenBucket,
}

impl ChatCompletionsProvider {
    pub const ID: &'static str = "chat_completions";

    pub fn new(base_url: &str, model: &str, api_key: Option<String>) -> Result<Self, LlmError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::Transport {
                message: e.to_string(),
                retryable: false,
            })?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            http,
            bucket: TokenBucket::new(1.0, 2.0),
        })
    }

    pub fn from_env() -> Option<Self> {
        let base = std::env::var("CODHY_LLM_BASE_URL").ok().filter(|s| !s.trim().is_empty())?;
        let model = std::env::var("CODHY_LLM_MODEL").ok().filter(|s| !s.trim().is_empty())?;
        let key = std::env::var("CODHY_LLM_API_KEY").ok().filter(|s| !s.trim().is_empty());
        Self::new(&base, &model, key).ok()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LlmProvider for ChatCompletionsProvider {
    fn id(&self) -> &str {
        Self::ID
    }

    fn complete(&self, prompt: &str, params: &LlmParams) -> Result<String, LlmError> {
        self.bucket.acquire();
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "seed": params.seed,
        });
        let mut req = self.http.post(format!("{}/chat/completions", self.base_url)).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::Transport {
                message: format!("HTTP {status}"),
                retryable: status.as_u16() == 429 || status.is_server_error(),
            });
        }
        let parsed: ChatResponse = resp.json().map_err(|e| LlmError::Payload(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::Payload("no choices in response".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_provider_replays_in_order() {
        let p = ScriptedProvider::from_texts("s", ["one", "two"]);
        let params = LlmParams::default();
        assert_eq!(p.complete("a", &params).unwrap(), "one");
        assert_eq!(p.complete("b", &params).unwrap(), "two");
        assert!(p.complete("c", &params).is_err());
        assert_eq!(p.prompts(), ["a", "b", "c"]);
    }

    #[test]
    fn registry_lists_mock_by_default() {
        let reg = ProviderRegistry::from_env();
        assert!(reg.ids().contains(&"mock".to_string()));
        assert!(reg.get("missing").is_none());
    }
}
