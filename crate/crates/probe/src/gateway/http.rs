//! OpenAI-compatible `/chat/completions` and `/embeddings` client.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendError, ChatReply, ChatRequest, Usage};

pub struct HttpBackend {
    client: Client,
    base_url: String,
    api_key: String,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: String, timeout: Duration) -> Result<Self, reqwest::Error> {
        let client = Client::builder().timeout(timeout).build()?;
        Ok(Self {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
        })
    }

    fn post<T: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<T, BackendError> {
        let response = self
            .client
            .post(format!("{}{path}", self.base_url))
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(BackendError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            let message = response.text().unwrap_or_default();
            return Err(BackendError::Rejected {
                status: Some(status.as_u16()),
                message,
            });
        }
        response
            .json::<T>()
            .map_err(|e| BackendError::Transient(format!("undecodable body: {e}")))
    }
}

#[derive(Deserialize)]
struct ChatBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct EmbeddingBody {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f64>,
}

impl Backend for HttpBackend {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, BackendError> {
        let mut messages = Vec::new();
        if let Some(system) = &request.messages.system {
            messages.push(json!({ "role": "system", "content": system }));
        }
        messages.push(json!({ "role": "user", "content": request.messages.user }));
        let body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.profile.temperature,
            "top_p": request.profile.top_p,
        });
        let reply: ChatBody = self.post("/chat/completions", &body)?;
        let text = reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or(BackendError::Empty)?;
        let usage = reply
            .usage
            .map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(ChatReply { text, usage })
    }

    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let body = json!({ "model": model, "input": texts });
        let mut reply: EmbeddingBody = self.post("/embeddings", &body)?;
        reply.data.sort_by_key(|d| d.index);
        Ok(reply.data.into_iter().map(|d| d.embedding).collect())
    }
}
