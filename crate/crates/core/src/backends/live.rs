use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::model::{LanguageModel, ModelCall, ModelParams, PromptRecord};
use super::BackendError;

pub const MODEL_URL_ENV: &str = "PROOFSEEK_MODEL_URL";
pub const MODEL_KEY_ENV: &str = "PROOFSEEK_MODEL_KEY";
pub const MODEL_NAME_ENV: &str = "PROOFSEEK_MODEL_NAME";

const DEFAULT_MODEL: &str = "deepseek-r1";

/// Client for an OpenAI-compatible `/chat/completions` endpoint. All `n`
/// samples are requested in a single call.
pub struct ChatClient {
    url: String,
    key: Option<String>,
    model: String,
    http: reqwest::blocking::Client,
    calls: Mutex<Vec<ModelCall>>,
}

impl ChatClient {
    pub fn new(url: &str, key: Option<String>, model: &str) -> Result<Self, BackendError> {
        if url.is_empty() {
            return Err(BackendError::Config("model url is empty".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(ChatClient {
            url: url.trim_end_matches('/').to_string(),
            key,
            model: model.to_string(),
            http,
            calls: Mutex::new(Vec::new()),
        })
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(MODEL_URL_ENV)
            .map_err(|_| BackendError::Config(format!("{MODEL_URL_ENV} is not set")))?;
        let key = std::env::var(MODEL_KEY_ENV).ok().filter(|k| !k.is_empty());
        let model = std::env::var(MODEL_NAME_ENV).unwrap_or_else(|_| DEFAULT_MODEL.into());
        Self::new(&url, key, &model)
    }

    pub fn endpoint(&self) -> String {
        if self.url.ends_with("/chat/completions") {
            self.url.clone()
        } else {
            format!("{}/chat/completions", self.url)
        }
    }

    pub fn request_body(&self, params: &ModelParams, prompt: &PromptRecord, n: usize) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": prompt.messages(),
            "n": n,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
        });
        if !params.stop.is_empty() {
            body["stop"] = json!(params.stop);
        }
        body
    }

    pub fn calls(&self) -> Vec<ModelCall> {
        self.calls.lock().unwrap().clone()
    }
}

/// Extracts `choices[].message.content` in choice order.
pub fn parse_response(body: &Value) -> Result<Vec<String>, BackendError> {
    let choices = body
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;
    let mut indexed = Vec::with_capacity(choices.len());
    for (pos, c) in choices.iter().enumerate() {
        let text = c
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Protocol(format!("choice {pos} has no content")))?;
        let index = c.get("index").and_then(Value::as_u64).unwrap_or(pos as u64);
        indexed.push((index, text.to_string()));
    }
    indexed.sort_by_key(|(i, _)| *i);
    Ok(indexed.into_iter().map(|(_, t)| t).collect())
}

impl LanguageModel for ChatClient {
    fn generate(
        &self,
        params: &ModelParams,
        prompt: &PromptRecord,
        n: usize,
    ) -> Result<Vec<String>, BackendError> {
        self.calls.lock().unwrap().push(ModelCall::new(params, prompt, n));
        let mut req = self.http.post(self.endpoint()).json(&self.request_body(params, prompt, n));
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_connect() {
                BackendError::Connection(e.to_string())
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| BackendError::Protocol(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Transport(format!("http {status}: {body}")));
        }
        parse_response(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{Message, PromptPurpose};

    #[test]
    fn body_carries_sampling_params() {
        let c = ChatClient::new("http://localhost:1/v1/", None, "m").unwrap();
        assert_eq!(c.endpoint(), "http://localhost:1/v1/chat/completions");
        let p = PromptRecord::new(PromptPurpose::WholeProof, vec![Message::user("hi")], 0).unwrap();
        let body = c.request_body(&ModelParams::default(), &p, 10);
        assert_eq!(body["n"], 10);
        assert_eq!(body["temperature"], 0.6);
        assert_eq!(body["top_p"], 0.95);
        assert_eq!(body["messages"][0]["role"], "user");
        assert!(body.get("stop").is_none());
    }

    #[test]
    fn parses_choices_in_index_order() {
        let body = json!({"choices": [
            {"index": 1, "message": {"content": "b"}},
            {"index": 0, "message": {"content": "a"}},
        ]});
        assert_eq!(parse_response(&body).unwrap(), ["a", "b"]);
        assert!(parse_response(&json!({})).is_err());
        assert!(parse_response(&json!({"choices": [{}]})).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_connection_error() {
        let c = ChatClient::new("http://127.0.0.1:9", None, "m").unwrap();
        let p = PromptRecord::new(PromptPurpose::Erp, vec![Message::user("x")], 0).unwrap();
        let err = c.complete(&ModelParams::default(), &p, 1).unwrap_err();
        assert!(err.is_infrastructure());
    }
}
