use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BackendError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_samples: usize,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            temperature: 0.6,
            top_p: 0.95,
            max_samples: 10,
            max_tokens: 2048,
            stop: Vec::new(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(BackendError::Config("temperature must be positive".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::Config("top_p must be in (0, 1]".into()));
        }
        if self.max_samples == 0 {
            return Err(BackendError::Config("max_samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptPurpose {
    WholeProof,
    Erp,
    StageDescription,
    StageInformalProof,
    StageFormalStatement,
    /// Natural-language rendering of a formal statement, for dataset curation.
    NlStatement,
}

impl PromptPurpose {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptPurpose::WholeProof => "whole_proof",
            PromptPurpose::Erp => "erp",
            PromptPurpose::StageDescription => "stage_description",
            PromptPurpose::StageInformalProof => "stage_informal_proof",
            PromptPurpose::StageFormalStatement => "stage_formal_statement",
            PromptPurpose::NlStatement => "nl_statement",
        }
    }

    pub fn parse(s: &str) -> Option<PromptPurpose> {
        [
            PromptPurpose::WholeProof,
            PromptPurpose::Erp,
            PromptPurpose::StageDescription,
            PromptPurpose::StageInformalProof,
            PromptPurpose::StageFormalStatement,
            PromptPurpose::NlStatement,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }
}

impl fmt::Display for PromptPurpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    messages: Vec<Message>,
    pub few_shot_count: usize,
    pub purpose: PromptPurpose,
}

impl PromptRecord {
    pub fn new(
        purpose: PromptPurpose,
        messages: Vec<Message>,
        few_shot_count: usize,
    ) -> Result<Self, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::Config("prompt has no messages".into()));
        }
        Ok(PromptRecord { messages, few_shot_count, purpose })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Content of the final message.
    pub fn last_content(&self) -> &str {
        &self.messages.last().expect("non-empty").content
    }

    /// Stable hex digest of purpose and message contents; the replay fixture key.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.purpose.as_str().as_bytes());
        for m in &self.messages {
            h.update(b"\n");
            h.update(serde_json::to_string(&m.role).unwrap_or_default().as_bytes());
            h.update(b":");
            h.update(m.content.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// One request as seen by a model backend, kept for assertions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCall {
    pub purpose: PromptPurpose,
    pub digest: String,
    pub n: usize,
    pub temperature: f64,
    pub top_p: f64,
}

impl ModelCall {
    pub fn new(params: &ModelParams, prompt: &PromptRecord, n: usize) -> Self {
        ModelCall {
            purpose: prompt.purpose,
            digest: prompt.digest(),
            n,
            temperature: params.temperature,
            top_p: params.top_p,
        }
    }
}

pub trait LanguageModel: Send + Sync {
    /// Produces `n` completions. Callers go through [`LanguageModel::complete`].
    fn generate(
        &self,
        params: &ModelParams,
        prompt: &PromptRecord,
        n: usize,
    ) -> Result<Vec<String>, BackendError>;

    /// Enforces the sample budget, then generates.
    fn complete(
        &self,
        params: &ModelParams,
        prompt: &PromptRecord,
        n: usize,
    ) -> Result<Vec<String>, BackendError> {
        if n > params.max_samples {
            return Err(BackendError::BudgetExceeded { requested: n, max: params.max_samples });
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        self.generate(params, prompt, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_on_purpose_and_content() {
        let a = PromptRecord::new(PromptPurpose::WholeProof, vec![Message::user("x")], 0).unwrap();
        let b = PromptRecord::new(PromptPurpose::Erp, vec![Message::user("x")], 0).unwrap();
        let c = PromptRecord::new(PromptPurpose::WholeProof, vec![Message::user("y")], 0).unwrap();
        assert_eq!(a.digest(), a.clone().digest());
        assert_ne!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn empty_prompt_rejected() {
        assert!(PromptRecord::new(PromptPurpose::Erp, vec![], 0).is_err());
    }

    #[test]
    fn params_defaults_and_validation() {
        let p = ModelParams::default();
        assert_eq!((p.temperature, p.top_p, p.max_samples), (0.6, 0.95, 10));
        assert!(p.validate().is_ok());
        assert!(ModelParams { top_p: 1.5, ..p.clone() }.validate().is_err());
        assert!(ModelParams { temperature: 0.0, ..p.clone() }.validate().is_err());
        assert!(ModelParams { max_samples: 0, ..p }.validate().is_err());
    }

    #[test]
    fn purpose_round_trips() {
        for p in ["whole_proof", "erp", "stage_description", "nl_statement"] {
            assert_eq!(PromptPurpose::parse(p).unwrap().as_str(), p);
        }
        assert!(PromptPurpose::parse("bogus").is_none());
    }
}
