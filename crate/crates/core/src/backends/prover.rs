use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::isar::ProofScript;

/// Pseudo-step asking the prover to run Sledgehammer in place of the
/// justification it appears in. On success the response message carries the
/// reconstructed method text, e.g. `by (metis foo)`.
pub const HAMMER: &str = "⟨hammer⟩";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProverConfig {
    pub endpoint: String,
    pub pool_size: usize,
    pub step_timeout_s: f64,
    pub hammer_timeout_s: f64,
    /// Session setup timeout. Not given by the reference setup; 120 s is our choice.
    pub init_timeout_s: f64,
    /// Prepended to statements that do not start their own theory.
    pub theory_header: String,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            endpoint: "127.0.0.1:8000".into(),
            pool_size: 4,
            step_timeout_s: 10.0,
            hammer_timeout_s: 40.0,
            init_timeout_s: 120.0,
            theory_header: "theory Scratch imports Main begin".into(),
        }
    }
}

impl ProverConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.pool_size == 0 {
            return Err(BackendError::Config("pool_size must be at least 1".into()));
        }
        for (name, v) in [
            ("step_timeout_s", self.step_timeout_s),
            ("hammer_timeout_s", self.hammer_timeout_s),
            ("init_timeout_s", self.init_timeout_s),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(BackendError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn step_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.step_timeout_s)
    }

    pub fn hammer_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.hammer_timeout_s)
    }

    /// Theory text for a session: header plus the statement, minus any trailing
    /// `oops`/`sorry` that marks it as unproved.
    pub fn theory_for(&self, statement: &str) -> String {
        let mut body = statement.trim_end();
        for tail in ["oops", "sorry"] {
            if let Some(rest) = body.strip_suffix(tail) {
                if rest.is_empty() || rest.ends_with(char::is_whitespace) {
                    body = rest.trim_end();
                    break;
                }
            }
        }
        if body.trim_start().starts_with("theory ") || self.theory_header.is_empty() {
            body.to_string()
        } else {
            format!("{}\n\n{}", self.theory_header, body)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    Error,
    Timeout,
}

/// Observable result of applying one step to a proof state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub status: StepStatus,
    pub new_state_id: Option<String>,
    pub message: String,
    /// No goals remain.
    pub is_done: bool,
}

impl StepResult {
    pub fn ok(state: impl Into<String>, is_done: bool) -> Self {
        StepResult {
            status: StepStatus::Ok,
            new_state_id: Some(state.into()),
            message: String::new(),
            is_done,
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        StepResult {
            status: StepStatus::Error,
            new_state_id: None,
            message: message.into(),
            is_done: false,
        }
    }

    pub fn timeout() -> Self {
        StepResult {
            status: StepStatus::Timeout,
            new_state_id: None,
            message: "timeout".into(),
            is_done: false,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == StepStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Session {
    pub id: String,
    pub initial_state: String,
}

/// Interactive prover with branching proof states. A session may be used by
/// one worker at a time; implementations must be safe to share across workers.
pub trait Prover: Send + Sync {
    fn init_session(&self, theory: &str) -> Result<Session, BackendError>;

    /// Applies `step` to `state`, leaving `state` itself reusable.
    fn apply(
        &self,
        session: &Session,
        state: &str,
        step: &str,
        timeout: Duration,
    ) -> Result<StepResult, BackendError>;

    fn close(&self, session: &Session) -> Result<(), BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub success: bool,
    /// First step that did not return `ok`, or the step count when every step
    /// passed but goals remain.
    pub failing_index: Option<usize>,
    pub results: Vec<StepResult>,
}

/// Applies every step of `script` from a fresh session, stopping at the first
/// non-ok result.
pub fn check_script(
    prover: &dyn Prover,
    config: &ProverConfig,
    statement: &str,
    script: &ProofScript,
) -> Result<CheckOutcome, BackendError> {
    let session = prover.init_session(&config.theory_for(statement))?;
    let outcome = run_steps(prover, config, &session, script);
    let _ = prover.close(&session);
    outcome
}

fn run_steps(
    prover: &dyn Prover,
    config: &ProverConfig,
    session: &Session,
    script: &ProofScript,
) -> Result<CheckOutcome, BackendError> {
    let mut state = session.initial_state.clone();
    let mut results = Vec::new();
    for (i, step) in script.steps().iter().enumerate() {
        let r = prover.apply(session, &state, &step.text(), config.step_timeout())?;
        let ok = r.is_ok();
        if let Some(next) = &r.new_state_id {
            state = next.clone();
        }
        results.push(r);
        if !ok {
            return Ok(CheckOutcome { success: false, failing_index: Some(i), results });
        }
    }
    let done = results.last().is_some_and(|r| r.is_done);
    Ok(CheckOutcome {
        success: done,
        failing_index: if done { None } else { Some(results.len()) },
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ProverConfig::default();
        assert_eq!(c.pool_size, 4);
        assert_eq!(c.step_timeout(), Duration::from_secs(10));
        assert_eq!(c.hammer_timeout(), Duration::from_secs(40));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn invalid_configs() {
        let c = ProverConfig { pool_size: 0, ..Default::default() };
        assert!(matches!(c.validate(), Err(BackendError::Config(_))));
        let c = ProverConfig { step_timeout_s: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn theory_strips_trailing_oops() {
        let c = ProverConfig::default();
        let t = c.theory_for("theorem t: shows \"True\"\n  oops");
        assert!(t.starts_with("theory Scratch"));
        assert!(t.ends_with("shows \"True\""));
        assert_eq!(c.theory_for("theory X imports Main begin lemma y: \"z\""), "theory X imports Main begin lemma y: \"z\"");
        assert!(c.theory_for("lemma loops: \"x\"").ends_with("\"x\""));
    }
}
