//! Rule-table prover and canned-response model for offline runs.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::model::{LanguageModel, ModelCall, ModelParams, PromptPurpose, PromptRecord};
use super::prover::{Prover, Session, StepResult, HAMMER};
use super::BackendError;
use crate::isar::parse_script;

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "match", content = "pattern", rename_all = "snake_case")]
pub enum Matcher {
    /// Whole step, whitespace-normalized.
    Exact(String),
    Contains(String),
    Prefix(String),
    Any,
}

impl Matcher {
    fn matches(&self, step: &str) -> bool {
        match self {
            Matcher::Exact(p) => normalize(p) == step,
            Matcher::Contains(p) => step.contains(&normalize(p)),
            Matcher::Prefix(p) => step.starts_with(&normalize(p)),
            Matcher::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Ok {
        /// Overrides the structural goal tracking.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        done: Option<bool>,
    },
    Error {
        #[serde(default)]
        message: String,
    },
    /// Accepted after `seconds`; reported as a timeout when that exceeds the
    /// request's limit. No real sleeping happens.
    Delay { seconds: f64 },
    /// The connection drops.
    Fault,
}

impl Outcome {
    pub fn ok() -> Self {
        Outcome::Ok { done: None }
    }
    pub fn error(message: &str) -> Self {
        Outcome::Error { message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(flatten)]
    pub matcher: Matcher,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammerRule {
    #[serde(flatten)]
    pub matcher: Matcher,
    /// Justification returned on success, e.g. `by (metis foo)`.
    pub tactic: String,
    #[serde(default)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockRules {
    pub rules: Vec<Rule>,
    pub default: Outcome,
    pub hammer: Vec<HammerRule>,
    /// Theories containing this text fail to load.
    pub reject_theory: Option<String>,
    pub accept_sorry: bool,
    /// Every request fails with a connection error.
    pub unreachable: bool,
}

impl Default for MockRules {
    fn default() -> Self {
        MockRules {
            rules: Vec::new(),
            default: Outcome::error("mock: no rule accepts this step"),
            hammer: Vec::new(),
            reject_theory: None,
            accept_sorry: false,
            unreachable: false,
        }
    }
}

impl MockRules {
    /// Accept every step.
    pub fn accept_all() -> Self {
        MockRules { default: Outcome::ok(), ..Default::default() }
    }

    pub fn with(mut self, matcher: Matcher, outcome: Outcome) -> Self {
        self.rules.push(Rule { matcher, outcome });
        self
    }

    pub fn accept(self, step: &str) -> Self {
        self.with(Matcher::Exact(step.into()), Outcome::ok())
    }

    pub fn reject(self, step: &str) -> Self {
        self.with(Matcher::Exact(step.into()), Outcome::error("rejected"))
    }

    pub fn with_hammer(mut self, matcher: Matcher, tactic: &str) -> Self {
        self.hammer.push(HammerRule { matcher, tactic: tactic.into(), seconds: 0.0 });
        self
    }
}

/// One request as seen by the mock, for assertions on call order and timeouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProverCall {
    pub command: String,
    pub session_id: Option<String>,
    pub state_id: Option<String>,
    pub step: Option<String>,
    pub timeout_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct GoalState {
    depth: usize,
    done: bool,
}

#[derive(Default)]
struct Inner {
    next_session: usize,
    sessions: HashMap<String, Vec<GoalState>>,
    log: Vec<ProverCall>,
}

/// Table-driven prover. Goal tracking is structural: `proof` opens a level,
/// `qed` closes one, and the proof is done when a closing step or a bare
/// terminal (`by ...`, `done`) is accepted at level 0.
pub struct MockProver {
    rules: MockRules,
    inner: Mutex<Inner>,
}

impl MockProver {
    pub fn new(rules: MockRules) -> Self {
        MockProver { rules, inner: Mutex::new(Inner::default()) }
    }

    pub fn log(&self) -> Vec<ProverCall> {
        self.inner.lock().unwrap().log.clone()
    }

    /// Logged `apply` requests only.
    pub fn applies(&self) -> Vec<ProverCall> {
        self.log().into_iter().filter(|c| c.command == "apply").collect()
    }

    pub fn clear_log(&self) {
        self.inner.lock().unwrap().log.clear();
    }

    fn advance(prev: GoalState, step: &str) -> GoalState {
        let Some(first) = parse_script(step).ok().and_then(|s| s.step(0).cloned()) else {
            return prev;
        };
        let mut depth = prev.depth;
        let closes = match first.keyword() {
            "proof" => {
                depth += 1;
                false
            }
            "qed" | "oops" => {
                depth = depth.saturating_sub(1);
                true
            }
            "done" | "by" | "." | ".." | "sorry" => true,
            "using" | "unfolding" => first.has_justification(),
            _ => false,
        };
        GoalState { depth, done: closes && depth == 0 }
    }
}

impl Prover for MockProver {
    fn init_session(&self, theory: &str) -> Result<Session, BackendError> {
        let mut inner = self.inner.lock().unwrap();
        inner.log.push(ProverCall {
            command: "init".into(),
            session_id: None,
            state_id: None,
            step: Some(theory.into()),
            timeout_s: None,
        });
        if self.rules.unreachable {
            return Err(BackendError::Connection("mock prover configured unreachable".into()));
        }
        if let Some(bad) = &self.rules.reject_theory {
            if theory.contains(bad.as_str()) {
                return Err(BackendError::TheoryLoad(format!("mock: theory contains {bad:?}")));
            }
        }
        inner.next_session += 1;
        let id = format!("s-{}", inner.next_session);
        inner.sessions.insert(id.clone(), vec![GoalState::default()]);
        Ok(Session { initial_state: format!("{id}/0"), id })
    }

    fn apply(
        &self,
        session: &Session,
        state: &str,
        step: &str,
        timeout: Duration,
    ) -> Result<StepResult, BackendError> {
        let mut inner = self.inner.lock().unwrap();
        inner.log.push(ProverCall {
            command: "apply".into(),
            session_id: Some(session.id.clone()),
            state_id: Some(state.into()),
            step: Some(step.into()),
            timeout_s: Some(timeout.as_secs_f64()),
        });
        if self.rules.unreachable {
            return Err(BackendError::Connection("mock prover configured unreachable".into()));
        }
        let states = inner
            .sessions
            .get(&session.id)
            .ok_or_else(|| BackendError::SessionClosed(session.id.clone()))?;
        let from = state
            .rsplit_once('/')
            .filter(|(sid, _)| *sid == session.id)
            .and_then(|(_, n)| n.parse::<usize>().ok())
            .and_then(|n| states.get(n).copied())
            .ok_or_else(|| BackendError::Protocol(format!("unknown state {state}")))?;
        if from.done {
            return Ok(StepResult::error("no goals remain"));
        }
        let text = normalize(step);
        let limit = timeout.as_secs_f64();

        let (effective, message, outcome) = if text.contains(HAMMER) {
            let found = self.rules.hammer.iter().find(|h| h.matcher.matches(&text));
            match found {
                Some(h) if h.seconds > limit => (text.clone(), String::new(), Outcome::Delay { seconds: h.seconds }),
                Some(h) => (text.replace(HAMMER, &h.tactic), h.tactic.clone(), Outcome::ok()),
                None => (text.clone(), String::new(), Outcome::error("sledgehammer: no proof found")),
            }
        } else {
            let is_sorry = parse_script(&text)
                .ok()
                .and_then(|s| s.step(0).map(|st| st.is_placeholder()))
                .unwrap_or(false);
            let outcome = if is_sorry && !self.rules.accept_sorry {
                Outcome::error("sorry is not accepted")
            } else {
                self.rules
                    .rules
                    .iter()
                    .find(|r| r.matcher.matches(&text))
                    .map_or_else(|| self.rules.default.clone(), |r| r.outcome.clone())
            };
            (text.clone(), String::new(), outcome)
        };

        let done_override = match outcome {
            Outcome::Ok { done } => done,
            Outcome::Delay { seconds } if seconds <= limit => None,
            Outcome::Delay { .. } => return Ok(StepResult::timeout()),
            Outcome::Error { message } => return Ok(StepResult::error(message)),
            Outcome::Fault => return Err(BackendError::Transport("mock: connection dropped".into())),
        };
        let mut next = Self::advance(from, &effective);
        if let Some(d) = done_override {
            next.done = d;
        }
        let states = inner.sessions.get_mut(&session.id).expect("checked above");
        states.push(next);
        let id = format!("{}/{}", session.id, states.len() - 1);
        let mut r = StepResult::ok(id, next.done);
        r.message = message;
        Ok(r)
    }

    fn close(&self, session: &Session) -> Result<(), BackendError> {
        let mut inner = self.inner.lock().unwrap();
        inner.log.push(ProverCall {
            command: "close".into(),
            session_id: Some(session.id.clone()),
            state_id: None,
            step: None,
            timeout_s: None,
        });
        inner.sessions.remove(&session.id);
        Ok(())
    }
}

/// Model that answers every prompt of a purpose with the same canned text.
pub struct MockModel {
    responses: HashMap<PromptPurpose, String>,
    calls: Mutex<Vec<ModelCall>>,
}

impl Default for MockModel {
    fn default() -> Self {
        let mut responses = HashMap::new();
        responses.insert(PromptPurpose::WholeProof, "by auto".to_string());
        responses.insert(PromptPurpose::Erp, "by auto".to_string());
        MockModel { responses, calls: Mutex::new(Vec::new()) }
    }
}

impl MockModel {
    pub fn with_response(mut self, purpose: PromptPurpose, text: &str) -> Self {
        self.responses.insert(purpose, text.into());
        self
    }

    pub fn calls(&self) -> Vec<ModelCall> {
        self.calls.lock().unwrap().clone()
    }
}

impl LanguageModel for MockModel {
    fn generate(
        &self,
        params: &ModelParams,
        prompt: &PromptRecord,
        n: usize,
    ) -> Result<Vec<String>, BackendError> {
        self.calls.lock().unwrap().push(ModelCall::new(params, prompt, n));
        let text = self
            .responses
            .get(&prompt.purpose)
            .cloned()
            .unwrap_or_else(|| format!("mock {} for: {}", prompt.purpose, prompt.last_content()));
        Ok(vec![text; n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten() -> Duration {
        Duration::from_secs(10)
    }

    #[test]
    fn session_numbering_and_rejection() {
        let p = MockProver::new(MockRules::accept_all());
        let s = p.init_session("theorem x").unwrap();
        assert_eq!(s.id, "s-1");
        assert_eq!(s.initial_state, "s-1/0");
        let p = MockProver::new(MockRules { reject_theory: Some("bad".into()), ..MockRules::accept_all() });
        assert!(matches!(p.init_session("a bad theory"), Err(BackendError::TheoryLoad(_))));
    }

    #[test]
    fn table_driven_verdicts() {
        let p = MockProver::new(MockRules::default().accept("by simp"));
        let s = p.init_session("t").unwrap();
        let r = p.apply(&s, &s.initial_state, "by simp", ten()).unwrap();
        assert!(r.is_ok() && r.is_done);
        let r = p.apply(&s, &s.initial_state, "by auto", ten()).unwrap();
        assert_eq!(r.status, super::super::StepStatus::Error);
        assert!(r.new_state_id.is_none());
    }

    #[test]
    fn done_override() {
        let rules = MockRules::default().with(Matcher::Exact("by simp".into()), Outcome::Ok { done: Some(false) });
        let p = MockProver::new(rules);
        let s = p.init_session("t").unwrap();
        assert!(!p.apply(&s, &s.initial_state, "by simp", ten()).unwrap().is_done);
    }

    #[test]
    fn delay_beyond_timeout_is_timeout() {
        let rules = MockRules::default().with(Matcher::Prefix("by slow".into()), Outcome::Delay { seconds: 12.0 });
        let p = MockProver::new(rules);
        let s = p.init_session("t").unwrap();
        let r = p.apply(&s, &s.initial_state, "by slow", ten()).unwrap();
        assert_eq!(r.status, super::super::StepStatus::Timeout);
        let r = p.apply(&s, &s.initial_state, "by slow", Duration::from_secs(40)).unwrap();
        assert!(r.is_ok());
    }

    #[test]
    fn structural_goal_tracking() {
        let p = MockProver::new(MockRules::accept_all());
        let s = p.init_session("t").unwrap();
        let mut st = s.initial_state.clone();
        for (step, done) in [("proof -", false), ("have A by simp", false), ("show ?thesis by simp", false), ("qed", true)] {
            let r = p.apply(&s, &st, step, ten()).unwrap();
            assert_eq!(r.is_done, done, "{step}");
            st = r.new_state_id.unwrap();
        }
        let r = p.apply(&s, &st, "by simp", ten()).unwrap();
        assert!(!r.is_ok());
    }

    #[test]
    fn sessions_are_isolated() {
        let p = MockProver::new(MockRules::accept_all());
        let a = p.init_session("t").unwrap();
        let b = p.init_session("t").unwrap();
        assert_ne!(a.id, b.id);
        let ra = p.apply(&a, &a.initial_state, "proof -", ten()).unwrap();
        let rb = p.apply(&b, &b.initial_state, "proof -", ten()).unwrap();
        assert_eq!(ra.new_state_id.unwrap(), "s-1/1");
        assert_eq!(rb.new_state_id.unwrap(), "s-2/1");
        assert!(matches!(p.apply(&a, "s-2/1", "qed", ten()), Err(BackendError::Protocol(_))));
        p.close(&a).unwrap();
        assert!(matches!(p.apply(&a, "s-1/1", "qed", ten()), Err(BackendError::SessionClosed(_))));
    }

    #[test]
    fn hammer_expands_to_configured_tactic() {
        let rules = MockRules::default().with_hammer(Matcher::Contains("have A".into()), "by (metis foo)");
        let p = MockProver::new(rules);
        let s = p.init_session("t").unwrap();
        let r = p.apply(&s, &s.initial_state, &format!("have A {HAMMER}"), Duration::from_secs(40)).unwrap();
        assert!(r.is_ok());
        assert_eq!(r.message, "by (metis foo)");
        let r = p.apply(&s, &s.initial_state, &format!("have B {HAMMER}"), Duration::from_secs(40)).unwrap();
        assert!(!r.is_ok());
    }

    #[test]
    fn sorry_rejected_unless_allowed() {
        let p = MockProver::new(MockRules::accept_all());
        let s = p.init_session("t").unwrap();
        assert!(!p.apply(&s, &s.initial_state, "have A sorry", ten()).unwrap().is_ok());
    }

    #[test]
    fn rules_deserialize_from_json() {
        let json = r#"{"default":{"outcome":"ok"},"rules":[{"match":"exact","pattern":"by simp","outcome":"error","message":"no"}],
                       "hammer":[{"match":"any","tactic":"by blast"}]}"#;
        let rules: MockRules = serde_json::from_str(json).unwrap();
        assert_eq!(rules.rules[0].matcher, Matcher::Exact("by simp".into()));
        assert_eq!(rules.default, Outcome::ok());
        assert_eq!(rules.hammer[0].tactic, "by blast");
    }
}
