use std::collections::{HashMap, VecDeque};
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::model::{LanguageModel, ModelCall, ModelParams, PromptPurpose, PromptRecord};
use super::prover::{Prover, Session, StepResult};
use super::wire::{WireRequest, WireResponse};
use super::BackendError;

/// One line of a replay fixture file. `digest` is a prompt digest, or
/// `*:<purpose>` to answer every prompt of that purpose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub digest: String,
    pub completions: Vec<String>,
}

fn fallback_key(purpose: PromptPurpose) -> String {
    format!("*:{purpose}")
}

/// Serves recorded completions. When fewer completions are stored than
/// requested they are cycled.
#[derive(Debug, Default)]
pub struct ReplayModel {
    fixtures: HashMap<String, Vec<String>>,
    calls: Mutex<Vec<ModelCall>>,
}

impl ReplayModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        let mut model = Self::new();
        for e in entries {
            model.fixtures.insert(e.digest, e.completions);
        }
        model
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, BackendError> {
        let mut entries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| BackendError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(&line)
                .map_err(|e| BackendError::Config(format!("fixture line {}: {e}", n + 1)))?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(std::io::BufReader::new(file))
    }

    pub fn insert(&mut self, prompt: &PromptRecord, completions: Vec<String>) {
        self.fixtures.insert(prompt.digest(), completions);
    }

    pub fn insert_fallback(&mut self, purpose: PromptPurpose, completions: Vec<String>) {
        self.fixtures.insert(fallback_key(purpose), completions);
    }

    /// Fixtures sorted by digest, ready to write as JSONL.
    pub fn entries(&self) -> Vec<FixtureEntry> {
        let mut out: Vec<_> = self
            .fixtures
            .iter()
            .map(|(digest, completions)| FixtureEntry {
                digest: digest.clone(),
                completions: completions.clone(),
            })
            .collect();
        out.sort_by(|a, b| a.digest.cmp(&b.digest));
        out
    }

    pub fn calls(&self) -> Vec<ModelCall> {
        self.calls.lock().unwrap().clone()
    }
}

impl LanguageModel for ReplayModel {
    fn generate(
        &self,
        params: &ModelParams,
        prompt: &PromptRecord,
        n: usize,
    ) -> Result<Vec<String>, BackendError> {
        let digest = prompt.digest();
        self.calls.lock().unwrap().push(ModelCall::new(params, prompt, n));
        let stored = self
            .fixtures
            .get(&digest)
            .or_else(|| self.fixtures.get(&fallback_key(prompt.purpose)))
            .filter(|c| !c.is_empty())
            .ok_or_else(|| BackendError::MissingFixture {
                purpose: prompt.purpose.to_string(),
                digest: digest.clone(),
            })?;
        Ok(stored.iter().cycle().take(n).cloned().collect())
    }
}

/// One prover exchange as recorded by [`RecordingProver`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub request: WireRequest,
    pub response: WireResponse,
}

/// Passes calls through to `inner` and records every exchange.
pub struct RecordingProver<P> {
    inner: P,
    trace: Mutex<Vec<TraceEntry>>,
}

impl<P: Prover> RecordingProver<P> {
    pub fn new(inner: P) -> Self {
        RecordingProver { inner, trace: Mutex::new(Vec::new()) }
    }

    pub fn trace(&self) -> Vec<TraceEntry> {
        self.trace.lock().unwrap().clone()
    }

    pub fn into_inner(self) -> P {
        self.inner
    }

    fn record(&self, request: WireRequest, response: WireResponse) {
        self.trace.lock().unwrap().push(TraceEntry { request, response });
    }
}

impl<P: Prover> Prover for RecordingProver<P> {
    fn init_session(&self, theory: &str) -> Result<Session, BackendError> {
        let r = self.inner.init_session(theory);
        let resp = match &r {
            Ok(s) => WireResponse::from_session(s),
            Err(e) => WireResponse::from_error(e),
        };
        self.record(WireRequest::init(theory, 0.0), resp);
        r
    }

    fn apply(
        &self,
        session: &Session,
        state: &str,
        step: &str,
        timeout: Duration,
    ) -> Result<StepResult, BackendError> {
        let r = self.inner.apply(session, state, step, timeout);
        let resp = match &r {
            Ok(s) => WireResponse::from_step(s),
            Err(e) => WireResponse::from_error(e),
        };
        self.record(WireRequest::apply(session, state, step, timeout), resp);
        r
    }

    fn close(&self, session: &Session) -> Result<(), BackendError> {
        let r = self.inner.close(session);
        let resp = match &r {
            Ok(()) => WireResponse::from_step(&StepResult::ok("closed", false)),
            Err(e) => WireResponse::from_error(e),
        };
        self.record(WireRequest::close(session), resp);
        r
    }
}

/// Replays a recorded trace in order. Each call must match the next recorded
/// request by command, session, state and step; anything else is a protocol
/// error, since the run has diverged from the recording.
pub struct TraceProver {
    pending: Mutex<VecDeque<TraceEntry>>,
}

impl TraceProver {
    pub fn new(trace: Vec<TraceEntry>) -> Self {
        TraceProver { pending: Mutex::new(trace.into()) }
    }

    pub fn remaining(&self) -> usize {
        self.pending.lock().unwrap().len()
    }

    fn next(&self, expected: &WireRequest) -> Result<WireResponse, BackendError> {
        let mut pending = self.pending.lock().unwrap();
        let entry = pending
            .pop_front()
            .ok_or_else(|| BackendError::Protocol("trace exhausted".into()))?;
        let r = &entry.request;
        let same = r.command == expected.command
            && r.session_id == expected.session_id
            && r.state_id == expected.state_id
            && r.step == expected.step;
        if !same {
            return Err(BackendError::Protocol(format!(
                "trace diverged: expected {} {:?}, got {} {:?}",
                r.command, r.step, expected.command, expected.step
            )));
        }
        Ok(entry.response)
    }
}

impl Prover for TraceProver {
    fn init_session(&self, theory: &str) -> Result<Session, BackendError> {
        self.next(&WireRequest::init(theory, 0.0))?.into_session()
    }

    fn apply(
        &self,
        session: &Session,
        state: &str,
        step: &str,
        timeout: Duration,
    ) -> Result<StepResult, BackendError> {
        self.next(&WireRequest::apply(session, state, step, timeout))?
            .into_step_result()
    }

    fn close(&self, session: &Session) -> Result<(), BackendError> {
        self.next(&WireRequest::close(session))?.into_step_result().map(|_| ())
    }
}
