//! Prover and language-model backends.
//!
//! Both sides are traits with a network implementation and deterministic
//! doubles: [`MockProver`] answers from a rule table, [`ReplayModel`] serves
//! completions from fixtures keyed by a prompt digest, and
//! [`TraceProver`] replays a recorded prover session.

mod live;
mod mock;
mod model;
mod prover;
mod replay;
mod wire;

use thiserror::Error;

pub use live::{parse_response, ChatClient, MODEL_KEY_ENV, MODEL_NAME_ENV, MODEL_URL_ENV};
pub use mock::{Matcher, MockModel, MockProver, MockRules, Outcome, ProverCall, Rule};
pub use model::{LanguageModel, Message, ModelCall, ModelParams, PromptPurpose, PromptRecord, Role};
pub use prover::{
    check_script, CheckOutcome, Prover, ProverConfig, Session, StepResult, StepStatus, HAMMER,
};
pub use replay::{FixtureEntry, RecordingProver, ReplayModel, TraceEntry, TraceProver};
pub use wire::{serve, TcpProver, WireRequest, WireResponse, PROVER_ADDR_ENV};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("cannot reach backend: {0}")]
    Connection(String),
    #[error("theory failed to load: {0}")]
    TheoryLoad(String),
    #[error("session {0} is closed")]
    SessionClosed(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("requested {requested} samples but the budget allows {max}")]
    BudgetExceeded { requested: usize, max: usize },
    #[error("no replay fixture for {purpose} prompt {digest}")]
    MissingFixture { purpose: String, digest: String },
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Faults of the infrastructure rather than verdicts about a proof.
    /// `TheoryLoad` is the prover rejecting the statement, so it is not one.
    pub fn is_infrastructure(&self) -> bool {
        !matches!(self, BackendError::TheoryLoad(_))
    }
}
