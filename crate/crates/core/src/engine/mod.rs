//! Proof construction: sample whole proofs, validate them step by step and
//! repair failures with a tactic cascade, model re-proving, placeholder
//! heuristics and block backtracking.
//!
//! ```text
//! candidate ──▶ validate ──ok──▶ success
//!                  │fail at i
//!                  ▼
//!        ATP cascade + hammer at i ──▶ ERP from prefix ──▶ failed tactics to sorry
//!                                                                 │
//!                       abandon ◀── ATP on placeholder ◀── backtrack to innermost block
//! ```

mod attempt;
mod pool;
pub mod prompts;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, ModelParams, ProverConfig};
use crate::isar::Tactic;

pub use attempt::{heuristic_repair, validate_candidate, Attempt, AtpOutcome, Engine, ErpOutcome};
pub use pool::{run_pool, CancelFlag, Problem};

/// Proof methods as listed for the reference setup, `auto` included twice.
pub const DEFAULT_CASCADE: [&str; 10] = [
    "auto",
    "simp",
    "auto",
    "blast",
    "fastforce",
    "eval",
    "sos",
    "arith",
    "simp add: field_simps",
    "simp add: mod_simps",
];

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("statement is empty")]
    EmptyStatement,
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Methods tried in order at a failing step, then optionally Sledgehammer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TacticCascade {
    tactics: Vec<Tactic>,
    pub hammer: bool,
}

impl TacticCascade {
    /// Drops repeated methods, keeping the first occurrence.
    pub fn new(methods: &[&str], hammer: bool) -> Result<Self, EngineError> {
        let mut tactics: Vec<Tactic> = Vec::new();
        for m in methods {
            let t = Tactic::parse(m).ok_or_else(|| EngineError::Config(format!("bad proof method {m:?}")))?;
            if !tactics.contains(&t) {
                tactics.push(t);
            }
        }
        if tactics.is_empty() && !hammer {
            return Err(EngineError::Config("tactic cascade is empty".into()));
        }
        Ok(TacticCascade { tactics, hammer })
    }

    /// [`DEFAULT_CASCADE`] deduplicated, plus the hammer.
    pub fn standard() -> Self {
        Self::new(&DEFAULT_CASCADE, true).expect("built-in cascade parses")
    }

    pub fn tactics(&self) -> &[Tactic] {
        &self.tactics
    }

    /// Invocations a full pass costs.
    pub fn len(&self) -> usize {
        self.tactics.len() + usize::from(self.hammer)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for TacticCascade {
    fn default() -> Self {
        Self::standard()
    }
}

/// How far repair went. Ordered: a later variant never gives way to an earlier one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    #[default]
    InitProof,
    Atp,
    Erp,
    Heuristic,
    Failed,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::InitProof => "init_proof",
            Stage::Atp => "atp",
            Stage::Erp => "erp",
            Stage::Heuristic => "heuristic",
            Stage::Failed => "failed",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of proving one problem, one JSONL line in benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub success: bool,
    pub i_try: usize,
    pub success_stage: Stage,
    pub has_timeout: bool,
    pub extra_calls: u64,
    pub has_sc: bool,
    pub problem_name: String,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_script: Option<String>,
    /// Set when infrastructure failed; such records count toward no metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl AttemptRecord {
    pub fn failure(problem_name: &str, i_try: usize) -> Self {
        AttemptRecord {
            success: false,
            i_try,
            success_stage: Stage::Failed,
            has_timeout: false,
            extra_calls: 0,
            has_sc: false,
            problem_name: problem_name.to_string(),
            wall_time_s: 0.0,
            final_script: None,
            aborted: None,
        }
    }

    pub fn aborted(problem_name: &str, reason: impl Into<String>) -> Self {
        AttemptRecord { aborted: Some(reason.into()), ..Self::failure(problem_name, 0) }
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetConfig {
    /// Whole-proof candidates per problem.
    pub sample_budget: usize,
    pub model: ModelParams,
    pub prover: ProverConfig,
    pub erp_enabled: bool,
    /// ERP requests per failure position.
    pub erp_rounds: usize,
    /// Block truncations per candidate before it is abandoned.
    pub max_backtracks: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            sample_budget: 10,
            model: ModelParams::default(),
            prover: ProverConfig::default(),
            erp_enabled: true,
            erp_rounds: 1,
            max_backtracks: 4,
        }
    }
}

impl BudgetConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.sample_budget == 0 {
            return Err(EngineError::Config("sample_budget must be at least 1".into()));
        }
        if self.sample_budget > self.model.max_samples {
            return Err(EngineError::Config(format!(
                "sample_budget {} exceeds the model's max_samples {}",
                self.sample_budget, self.model.max_samples
            )));
        }
        self.model.validate()?;
        self.prover.validate()?;
        Ok(())
    }
}
