use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use proofseek::backends::{
    BackendError, ChatClient, LanguageModel, MockModel, MockProver, MockRules, ModelCall, ModelParams,
    PromptRecord, Prover, ProverConfig, ReplayModel, TcpProver, PROVER_ADDR_ENV,
};
use proofseek::engine::BudgetConfig;
use proofseek::eval::AttemptsOver;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProverMode {
    #[default]
    Mock,
    Tcp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Live,
    #[default]
    Replay,
    Mock,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProverSection {
    pub mode: ProverMode,
    /// Rule table for the mock prover.
    pub rules: Option<PathBuf>,
    #[serde(flatten)]
    pub config: ProverConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub mode: ModelMode,
    /// Fixture JSONL for the replay model.
    pub fixtures: Option<PathBuf>,
    #[serde(flatten)]
    pub params: ModelParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub sample_budget: usize,
    pub erp_enabled: bool,
    pub erp_rounds: usize,
    pub max_backtracks: usize,
    pub workers: usize,
    pub attempts_over: AttemptsOver,
    pub nl_retries: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        let b = BudgetConfig::default();
        RunSection {
            sample_budget: b.sample_budget,
            erp_enabled: b.erp_enabled,
            erp_rounds: b.erp_rounds,
            max_backtracks: b.max_backtracks,
            workers: 4,
            attempts_over: AttemptsOver::All,
            nl_retries: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub prover: ProverSection,
    pub model: ModelSection,
    pub run: RunSection,
}

/// Command-line values that take precedence over the file and environment.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub prover: Option<ProverMode>,
    /// Mock prover rule table (JSON).
    #[arg(long, global = true)]
    pub rules: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelMode>,
    /// Replay fixtures (JSONL).
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sample_budget: Option<usize>,
    /// Disable error-driven repair.
    #[arg(long, global = true)]
    pub no_erp: bool,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl RunConfig {
    /// File, then environment, then flags.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c: RunConfig = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(addr) = env_var(PROVER_ADDR_ENV) {
            c.prover.config.endpoint = addr;
        }
        if let Some(seed) = env_var("PROOFSEEK_SEED") {
            c.seed = seed.parse().context("PROOFSEEK_SEED is not an integer")?;
        }
        if let Some(m) = o.prover {
            c.prover.mode = m;
        }
        if let Some(p) = &o.rules {
            c.prover.rules = Some(p.clone());
        }
        if let Some(m) = o.model {
            c.model.mode = m;
        }
        if let Some(p) = &o.fixtures {
            c.model.fixtures = Some(p.clone());
        }
        if let Some(n) = o.sample_budget {
            c.run.sample_budget = n;
        }
        if o.no_erp {
            c.run.erp_enabled = false;
        }
        if let Some(n) = o.workers {
            c.run.workers = n;
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn budget(&self) -> BudgetConfig {
        BudgetConfig {
            sample_budget: self.run.sample_budget,
            model: self.model.params.clone(),
            prover: self.prover.config.clone(),
            erp_enabled: self.run.erp_enabled,
            erp_rounds: self.run.erp_rounds,
            max_backtracks: self.run.max_backtracks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.budget().validate().context("invalid run configuration")?;
        if self.run.workers == 0 {
            bail!("workers must be at least 1");
        }
        Ok(())
    }

    /// Backend settings a command needs, checked before any backend is built.
    pub fn require(&self, prover: bool, model: bool) -> Result<()> {
        if prover {
            self.require_prover()?;
        }
        if model && self.model.mode == ModelMode::Replay && self.model.fixtures.is_none() {
            bail!("replay model needs a fixtures file (--fixtures)");
        }
        Ok(())
    }

    fn require_prover(&self) -> Result<()> {
        match self.prover.mode {
            ProverMode::Mock if self.prover.rules.is_none() => bail!("mock prover needs a rules file (--rules)"),
            ProverMode::Tcp if self.prover.config.endpoint.trim().is_empty() => bail!("tcp prover needs an endpoint"),
            _ => {}
        }
        Ok(())
    }

    pub fn prover(&self) -> Result<Box<dyn Prover>> {
        Ok(match self.prover.mode {
            ProverMode::Mock => {
                let path = self.prover.rules.as_deref().expect("validated");
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let rules: MockRules =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                Box::new(MockProver::new(rules))
            }
            ProverMode::Tcp => Box::new(TcpProver::new(self.prover.config.clone())?),
        })
    }

    pub fn model(&self) -> Result<Box<dyn LanguageModel>> {
        Ok(match self.model.mode {
            ModelMode::Live => Box::new(ChatClient::from_env()?),
            ModelMode::Replay => Box::new(ReplayModel::load(self.model.fixtures.as_deref().expect("validated"))?),
            ModelMode::Mock => Box::new(MockModel::default()),
        })
    }
}

/// Appends every model call to a JSONL log before delegating.
pub struct LoggedModel {
    inner: Box<dyn LanguageModel>,
    log: Mutex<BufWriter<File>>,
}

impl LoggedModel {
    pub fn new(inner: Box<dyn LanguageModel>, path: &Path) -> Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(LoggedModel { inner, log: Mutex::new(BufWriter::new(file)) })
    }
}

impl LanguageModel for LoggedModel {
    fn generate(&self, params: &ModelParams, prompt: &PromptRecord, n: usize) -> Result<Vec<String>, BackendError> {
        {
            let mut log = self.log.lock().unwrap();
            let line = serde_json::to_string(&ModelCall::new(params, prompt, n)).expect("calls serialize");
            writeln!(log, "{line}").and_then(|_| log.flush()).map_err(|e| BackendError::Transport(e.to_string()))?;
        }
        self.inner.generate(params, prompt, n)
    }
}
