//! Scripted model/prover pairs that force each repair path.

use proofseek::backends::{Matcher, MockProver, MockRules, Outcome, ReplayModel};
use proofseek::engine::{prompts, BudgetConfig, Stage};

use super::fixture;

pub const STATEMENT: &str = "theorem t:\n  shows \"A ∧ B\"\n  oops";

pub struct Scenario {
    pub name: &'static str,
    pub statement: String,
    pub model: ReplayModel,
    pub prover: MockProver,
    pub budget: BudgetConfig,
    /// `None` for an expected failure.
    pub expect: Option<Stage>,
}

fn budget(samples: usize, erp: bool) -> BudgetConfig {
    BudgetConfig { sample_budget: samples, erp_enabled: erp, ..Default::default() }
}

fn whole(statement: &str, proofs: &[&str]) -> ReplayModel {
    let mut m = ReplayModel::new();
    m.insert(&prompts::whole_proof(statement), proofs.iter().map(|p| p.to_string()).collect());
    m
}

fn error(m: Matcher) -> (Matcher, Outcome) {
    (m, Outcome::error("failed"))
}

fn rules(pairs: Vec<(Matcher, Outcome)>) -> MockRules {
    pairs.into_iter().fold(MockRules::accept_all(), |r, (m, o)| r.with(m, o))
}

pub fn init_proof() -> Scenario {
    let statement = fixture("ec2_formal_statement.thy");
    Scenario {
        name: "init_proof",
        model: whole(&statement, &[&fixture("ec2_initial_proof.txt")]),
        statement,
        prover: MockProver::new(MockRules::accept_all()),
        budget: budget(1, true),
        expect: Some(Stage::InitProof),
    }
}

/// `have A` fails with its own tactic and with `auto`; `simp` is second in the cascade.
pub fn atp() -> Scenario {
    let proof = "proof -\n  have A by (metis bad)\n  show ?thesis by simp\nqed";
    Scenario {
        name: "atp",
        statement: STATEMENT.into(),
        model: whole(STATEMENT, &[proof]),
        prover: MockProver::new(rules(vec![
            error(Matcher::Exact("have A by (metis bad)".into())),
            error(Matcher::Exact("have A by auto".into())),
        ])),
        budget: budget(1, true),
        expect: Some(Stage::Atp),
    }
}

pub const ERP_PROOF: &str = "proof -\n  have A by simp\n  have B by (metis bad)\n  show ?thesis by simp\nqed";
pub const ERP_PREFIX: &str = "proof -\n  have A by simp";

/// Nothing proves `have B` and no `show ?thesis by ...` closes the goal, but
/// the model's continuation takes a different route.
fn erp_rules() -> MockRules {
    rules(vec![
        error(Matcher::Prefix("have B".into())),
        error(Matcher::Prefix("show ?thesis by".into())),
        error(Matcher::Exact("have C by (metis wrong)".into())),
    ])
}

fn erp_model(continuation: &str) -> ReplayModel {
    let mut m = whole(STATEMENT, &[ERP_PROOF]);
    m.insert(&prompts::erp(STATEMENT, ERP_PREFIX), vec![format!("```isabelle\n{continuation}\n```")]);
    m
}

pub fn erp(enabled: bool) -> Scenario {
    Scenario {
        name: if enabled { "erp" } else { "erp (disabled)" },
        statement: STATEMENT.into(),
        model: erp_model("  have C by simp\n  show ?thesis using C by simp\nqed"),
        prover: MockProver::new(erp_rules()),
        budget: budget(1, enabled),
        expect: enabled.then_some(Stage::Erp),
    }
}

/// The continuation's first tactic fails; the cascade fixes it once it is a placeholder.
pub fn heuristic() -> Scenario {
    Scenario {
        name: "heuristic",
        statement: STATEMENT.into(),
        model: erp_model("  have C by (metis wrong)\n  show ?thesis using C by simp\nqed"),
        prover: MockProver::new(erp_rules()),
        budget: budget(1, true),
        expect: Some(Stage::Heuristic),
    }
}

pub const NESTED_PROOF: &str = "proof -\n  have A\n  proof -\n    have A1 by simp\n    have A2 by (metis bad)\n    show ?thesis by simp\n  qed\n  show ?thesis by simp\nqed";

/// `have A2` is unprovable and so is the inner goal once truncated.
pub fn backtrack_failure() -> Scenario {
    Scenario {
        name: "backtrack then failure",
        statement: STATEMENT.into(),
        model: whole(STATEMENT, &[NESTED_PROOF]),
        prover: MockProver::new(rules(vec![
            error(Matcher::Prefix("have A2".into())),
            error(Matcher::Prefix("show ?thesis".into())),
        ])),
        budget: budget(1, false),
        expect: None,
    }
}

/// `have A2` is unprovable but the truncated inner block closes with `auto`.
pub fn backtrack_success() -> Scenario {
    Scenario {
        name: "backtrack then atp",
        statement: STATEMENT.into(),
        model: whole(STATEMENT, &[NESTED_PROOF]),
        prover: MockProver::new(rules(vec![error(Matcher::Prefix("have A2".into()))])),
        budget: budget(1, false),
        expect: Some(Stage::Atp),
    }
}

pub fn all() -> Vec<Scenario> {
    vec![init_proof(), atp(), erp(true), heuristic(), backtrack_failure()]
}
