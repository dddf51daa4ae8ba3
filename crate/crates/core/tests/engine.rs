mod common;

use std::sync::atomic::AtomicBool;

use serde_json::Value;

use proofseek::backends::{
    LanguageModel, Matcher, MockModel, MockProver, MockRules, Outcome, PromptPurpose, Prover, ProverConfig,
    ReplayModel, HAMMER,
};
use proofseek::engine::{
    heuristic_repair, prompts, run_pool, validate_candidate, AtpOutcome, Attempt, AttemptRecord, BudgetConfig,
    Engine, EngineError, Problem, Stage, TacticCascade,
};
use proofseek::isar::parse_script;

use common::scenarios::{self, Scenario, STATEMENT};
use common::fixture;

fn run(s: &Scenario) -> AttemptRecord {
    let engine = Engine::new(&s.model, &s.prover, s.budget.clone()).unwrap();
    engine.prove(s.name, &s.statement).unwrap()
}

fn budget(samples: usize) -> BudgetConfig {
    BudgetConfig { sample_budget: samples, ..Default::default() }
}

#[test]
fn ec2_proof_matches_the_recorded_state() {
    let r = run(&scenarios::init_proof());
    let expected: Value = serde_json::from_str(&fixture("ec2_state.json")).unwrap();
    let got = serde_json::to_value(&r).unwrap();
    for (k, v) in expected.as_object().unwrap() {
        assert_eq!(&got[k], v, "field {k}");
    }
    assert!(r.final_script.unwrap().starts_with("proof -\n  have \"policy_allows"));
}

#[test]
fn record_json_uses_the_published_field_order() {
    let r = run(&scenarios::init_proof());
    let line = serde_json::to_string(&r).unwrap();
    let keys = ["success", "i_try", "success_stage", "has_timeout", "extra_calls", "has_sc", "problem_name", "wall_time_s", "final_script"];
    let positions: Vec<usize> = keys.iter().map(|k| line.find(&format!("\"{k}\"")).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
    assert!(!line.contains("aborted"));
}

#[test]
fn every_scenario_reaches_its_designed_stage() {
    for s in scenarios::all().iter().chain([scenarios::backtrack_success()].iter()) {
        let r = run(s);
        match s.expect {
            Some(stage) => {
                assert!(r.success, "{}: {r:?}", s.name);
                assert_eq!(r.success_stage, stage, "{}", s.name);
            }
            None => {
                assert!(!r.success, "{}", s.name);
                assert_eq!(r.success_stage, Stage::Failed);
                assert!(r.final_script.is_none());
            }
        }
    }
}

#[test]
fn atp_uses_the_second_tactic() {
    let r = run(&scenarios::atp());
    assert_eq!(r.extra_calls, 2);
    assert!(!r.has_sc);
    assert!(r.final_script.unwrap().contains("have A by simp"));
}

#[test]
fn erp_merges_the_continuation() {
    let s = scenarios::erp(true);
    let r = run(&s);
    assert_eq!(r.final_script.as_deref(), Some("proof -\n  have A by simp\n  have C by simp\n  show ?thesis using C by simp\nqed"));
    let erp_calls = s.model.calls().iter().filter(|c| c.purpose == PromptPurpose::Erp).count();
    assert_eq!(erp_calls, 1);
}

#[test]
fn heuristic_fills_the_continuation_placeholders() {
    let r = run(&scenarios::heuristic());
    // 9 methods + hammer on `have B`, then `auto` on the placeholder.
    assert_eq!(r.extra_calls, 11);
    assert!(r.has_sc);
    assert!(r.final_script.unwrap().contains("have C by auto\n  show ?thesis using C by simp"));
}

#[test]
fn disabling_erp_sends_no_erp_prompts() {
    let s = scenarios::erp(false);
    let r = run(&s);
    assert!(!r.success);
    assert!(s.model.calls().iter().all(|c| c.purpose != PromptPurpose::Erp));
    assert!(!s.model.calls().is_empty());
}

#[test]
fn backtrack_closes_the_inner_block() {
    let r = run(&scenarios::backtrack_success());
    assert!(r.has_sc);
    let script = r.final_script.unwrap();
    assert!(script.contains("    have A1 by simp\n    show ?thesis by auto\n  qed\n  show ?thesis by simp"), "{script}");
    assert!(!script.contains("A2"));
}

#[test]
fn backtrack_truncates_at_the_inner_block() {
    let s = scenarios::backtrack_failure();
    let engine = Engine::new(&s.model, &s.prover, s.budget.clone()).unwrap();
    let session = s.prover.init_session("theory T imports Main begin").unwrap();
    let mut a = Attempt::new(&engine, STATEMENT, &session, parse_script(scenarios::NESTED_PROOF).unwrap());
    assert_eq!(a.validate().unwrap(), Some(4));
    assert!(a.backtrack(4));
    assert_eq!(
        a.script.render(),
        "proof -\n  have A\n  proof -\n    have A1 by simp\n    show ?thesis sorry\n  qed\n  show ?thesis by simp\nqed"
    );
    assert!(!a.backtrack(0));
}

#[test]
fn failure_at_the_first_step_abandons_the_candidate() {
    let model = ReplayModel::new();
    let prover = MockProver::new(MockRules::default());
    let engine = Engine::new(&model, &prover, budget(1)).unwrap();
    let session = prover.init_session("theory T imports Main begin").unwrap();
    let mut a = Attempt::new(&engine, STATEMENT, &session, parse_script("proof (induct n)\n  show ?thesis by simp\nqed").unwrap());
    assert!(!a.run().unwrap());
    assert_eq!(prover.applies().len(), 1);
    assert_eq!(a.extra_calls, 0);
}

#[test]
fn garbage_exhausts_the_budget() {
    let mut model = ReplayModel::new();
    model.insert(&prompts::whole_proof(STATEMENT), vec!["I cannot prove this.".into(), "???".into(), "".into()]);
    let prover = MockProver::new(MockRules::default());
    let r = Engine::new(&model, &prover, budget(3)).unwrap().prove("g", STATEMENT).unwrap();
    assert!(!r.success);
    assert_eq!(r.i_try, 2);
    assert_eq!(r.success_stage, Stage::Failed);
}

#[test]
fn fastforce_on_a_placeholder() {
    let model = ReplayModel::new();
    let prover = MockProver::new(
        MockRules::accept_all()
            .accept("have A by fastforce")
            .with(Matcher::Prefix("have A".into()), Outcome::error("no")),
    );
    let engine = Engine::new(&model, &prover, budget(1)).unwrap();
    let session = prover.init_session("theory T imports Main begin").unwrap();
    let script = parse_script("proof -\n  have A sorry\n  show ?thesis by simp\nqed").unwrap();
    let mut a = Attempt::new(&engine, STATEMENT, &session, script);
    assert_eq!(a.validate().unwrap(), Some(1));
    assert_eq!(a.atp_substitute(1).unwrap(), AtpOutcome::Replaced);
    let position = engine.cascade().tactics().iter().position(|t| t.name == "fastforce").unwrap();
    assert_eq!(a.extra_calls, position as u64 + 1);
    assert!(a.has_sc);
    assert_eq!(a.script.step(1).unwrap().text(), "have A by fastforce");
    // No sorry ever reaches the prover.
    assert!(prover.applies().iter().all(|c| !c.step.as_deref().unwrap().contains("sorry")));
}

#[test]
fn hammer_result_is_spliced() {
    let model = ReplayModel::new();
    let prover = MockProver::new(
        MockRules::accept_all()
            .with(Matcher::Prefix("have A".into()), Outcome::error("no"))
            .with_hammer(Matcher::Prefix("have A".into()), "by (metis foo)"),
    );
    let engine = Engine::new(&model, &prover, budget(1)).unwrap();
    let session = prover.init_session("theory T imports Main begin").unwrap();
    let mut a = Attempt::new(&engine, STATEMENT, &session, parse_script("proof -\n  have A sorry\n  show ?thesis by simp\nqed").unwrap());
    a.validate().unwrap();
    assert_eq!(a.atp_substitute(1).unwrap(), AtpOutcome::Replaced);
    assert_eq!(a.script.step(1).unwrap().text(), "have A by (metis foo)");
    assert_eq!(a.extra_calls, 10);
    let last = prover.applies().pop().unwrap();
    assert!(last.step.unwrap().contains(HAMMER));
    assert_eq!(last.timeout_s, Some(40.0));
}

#[test]
fn failed_cascade_leaves_the_script_unchanged() {
    let model = ReplayModel::new();
    let prover = MockProver::new(MockRules::accept_all().with(Matcher::Prefix("have A".into()), Outcome::error("no")));
    let engine = Engine::new(&model, &prover, budget(1)).unwrap();
    let session = prover.init_session("theory T imports Main begin").unwrap();
    let script = parse_script("proof -\n  have A sorry\n  show ?thesis by simp\nqed").unwrap();
    let mut a = Attempt::new(&engine, STATEMENT, &session, script.clone());
    a.validate().unwrap();
    assert_eq!(a.atp_substitute(1).unwrap(), AtpOutcome::Failed);
    assert_eq!(a.script, script);
    assert!(!a.has_sc);
    // A second request at the same state costs nothing.
    let before = prover.applies().len();
    assert_eq!(a.atp_substitute(1).unwrap(), AtpOutcome::Failed);
    assert_eq!(prover.applies().len(), before);
}

#[test]
fn validation_stops_at_the_first_failure() {
    let text = "proof -\n  have A by simp\n  have B by simp\n  have C by simp\n  have D by simp\n  have E by simp\n  show ?thesis by simp\nqed";
    let prover = MockProver::new(MockRules::accept_all().reject("have E by simp"));
    let session = prover.init_session("theory T imports Main begin").unwrap();
    let script = parse_script(text).unwrap();
    assert_eq!(validate_candidate(&prover, &ProverConfig::default(), &session, &script).unwrap(), Some(5));
    assert_eq!(prover.applies().len(), 6);

    let ok = MockProver::new(MockRules::accept_all());
    let session = ok.init_session("theory T imports Main begin").unwrap();
    assert_eq!(validate_candidate(&ok, &ProverConfig::default(), &session, &script).unwrap(), None);
    let open = parse_script("proof -\n  have A by simp").unwrap();
    let session = ok.init_session("theory T imports Main begin").unwrap();
    assert_eq!(validate_candidate(&ok, &ProverConfig::default(), &session, &open).unwrap(), Some(2));
}

#[test]
fn heuristic_rewrites_three_tactic_steps() {
    let s = parse_script("proof -\n  have A by (metis x)\n  have B by simp\n  show ?thesis by auto\nqed").unwrap();
    let (out, changed) = heuristic_repair(&s, 1);
    assert_eq!(changed.len(), 3);
    assert_eq!(out.find_placeholders(), changed);
    assert_eq!(out.step(1).unwrap().text(), "have A sorry");
}

#[test]
fn requests_respect_budget_and_timeouts() {
    for s in scenarios::all() {
        let _ = run(&s);
        let whole: usize = s.model.calls().iter().filter(|c| c.purpose == PromptPurpose::WholeProof).map(|c| c.n).sum();
        assert!(whole <= s.budget.sample_budget, "{}", s.name);
        for call in s.prover.applies() {
            let expected = if call.step.as_deref().unwrap().contains(HAMMER) { 40.0 } else { 10.0 };
            assert_eq!(call.timeout_s, Some(expected), "{}: {call:?}", s.name);
        }
    }
}

#[test]
fn slow_steps_set_the_timeout_flag() {
    let proof = "proof -\n  have A by (metis slow)\n  show ?thesis by simp\nqed";
    let mut model = ReplayModel::new();
    model.insert(&prompts::whole_proof(STATEMENT), vec![proof.into()]);
    let prover = MockProver::new(MockRules::accept_all().with(
        Matcher::Exact("have A by (metis slow)".into()),
        Outcome::Delay { seconds: 30.0 },
    ));
    let r = Engine::new(&model, &prover, budget(1)).unwrap().prove("slow", STATEMENT).unwrap();
    assert!(r.success);
    assert!(r.has_timeout);
    assert_eq!(r.success_stage, Stage::Atp);
}

#[test]
fn replay_is_deterministic() {
    let strip = |mut r: AttemptRecord| {
        r.wall_time_s = 0.0;
        serde_json::to_string(&r).unwrap()
    };
    let make = || vec![scenarios::atp(), scenarios::erp(true), scenarios::heuristic(), scenarios::backtrack_success()];
    let first: Vec<String> = make().iter().map(|s| strip(run(s))).collect();
    let second: Vec<String> = make().iter().map(|s| strip(run(s))).collect();
    assert_eq!(first, second);
}

#[test]
fn success_requires_the_prover_to_report_done() {
    let mut model = ReplayModel::new();
    model.insert(&prompts::whole_proof(STATEMENT), vec!["proof -\n  have A by simp\nqed".into()]);
    let prover = MockProver::new(MockRules::accept_all().with(Matcher::Exact("qed".into()), Outcome::Ok { done: Some(false) }));
    let r = Engine::new(&model, &prover, BudgetConfig { erp_enabled: false, ..budget(1) })
        .unwrap()
        .prove("open", STATEMENT)
        .unwrap();
    assert!(!r.success);
}

#[test]
fn theory_load_failure_is_a_verdict() {
    let model = MockModel::default();
    let prover = MockProver::new(MockRules { reject_theory: Some("A ∧ B".into()), ..MockRules::accept_all() });
    let r = Engine::new(&model, &prover, budget(2)).unwrap().prove("bad", STATEMENT).unwrap();
    assert!(!r.success);
    assert!(r.aborted.is_none());
}

#[test]
fn unreachable_prover_aborts() {
    let model = MockModel::default();
    let prover = MockProver::new(MockRules { unreachable: true, ..Default::default() });
    let engine = Engine::new(&model, &prover, budget(2)).unwrap();
    assert!(matches!(engine.prove("x", STATEMENT), Err(EngineError::Backend(e)) if e.is_infrastructure()));
    assert!(matches!(engine.prove("x", " "), Err(EngineError::EmptyStatement)));
}

#[test]
fn missing_fixture_aborts_in_the_pool() {
    let model = ReplayModel::new();
    let prover = MockProver::new(MockRules::accept_all());
    let engine = Engine::new(&model, &prover, budget(1)).unwrap();
    let problems = [Problem { name: "p".into(), statement: STATEMENT.into() }];
    let mut out = Vec::new();
    run_pool(&engine, &problems, 2, &AtomicBool::new(false), |_, r| out.push(r));
    assert_eq!(out.len(), 1);
    assert!(out[0].is_aborted());
    assert!(serde_json::to_string(&out[0]).unwrap().contains("\"aborted\""));
}

#[test]
fn pool_emits_in_input_order() {
    let model = MockModel::default();
    let prover = MockProver::new(MockRules::accept_all());
    let engine = Engine::new(&model, &prover, budget(1)).unwrap();
    let problems: Vec<Problem> = (0..40)
        .map(|i| Problem { name: format!("p{i}"), statement: format!("theorem t{i}: \"True\"\n  oops") })
        .collect();
    let mut seen = Vec::new();
    let n = run_pool(&engine, &problems, 4, &AtomicBool::new(false), |i, r| seen.push((i, r.problem_name)));
    assert_eq!(n, 40);
    let expected: Vec<(usize, String)> = (0..40).map(|i| (i, format!("p{i}"))).collect();
    assert_eq!(seen, expected);

    let cancelled = run_pool(&engine, &problems, 4, &AtomicBool::new(true), |_, _| {});
    assert_eq!(cancelled, 0);
}

#[test]
fn custom_cascade_changes_extra_calls() {
    let s = scenarios::atp();
    let cascade = TacticCascade::new(&["simp"], false).unwrap();
    let engine = Engine::new(&s.model, &s.prover, s.budget.clone()).unwrap().with_cascade(cascade);
    let r = engine.prove("atp", &s.statement).unwrap();
    assert_eq!((r.extra_calls, r.success_stage), (1, Stage::Atp));
}

#[test]
fn model_is_asked_once_per_problem() {
    let s = scenarios::atp();
    let _ = run(&s);
    assert_eq!(s.model.calls().len(), 1);
    assert_eq!(s.model.calls()[0].n, 1);
    let _: &dyn LanguageModel = &s.model;
}
