#![allow(dead_code)]

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use proofseek::backends::{FixtureEntry, MockRules, ModelCall, PromptPurpose};
use proofseek::engine::prompts;
use proofseek::eval::BenchmarkProblem;

#[path = "../../../core/tests/common/mod.rs"]
pub mod common;

pub fn run(dir: &Path, args: &[&str]) -> Output {
    run_env(dir, args, &[])
}

/// Runs the binary with only the given `PROOFSEEK_*` variables set.
pub fn run_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_proofseek"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("PROOFSEEK_") {
            cmd.env_remove(k);
        }
    }
    cmd.envs(env.iter().copied());
    cmd.output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stdout_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().last().unwrap_or_else(|| panic!("no stdout; stderr: {}", String::from_utf8_lossy(&o.stderr)));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {line}"))
}

pub fn write_rules(dir: &Path, rules: &MockRules) -> PathBuf {
    let path = dir.join("rules.json");
    std::fs::write(&path, serde_json::to_string(rules).unwrap()).unwrap();
    path
}

pub fn write_fixtures(dir: &Path, entries: &[FixtureEntry]) -> PathBuf {
    let path = dir.join("fixtures.jsonl");
    let lines: Vec<String> = entries.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

pub fn whole_proof_fixture(statement: &str, completion: &str) -> FixtureEntry {
    FixtureEntry { digest: prompts::whole_proof(statement).digest(), completions: vec![completion.to_string()] }
}

pub fn fallback_fixture(purpose: PromptPurpose, completion: &str) -> FixtureEntry {
    FixtureEntry { digest: format!("*:{purpose}"), completions: vec![completion.to_string()] }
}

pub fn write_problems(path: &Path, problems: &[BenchmarkProblem]) {
    let lines: Vec<String> = problems.iter().map(|p| serde_json::to_string(p).unwrap()).collect();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    let file = std::fs::File::open(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    std::io::BufReader::new(file)
        .lines()
        .map(|l| l.unwrap())
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(&l).unwrap())
        .collect()
}

pub fn logged_calls(path: &Path) -> Vec<ModelCall> {
    if path.exists() { read_jsonl(path) } else { Vec::new() }
}

/// CSV of `n` generated allow-only policies named `policy_0..`.
pub fn write_policy_csv(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["problem_name", "policy_json"]).unwrap();
    for i in 0..n {
        let stmts = common::gen_policy(&mut rng, true, false);
        w.write_record([format!("policy_{i}"), common::policy_json(&stmts)]).unwrap();
    }
    w.flush().unwrap();
}
