#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

pub mod scenarios;

pub fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Regex translation of a wildcard pattern, used as an independent matcher.
pub fn regex_matches(pattern: &str, value: &str) -> bool {
    thread_local! {
        static CACHE: RefCell<HashMap<String, regex::Regex>> = RefCell::new(HashMap::new());
    }
    CACHE.with(|c| {
        c.borrow_mut()
            .entry(pattern.to_string())
            .or_insert_with(|| compile(pattern))
            .is_match(value)
    })
}

fn compile(pattern: &str) -> regex::Regex {
    let mut re = String::from("^");
    for c in pattern.chars() {
        match c {
            '*' => re.push_str(".*"),
            '?' => re.push('.'),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    re.push('$');
    regex::Regex::new(&re).unwrap()
}

/// Test-side policy model, independent of the library types.
#[derive(Debug, Clone)]
pub struct GenStatement {
    pub allow: bool,
    pub actions: Vec<String>,
    pub resources: Vec<String>,
}

pub const ACTIONS: [&str; 8] = [
    "s3:GetObject",
    "s3:PutObject",
    "s3:DeleteObject",
    "s3:ListBucket",
    "ec2:RunInstances",
    "ec2:StopInstances",
    "iam:PassRole",
    "sqs:SendMessage",
];

pub const ACTION_PATTERNS: [&str; 4] = ["s3:*", "s3:Get*", "ec2:?unInstances", "*"];

pub const RESOURCES: [&str; 8] = [
    "arn:aws:s3:::alpha/a.txt",
    "arn:aws:s3:::alpha/b.txt",
    "arn:aws:s3:::beta/x",
    "arn:aws:s3:::alpha",
    "arn:aws:ec2:us-east-1:1234:instance/i-1",
    "arn:aws:ec2:us-east-1:1234:volume/v-1",
    "arn:aws:iam::1234:role/r",
    "arn:aws:sqs:us-east-1:1234:q",
];

pub const RESOURCE_PATTERNS: [&str; 5] = [
    "arn:aws:s3:::alpha/*",
    "arn:aws:s3:::*",
    "arn:aws:ec2:us-east-1:1234:*",
    "arn:aws:s3:::?eta/x",
    "*",
];

fn pick(rng: &mut impl Rng, literals: &[&str], patterns: &[&str], max: usize, wildcards: bool) -> Vec<String> {
    let n = rng.gen_range(1..=max);
    (0..n)
        .map(|_| {
            if wildcards && rng.gen_bool(0.3) {
                patterns.choose(rng).unwrap().to_string()
            } else {
                literals.choose(rng).unwrap().to_string()
            }
        })
        .collect()
}

pub fn gen_policy(rng: &mut impl Rng, allow_only: bool, wildcards: bool) -> Vec<GenStatement> {
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| GenStatement {
            allow: allow_only || rng.gen_bool(0.7),
            actions: pick(rng, &ACTIONS, &ACTION_PATTERNS, 3, wildcards),
            resources: pick(rng, &RESOURCES, &RESOURCE_PATTERNS, 3, wildcards),
        })
        .collect()
}

pub fn policy_json(stmts: &[GenStatement]) -> String {
    let body: Vec<_> = stmts
        .iter()
        .map(|s| {
            let one = |v: &Vec<String>| if v.len() == 1 { json!(v[0]) } else { json!(v) };
            json!({
                "Effect": if s.allow { "Allow" } else { "Deny" },
                "Action": one(&s.actions),
                "Resource": one(&s.resources),
            })
        })
        .collect();
    json!({ "Version": "2012-10-17", "Statement": body }).to_string()
}

/// Literal reading of the rule: some Allow matches and no Deny matches.
pub fn oracle_allows(stmts: &[GenStatement], action: &str, resource: &str) -> bool {
    let hit = |s: &GenStatement| {
        s.actions.iter().any(|p| regex_matches(p, action)) && s.resources.iter().any(|p| regex_matches(p, resource))
    };
    let any_allow = stmts.iter().filter(|s| s.allow).any(hit);
    let any_deny = stmts.iter().filter(|s| !s.allow).any(hit);
    any_allow && !any_deny
}

const TACTICS: [&str; 6] = ["simp", "auto", "blast", "(simp add: foo_def)", "(metis bar)", "arith"];

/// Random nested Isar proof with blocks at most `max_depth` deep. Returns the
/// script text and the number of `sorry` placeholders it contains.
pub fn gen_script(rng: &mut impl Rng, max_depth: usize) -> (String, usize) {
    let mut out = String::new();
    let mut sorries = 0;
    if rng.gen_bool(0.2) {
        out.push_str("(* generated *)\n");
    }
    if max_depth == 0 || rng.gen_bool(0.1) {
        out.push_str("by simp");
        return (out, 0);
    }
    gen_block(rng, 1, max_depth, &mut out, &mut sorries);
    (out, sorries)
}

fn ws(rng: &mut impl Rng) -> &'static str {
    ["\n", " ", "\n    ", "\n\t", "  \n"].choose(rng).unwrap()
}

fn justification(rng: &mut impl Rng, sorries: &mut usize) -> String {
    if rng.gen_bool(0.15) {
        *sorries += 1;
        "sorry".into()
    } else {
        format!("by {}", TACTICS.choose(rng).unwrap())
    }
}

fn gen_block(rng: &mut impl Rng, depth: usize, max_depth: usize, out: &mut String, sorries: &mut usize) {
    out.push_str(["proof -", "proof (induct n)", "proof", "proof (rule ccontr)"].choose(rng).unwrap());
    let n = rng.gen_range(1..=4);
    for i in 0..n {
        out.push_str(ws(rng));
        if i > 0 && rng.gen_bool(0.1) {
            out.push_str("next");
            out.push_str(ws(rng));
        }
        let prefix = ["", "moreover ", "then ", "also ", "from h "].choose(rng).unwrap();
        let stmt = format!("{prefix}have \"P{i} x  = (y :: nat)\"");
        if depth < max_depth && rng.gen_bool(0.3) {
            out.push_str(&stmt);
            out.push_str(ws(rng));
            gen_block(rng, depth + 1, max_depth, out, sorries);
        } else {
            let j = justification(rng, sorries);
            match rng.gen_range(0..4) {
                0 => out.push_str(&format!("{stmt}{}using a b{}{j}", ws(rng), ws(rng))),
                1 => out.push_str(&format!("{stmt} \u{2039}cart\u{203a}{}{j}", ws(rng))),
                2 => out.push_str(&format!("{stmt} (* note *) {j}")),
                _ => out.push_str(&format!("{stmt}{}{j}", ws(rng))),
            }
        }
    }
    out.push_str(ws(rng));
    let j = justification(rng, sorries);
    out.push_str(&format!("ultimately show ?thesis {j}"));
    out.push_str(ws(rng));
    out.push_str("qed");
}
