//! Fine-tuning data: splitting a theorem corpus into self-contained proofs
//! and the rest, pairing proofs with natural-language statements, and the
//! two reward signals.

mod reward;

use std::io::{BufRead, Write};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    check_script, BackendError, LanguageModel, Message, ModelParams, PromptPurpose, PromptRecord, Prover,
    ProverConfig,
};
use crate::isar::parse_script;

pub use reward::{reward_correctness, reward_verification, token_f1, Verification};

#[derive(Debug, Error)]
pub enum CuratorError {
    #[error("line {line}: {reason}")]
    Corpus { line: usize, reason: String },
    #[error("asked for {requested} samples from a pool of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremProofPair {
    pub statement: String,
    pub proof: String,
    #[serde(default)]
    pub source_theory: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub proof: String,
    pub statement: String,
    pub natural_language_statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RlRecord {
    pub natural_language_statement: String,
    pub formal_proof: String,
}

/// Reads `{statement, proof, source_theory}` lines, skipping blank ones.
pub fn load_corpus(reader: impl BufRead) -> Result<Vec<TheoremProofPair>, CuratorError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corpus_err = |reason: String| CuratorError::Corpus { line: i + 1, reason };
        let pair: TheoremProofPair = serde_json::from_str(&line).map_err(|e| corpus_err(e.to_string()))?;
        if pair.statement.trim().is_empty() || pair.proof.trim().is_empty() {
            return Err(corpus_err("statement and proof must be non-empty".into()));
        }
        out.push(pair);
    }
    Ok(out)
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> Result<(), CuratorError> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// `f` over `items` on up to `workers` threads, results in input order.
fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if items.is_empty() {
        return Vec::new();
    }
    let chunk = items.len().div_ceil(workers.max(1));
    thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Proofs the prover accepts from a fresh `Main` session.
    pub rl: Vec<TheoremProofPair>,
    pub sft: Vec<TheoremProofPair>,
    /// Pairs the prover could not judge, with the error.
    pub undetermined: Vec<(TheoremProofPair, String)>,
}

enum Verdict {
    SelfContained,
    Dependent,
    Undetermined(String),
}

/// Splits `pairs` by whether each proof checks end to end on its own.
pub fn filter_self_contained(pairs: &[TheoremProofPair], prover: &dyn Prover, config: &ProverConfig) -> Partition {
    let verdicts = par_map(pairs, config.pool_size, |pair| {
        let Ok(script) = parse_script(&pair.proof) else { return Verdict::Dependent };
        match check_script(prover, config, &pair.statement, &script) {
            Ok(o) if o.success => Verdict::SelfContained,
            Ok(_) | Err(BackendError::TheoryLoad(_)) => Verdict::Dependent,
            Err(e) => Verdict::Undetermined(e.to_string()),
        }
    });
    let mut out = Partition::default();
    for (pair, v) in pairs.iter().zip(verdicts) {
        match v {
            Verdict::SelfContained => out.rl.push(pair.clone()),
            Verdict::Dependent => out.sft.push(pair.clone()),
            Verdict::Undetermined(e) => {
                log::warn!("{}: undetermined: {e}", pair.source_theory);
                out.undetermined.push((pair.clone(), e));
            }
        }
    }
    out
}

pub fn nl_prompt(statement: &str) -> PromptRecord {
    let messages = vec![
        Message::system(
            "Restate the Isabelle/HOL theorem below as a precise mathematical statement in plain \
             English. Reply with the statement only.",
        ),
        Message::user(statement.trim()),
    ];
    PromptRecord::new(PromptPurpose::NlStatement, messages, 0).expect("prompt has messages")
}

/// Rejects empty text and text that is still formal.
fn check_nl(text: &str) -> Result<String, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty statement".into());
    }
    if text.contains("```") {
        return Err("contains a code block".into());
    }
    let first = text.split_whitespace().next().unwrap_or("");
    if matches!(first, "theorem" | "lemma" | "proof" | "by") {
        return Err("reads as Isabelle source".into());
    }
    Ok(text.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Drop {
    pub statement: String,
    pub reason: String,
}

/// Pairs with their generated statements, and the pairs given up on.
pub type Generated = (Vec<(TheoremProofPair, String)>, Vec<Drop>);

/// One natural-language statement per pair. Invalid generations are retried
/// `retries` times, then dropped. A missing replay fixture is an error.
pub fn generate_nl(
    pairs: &[TheoremProofPair],
    model: &dyn LanguageModel,
    params: &ModelParams,
    retries: usize,
) -> Result<Generated, CuratorError> {
    let mut kept = Vec::new();
    let mut drops = Vec::new();
    'pairs: for pair in pairs {
        let prompt = nl_prompt(&pair.statement);
        let mut reason = String::new();
        for _ in 0..=retries {
            match model.complete(params, &prompt, 1) {
                Ok(out) => match check_nl(out.first().map_or("", String::as_str)) {
                    Ok(nl) => {
                        kept.push((pair.clone(), nl));
                        continue 'pairs;
                    }
                    Err(r) => reason = r,
                },
                Err(e @ BackendError::MissingFixture { .. }) => return Err(e.into()),
                Err(e) => reason = format!("model error: {e}"),
            }
        }
        log::warn!("dropping pair: {reason}");
        drops.push(Drop { statement: pair.statement.clone(), reason });
    }
    Ok((kept, drops))
}

/// Seeded sample of `sample_count` pool indices, in pool order.
pub fn sample_indices(pool_len: usize, sample_count: usize, seed: u64) -> Result<Vec<usize>, CuratorError> {
    if sample_count > pool_len {
        return Err(CuratorError::SampleTooLarge { requested: sample_count, available: pool_len });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, pool_len, sample_count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn build_sft_records(
    pool: &[TheoremProofPair],
    model: &dyn LanguageModel,
    params: &ModelParams,
    sample_count: usize,
    seed: u64,
    retries: usize,
) -> Result<(Vec<SftRecord>, Vec<Drop>), CuratorError> {
    let chosen: Vec<TheoremProofPair> =
        sample_indices(pool.len(), sample_count, seed)?.into_iter().map(|i| pool[i].clone()).collect();
    let (kept, drops) = generate_nl(&chosen, model, params, retries)?;
    let records = kept
        .into_iter()
        .map(|(p, nl)| SftRecord { proof: p.proof, statement: p.statement, natural_language_statement: nl })
        .collect();
    Ok((records, drops))
}

pub fn build_rl_records(
    pool: &[TheoremProofPair],
    model: &dyn LanguageModel,
    params: &ModelParams,
    retries: usize,
) -> Result<(Vec<RlRecord>, Vec<Drop>), CuratorError> {
    let (kept, drops) = generate_nl(pool, model, params, retries)?;
    let records = kept
        .into_iter()
        .map(|(p, nl)| RlRecord { natural_language_statement: nl, formal_proof: p.proof })
        .collect();
    Ok((records, drops))
}

/// Counts and provenance written next to the datasets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub corpus_pairs: usize,
    pub rl_pool: usize,
    pub sft_pool: usize,
    pub undetermined: usize,
    pub sft_sample: usize,
    pub sft_records: usize,
    pub rl_records: usize,
    pub drops: Vec<Drop>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_lines() {
        let text = "{\"statement\":\"s\",\"proof\":\"by simp\",\"source_theory\":\"T\"}\n\n{\"statement\":\"t\",\"proof\":\"by auto\"}\n";
        let pairs = load_corpus(text.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].source_theory, "");
        let bad = "{\"statement\":\"\",\"proof\":\"by simp\"}";
        assert!(matches!(load_corpus(bad.as_bytes()), Err(CuratorError::Corpus { line: 1, .. })));
    }

    #[test]
    fn nl_checks() {
        assert!(check_nl("  For all n, n + 0 = n. ").is_ok());
        assert!(check_nl("").is_err());
        assert!(check_nl("lemma x: \"n + 0 = n\"").is_err());
        assert!(check_nl("```\nfoo\n```").is_err());
    }

    #[test]
    fn sampling_is_seeded_and_sorted() {
        let a = sample_indices(100, 10, 7).unwrap();
        assert_eq!(a, sample_indices(100, 10, 7).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, sample_indices(100, 10, 8).unwrap());
        assert!(sample_indices(3, 4, 0).is_err());
    }

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<usize> = (0..37).collect();
        assert_eq!(par_map(&v, 4, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(par_map(&[] as &[usize], 4, |x| *x).is_empty());
    }
}
