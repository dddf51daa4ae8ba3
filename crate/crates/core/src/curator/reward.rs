use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::backends::{check_script, BackendError, Prover, ProverConfig};
use crate::extract::extract_proof;
use crate::isar::{canonical_tokens, parse_script};

fn tokens(text: &str) -> Vec<String> {
    canonical_tokens(text).unwrap_or_else(|_| text.split_whitespace().map(str::to_string).collect())
}

/// Harmonic mean of token precision and recall over multisets.
pub fn token_f1(predicted: &[String], reference: &[String]) -> f64 {
    if predicted.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0;
    for t in predicted {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    2.0 * overlap as f64 / (predicted.len() + reference.len()) as f64
}

/// 1.0 when the extracted proof is token-equivalent to `ground_truth`.
/// Otherwise token F1, or 0.0 when `strict`.
pub fn reward_correctness(response: &str, ground_truth: &str, strict: bool) -> f64 {
    let Some(proof) = extract_proof(response) else { return 0.0 };
    let (got, want) = (tokens(&proof), tokens(ground_truth));
    if got == want {
        1.0
    } else if strict {
        0.0
    } else {
        token_f1(&got, &want)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    Verified,
    Rejected,
    /// The prover could not be asked; carries the error.
    Undetermined(String),
}

impl Verification {
    /// 1 or 0, or `None` when undetermined.
    pub fn score(&self) -> Option<u8> {
        match self {
            Verification::Verified => Some(1),
            Verification::Rejected => Some(0),
            Verification::Undetermined(_) => None,
        }
    }
}

pub fn reward_verification(
    response: &str,
    statement: &str,
    prover: &dyn Prover,
    config: &ProverConfig,
) -> Verification {
    let Some(script) = extract_proof(response).and_then(|p| parse_script(&p).ok()) else {
        return Verification::Rejected;
    };
    match check_script(prover, config, statement, &script) {
        Ok(o) if o.success => Verification::Verified,
        Ok(_) | Err(BackendError::TheoryLoad(_)) => Verification::Rejected,
        Err(e) => Verification::Undetermined(e.to_string()),
    }
}
