//! Prompt construction for whole-proof sampling and error-driven re-proving.

use crate::backends::{Message, PromptPurpose, PromptRecord};

const EXAMPLE_STATEMENT: &str = include_str!("example_statement.thy");
const EXAMPLE_PROOF: &str = include_str!("example_proof.thy");

const WHOLE_PROOF_SYSTEM: &str = "You are an expert in Isabelle/HOL. Write a complete structured \
     Isar proof for the theorem you are given. Reply with the proof only, in one fenced code block.";

const ERP_SYSTEM: &str = "You are an expert in Isabelle/HOL. The Isar proof below was checked up \
     to the point where it stops; the next step failed. Continue the proof from that point. Reply \
     with the remaining steps only, in one fenced code block.";

fn fenced(text: &str) -> String {
    format!("```isabelle\n{}\n```", text.trim_end())
}

/// One-shot prompt asking for a whole proof of `statement`.
pub fn whole_proof(statement: &str) -> PromptRecord {
    let messages = vec![
        Message::system(WHOLE_PROOF_SYSTEM),
        Message::user(EXAMPLE_STATEMENT.trim_end()),
        Message::assistant(fenced(EXAMPLE_PROOF)),
        Message::user(statement.trim_end()),
    ];
    PromptRecord::new(PromptPurpose::WholeProof, messages, 1).expect("prompt has messages")
}

/// Asks for a continuation of `prefix`, the validated part of a proof of `statement`.
pub fn erp(statement: &str, prefix: &str) -> PromptRecord {
    let body = format!("Theorem:\n{}\n\nProof so far:\n{}", statement.trim_end(), fenced(prefix));
    PromptRecord::new(PromptPurpose::Erp, vec![Message::system(ERP_SYSTEM), Message::user(body)], 0)
        .expect("prompt has messages")
}
