//! Pulling proof text out of free-form model output.

use crate::isar::{tokenize, Token, TokenKind};

const STATEMENT_WORDS: [&str; 4] = ["theorem", "lemma", "corollary", "proposition"];
const PROOF_START: [&str; 7] = ["proof", "by", "apply", "using", "unfolding", "sorry", "oops"];

/// Content of the first fenced code block, without its info string.
pub fn fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    let close = body.find("```").unwrap_or(body.len());
    Some(body[..close].trim())
}

fn starts_like_proof(inner: &str) -> bool {
    let first = inner.split_whitespace().next().unwrap_or("");
    first == "proof" || first == "by" || first == "apply"
}

/// Body of the first `(* ... *)` comment whose content reads as a proof.
pub fn commented_proof(text: &str) -> Option<String> {
    let tokens = tokenize(text).ok()?;
    tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Comment)
        .map(|t| t.text[2..t.text.len() - 2].trim())
        .find(|inner| starts_like_proof(inner))
        .map(str::to_string)
}

fn word(t: &Token) -> Option<&str> {
    (t.kind == TokenKind::Word).then_some(t.text.as_str())
}

/// First `proof ... qed` span with balanced nesting.
pub fn bare_proof(text: &str) -> Option<&str> {
    let tokens = tokenize(text).ok()?;
    let start = tokens.iter().position(|t| word(t) == Some("proof"))?;
    let mut depth = 0usize;
    for t in &tokens[start..] {
        match word(t) {
            Some("proof") => depth += 1,
            Some("qed") => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[tokens[start].start..t.start + t.text.len()]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Drops a leading `theorem ...:` statement so only the proof remains.
pub fn strip_statement(text: &str) -> &str {
    let Ok(tokens) = tokenize(text) else { return text };
    let Some(first) = tokens.iter().find(|t| t.kind != TokenKind::Comment) else { return text };
    if !word(first).is_some_and(|w| STATEMENT_WORDS.contains(&w)) {
        return text;
    }
    match tokens.iter().find(|t| word(t).is_some_and(|w| PROOF_START.contains(&w))) {
        Some(t) => &text[t.start..],
        None => "",
    }
}

/// Proof text from a model response. Tries a fenced block, then a
/// comment-wrapped proof, then a bare `proof ... qed` span, then the whole
/// response. Returns `None` when nothing but whitespace remains.
pub fn extract_proof(response: &str) -> Option<String> {
    let raw = fenced_block(response)
        .map(str::to_string)
        .or_else(|| commented_proof(response))
        .or_else(|| bare_proof(response).map(str::to_string))
        .unwrap_or_else(|| response.trim().to_string());
    // A fenced block may itself hold a commented-out proof.
    let raw = commented_proof(&raw).filter(|_| raw.trim_start().starts_with("(*")).unwrap_or(raw);
    let proof = strip_statement(&raw).trim();
    let proof = proof
        .strip_suffix("end")
        .filter(|p| p.ends_with(char::is_whitespace))
        .map_or(proof, str::trim_end);
    (!proof.is_empty()).then(|| proof.to_string())
}
