use serde::{Deserialize, Serialize};

use crate::isar::{tokenize, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", content = "detail", rename_all = "snake_case")]
pub enum Finding {
    /// The text does not tokenize (unterminated string, comment or cartouche).
    Unparseable(String),
    UnbalancedBlocks,
    MissingTheorem,
    /// The statement is not left open with `oops` or `sorry`.
    MissingTerminal,
}

/// Structural checks before a statement goes to the engine. An empty list
/// means the text is ready to submit.
pub fn validate_formal_statement(text: &str) -> Vec<Finding> {
    let tokens = match tokenize(text) {
        Ok(t) => t,
        Err(e) => return vec![Finding::Unparseable(e.to_string())],
    };
    let words: Vec<&str> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Word)
        .map(|t| t.text.as_str())
        .collect();
    let mut findings = Vec::new();

    let mut depth: i64 = 0;
    let mut balanced = true;
    for w in &words {
        match *w {
            "proof" => depth += 1,
            "qed" => depth -= 1,
            "oops" if depth > 0 => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            balanced = false;
        }
    }
    if !balanced || depth != 0 {
        findings.push(Finding::UnbalancedBlocks);
    }
    if !words.iter().any(|w| matches!(*w, "theorem" | "lemma")) {
        findings.push(Finding::MissingTheorem);
    }
    let mut tail = words.iter().rev().peekable();
    if tail.peek().is_some_and(|w| **w == "end") {
        tail.next();
    }
    if !tail.next().is_some_and(|w| matches!(*w, "oops" | "sorry")) {
        findings.push(Finding::MissingTerminal);
    }
    findings
}
