use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{theory_name, validate_formal_statement, FormalizeError, Finding};
use crate::backends::{LanguageModel, Message, ModelParams, PromptPurpose, PromptRecord};
use crate::extract::fenced_block;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Description,
    InformalProof,
    FormalStatement,
}

impl Stage {
    pub fn purpose(self) -> PromptPurpose {
        match self {
            Stage::Description => PromptPurpose::StageDescription,
            Stage::InformalProof => PromptPurpose::StageInformalProof,
            Stage::FormalStatement => PromptPurpose::StageFormalStatement,
        }
    }

    fn instruction(self) -> &'static str {
        match self {
            Stage::Description => {
                "Explain the following statement in plain English. Name every entity, \
                 permission and condition it mentions."
            }
            Stage::InformalProof => {
                "Give an informal argument, as numbered observations, that the described \
                 statement holds."
            }
            Stage::FormalStatement => {
                "Write an Isabelle/HOL formalization of the statement: datatypes for the \
                 entities, records for structured values, functions for the logic and a \
                 final theorem. Leave the theorem unproved with `oops`. Reply with one \
                 fenced code block."
            }
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.purpose().as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Deterministic policy compiler.
    Compiler,
    /// Staged model workflow.
    #[default]
    Llm,
}

/// The chain s → d → p → S for one problem, plus the emitted theory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalizationRecord {
    pub problem_name: String,
    pub natural_statement: String,
    pub informal_description: String,
    pub informal_proof: String,
    pub formal_statement: String,
    pub theory_text: String,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default)]
    pub retry_count: u32,
}

pub fn load_few_shots(path: &Path) -> Result<Vec<FormalizationRecord>, FormalizeError> {
    let file = std::fs::File::open(path).map_err(|e| FormalizeError::FewShots(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FormalizeError::FewShots(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| FormalizeError::FewShots(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

fn stage_input(stage: Stage, s: &str, d: &str, p: &str) -> String {
    let mut text = format!("Statement:\n{s}");
    if stage != Stage::Description {
        text.push_str(&format!("\n\nDescription:\n{d}"));
    }
    if stage == Stage::FormalStatement {
        text.push_str(&format!("\n\nInformal proof:\n{p}"));
    }
    text
}

fn stage_output(stage: Stage, r: &FormalizationRecord) -> String {
    match stage {
        Stage::Description => r.informal_description.clone(),
        Stage::InformalProof => r.informal_proof.clone(),
        Stage::FormalStatement => format!("```isabelle\n{}\n```", r.formal_statement),
    }
}

/// Prompt for one stage. `rejected` carries the findings of a previous
/// formal statement when retrying.
pub fn stage_prompt(
    stage: Stage,
    s: &str,
    d: &str,
    p: &str,
    few_shots: &[FormalizationRecord],
    rejected: Option<&[Finding]>,
) -> PromptRecord {
    let mut messages = vec![Message::system(stage.instruction())];
    for shot in few_shots {
        messages.push(Message::user(stage_input(
            stage,
            &shot.natural_statement,
            &shot.informal_description,
            &shot.informal_proof,
        )));
        messages.push(Message::assistant(stage_output(stage, shot)));
    }
    let mut input = stage_input(stage, s, d, p);
    if let Some(findings) = rejected {
        let names: Vec<String> = findings.iter().map(|f| format!("{f:?}")).collect();
        input.push_str(&format!(
            "\n\nYour previous formal statement was rejected ({}). Return a corrected one.",
            names.join(", ")
        ));
    }
    messages.push(Message::user(input));
    PromptRecord::new(stage.purpose(), messages, few_shots.len()).expect("prompt has messages")
}

fn ask(
    model: &dyn LanguageModel,
    params: &ModelParams,
    prompt: &PromptRecord,
    stage: Stage,
) -> Result<String, FormalizeError> {
    let out = model.complete(params, prompt, 1)?;
    let text = out.into_iter().next().unwrap_or_default().trim().to_string();
    if text.is_empty() {
        return Err(FormalizeError::EmptyCompletion(stage));
    }
    Ok(text)
}

fn statement_of(completion: &str) -> String {
    fenced_block(completion).unwrap_or(completion).trim().to_string()
}

/// Runs description, informal proof and formal statement in that order. The
/// formal statement gets one retry when it fails structural validation.
pub fn formalize_nl(
    problem_name: &str,
    statement: &str,
    model: &dyn LanguageModel,
    params: &ModelParams,
    few_shots: &[FormalizationRecord],
) -> Result<FormalizationRecord, FormalizeError> {
    let s = statement.trim();
    if s.is_empty() {
        return Err(FormalizeError::EmptyInput);
    }
    let d = ask(model, params, &stage_prompt(Stage::Description, s, "", "", few_shots, None), Stage::Description)?;
    let p = ask(
        model,
        params,
        &stage_prompt(Stage::InformalProof, s, &d, "", few_shots, None),
        Stage::InformalProof,
    )?;
    let first = stage_prompt(Stage::FormalStatement, s, &d, &p, few_shots, None);
    let mut formal = statement_of(&ask(model, params, &first, Stage::FormalStatement)?);
    let mut retry_count = 0;
    let findings = validate_formal_statement(&formal);
    if !findings.is_empty() {
        log::warn!("{problem_name}: formal statement rejected ({findings:?}), retrying");
        retry_count = 1;
        let retry = stage_prompt(Stage::FormalStatement, s, &d, &p, few_shots, Some(&findings));
        formal = statement_of(&ask(model, params, &retry, Stage::FormalStatement)?);
        let findings = validate_formal_statement(&formal);
        if !findings.is_empty() {
            return Err(FormalizeError::StageValidation(findings));
        }
    }
    let theory_text = if formal.starts_with("theory ") {
        formal.clone()
    } else {
        format!("theory {}\n  imports Main\nbegin\n\n{formal}\n\nend\n", theory_name(problem_name))
    };
    Ok(FormalizationRecord {
        problem_name: problem_name.to_string(),
        natural_statement: s.to_string(),
        informal_description: d,
        informal_proof: p,
        formal_statement: formal,
        theory_text,
        provenance: Provenance::Llm,
        retry_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ReplayModel;

    const GOOD: &str = "```isabelle\ntheorem t: shows \"True\"\n  oops\n```";

    fn replay(formal: &[&str]) -> ReplayModel {
        let mut m = ReplayModel::new();
        m.insert_fallback(PromptPurpose::StageDescription, vec!["desc".into()]);
        m.insert_fallback(PromptPurpose::StageInformalProof, vec!["why".into()]);
        let s = "All users may read.";
        let first = stage_prompt(Stage::FormalStatement, s, "desc", "why", &[], None);
        m.insert(&first, vec![formal[0].into()]);
        if let Some(second) = formal.get(1) {
            let findings = validate_formal_statement(&statement_of(formal[0]));
            let retry = stage_prompt(Stage::FormalStatement, s, "desc", "why", &[], Some(&findings));
            m.insert(&retry, vec![second.to_string()]);
        }
        m
    }

    #[test]
    fn stages_run_in_order() {
        let m = replay(&[GOOD]);
        let r = formalize_nl("p1", "All users may read.", &m, &ModelParams::default(), &[]).unwrap();
        let purposes: Vec<_> = m.calls().iter().map(|c| c.purpose).collect();
        assert_eq!(
            purposes,
            [PromptPurpose::StageDescription, PromptPurpose::StageInformalProof, PromptPurpose::StageFormalStatement]
        );
        assert_eq!(r.formal_statement, "theorem t: shows \"True\"\n  oops");
        assert!(r.theory_text.starts_with("theory p1\n"));
        assert_eq!(r.retry_count, 0);
    }

    #[test]
    fn one_retry_then_success() {
        let m = replay(&["theorem t: shows \"True\"", GOOD]);
        let r = formalize_nl("p1", "All users may read.", &m, &ModelParams::default(), &[]).unwrap();
        assert_eq!(r.retry_count, 1);
        assert_eq!(m.calls().len(), 4);
    }

    #[test]
    fn invalid_twice_fails() {
        let m = replay(&["nothing here", "still nothing"]);
        let err = formalize_nl("p1", "All users may read.", &m, &ModelParams::default(), &[]).unwrap_err();
        assert!(matches!(err, FormalizeError::StageValidation(_)));
    }

    #[test]
    fn empty_input_rejected() {
        let m = ReplayModel::new();
        assert_eq!(
            formalize_nl("p", "  ", &m, &ModelParams::default(), &[]).unwrap_err(),
            FormalizeError::EmptyInput
        );
        assert!(m.calls().is_empty());
    }
}
