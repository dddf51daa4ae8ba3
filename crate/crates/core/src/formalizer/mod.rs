//! Formal statements from policies and natural language.
//!
//! [`compile_policy`] turns an allow-only policy into an Isabelle theory
//! skeleton without a model. [`formalize_nl`] runs the staged model workflow
//! (description, informal proof, formal statement) for everything else.

mod compile;
mod render;
mod staged;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::BackendError;

pub use compile::{compile_policy, service_prefix};
pub use render::{render_body, render_theory, theory_name};
pub use staged::{
    formalize_nl, load_few_shots, stage_prompt, FormalizationRecord, Provenance, Stage,
};
pub use validate::{validate_formal_statement, Finding};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatatypeDef {
    pub name: String,
    pub constructors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordDef {
    pub name: String,
    /// `(field, type)` pairs in declaration order.
    pub fields: Vec<(String, String)>,
}

/// A record value: one entry, or a list of entries when `list` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryDef {
    pub name: String,
    pub record: String,
    pub list: bool,
    /// Field assignments per entry.
    pub entries: Vec<Vec<(String, String)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunDef {
    pub name: String,
    /// Isabelle type, e.g. `policy_entry => ec2_action => bool`.
    pub signature: String,
    /// Defining equations, each without surrounding quotes.
    pub clauses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremDef {
    pub name: String,
    pub conjuncts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheorySkeleton {
    pub datatypes: Vec<DatatypeDef>,
    pub records: Vec<RecordDef>,
    pub definitions: Vec<EntryDef>,
    pub funs: Vec<FunDef>,
    pub theorem: TheoremDef,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormalizeError {
    #[error("policy outside the compiler fragment: {0}")]
    UnsupportedPolicy(String),
    #[error("empty input")]
    EmptyInput,
    #[error("formal statement failed validation after retry: {0:?}")]
    StageValidation(Vec<Finding>),
    #[error("model returned no usable text for {0}")]
    EmptyCompletion(Stage),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("few-shot file: {0}")]
    FewShots(String),
}
