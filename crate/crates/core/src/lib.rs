//! ProofSeek: whole-proof generation with prover-checked repair.
//!
//! The pipeline formalizes a statement (deterministically for access
//! policies, or through staged model prompts), samples whole proofs from a
//! language model, and repairs them against an interactive prover with a
//! tactic cascade, model-driven re-proving, placeholder heuristics and block
//! backtracking.

pub mod backends;
pub mod curator;
pub mod engine;
pub mod eval;
pub mod extract;
pub mod formalizer;
pub mod isar;
pub mod policy;
