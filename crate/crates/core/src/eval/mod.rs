//! Benchmark runs and summary tables.

mod table;

use std::collections::{HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::AtomicBool;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_pool, AttemptRecord, Engine, Problem};

pub use table::{format_table, method_label, ReportRow, CSV_HEADERS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("problem {0:?} appears more than once")]
    DuplicateProblem(String),
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkProblem {
    pub problem_name: String,
    pub formal_statement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informal_statement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informal_proof: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSpec {
    pub name: String,
    pub problems: Vec<BenchmarkProblem>,
}

impl BenchmarkSpec {
    pub fn new(name: impl Into<String>, problems: Vec<BenchmarkProblem>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for p in &problems {
            if !seen.insert(p.problem_name.as_str()) {
                return Err(EvalError::DuplicateProblem(p.problem_name.clone()));
            }
        }
        Ok(BenchmarkSpec { name: name.into(), problems })
    }

    pub fn load(name: impl Into<String>, reader: impl BufRead) -> Result<Self, EvalError> {
        Self::new(name, read_jsonl(reader)?)
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::BadLine { line: i + 1, reason: e.to_string() })?);
    }
    Ok(out)
}

/// Records from a JSONL file; a later line for the same problem replaces an
/// earlier one. A missing file reads as empty.
pub fn load_records(path: &Path) -> Result<Vec<AttemptRecord>, EvalError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let all: Vec<AttemptRecord> = read_jsonl(BufReader::new(std::fs::File::open(path)?))?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<AttemptRecord> = Vec::new();
    for r in all {
        match index.get(&r.problem_name) {
            Some(&i) => out[i] = r,
            None => {
                index.insert(r.problem_name.clone(), out.len());
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Proves every problem without a verdict in `records_path`, appending each
/// record as it completes. Aborted records are retried. Returns one record
/// per problem in spec order; problems skipped by cancellation are absent.
pub fn run_benchmark(
    spec: &BenchmarkSpec,
    engine: &Engine<'_>,
    records_path: &Path,
    workers: usize,
    cancel: &AtomicBool,
) -> Result<Vec<AttemptRecord>, EvalError> {
    let mut done: HashMap<String, AttemptRecord> = load_records(records_path)?
        .into_iter()
        .filter(|r| !r.is_aborted())
        .map(|r| (r.problem_name.clone(), r))
        .collect();
    let todo: Vec<Problem> = spec
        .problems
        .iter()
        .filter(|p| !done.contains_key(&p.problem_name))
        .map(|p| Problem { name: p.problem_name.clone(), statement: p.formal_statement.clone() })
        .collect();
    if !todo.is_empty() {
        log::info!("{}: {} of {} problems to run", spec.name, todo.len(), spec.problems.len());
        let mut file = OpenOptions::new().create(true).append(true).open(records_path)?;
        let mut write_err = None;
        run_pool(engine, &todo, workers, cancel, |_, r| {
            let line = serde_json::to_string(&r).expect("records serialize");
            if let Err(e) = writeln!(file, "{line}").and_then(|_| file.flush()) {
                write_err.get_or_insert(e);
            }
            done.insert(r.problem_name.clone(), r);
        });
        if let Some(e) = write_err {
            return Err(e.into());
        }
    }
    Ok(spec.problems.iter().filter_map(|p| done.remove(&p.problem_name)).collect())
}

/// Which problems `avg_attempts` averages over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptsOver {
    /// Failures count with their final `i_try`.
    #[default]
    All,
    SuccessOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_problems: usize,
    pub n_success: usize,
    /// Infrastructure aborts, outside every other figure.
    pub n_aborted: usize,
    /// Percent, one decimal.
    pub success_rate: f64,
    /// Two decimals.
    pub avg_attempts: f64,
    pub total_exec_time: String,
    pub total_wall_time_s: f64,
}

/// `num / den` rounded half-up to an integer, for non-negative operands.
fn div_half_up(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Seconds rounded half-up, as `hh:mm:ss`.
pub fn format_hms(seconds: f64) -> String {
    let s = (seconds.max(0.0) + 0.5).floor() as u64;
    format!("{:02}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
}

pub fn aggregate(records: &[AttemptRecord], attempts_over: AttemptsOver) -> Result<EvalReport, EvalError> {
    let counted: Vec<&AttemptRecord> = records.iter().filter(|r| !r.is_aborted()).collect();
    if counted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = counted.len() as u64;
    let n_success = counted.iter().filter(|r| r.success).count() as u64;
    let tenths = div_half_up(1000 * n_success, n);

    let attempts: Vec<u64> = counted
        .iter()
        .filter(|r| attempts_over == AttemptsOver::All || r.success)
        .map(|r| r.i_try as u64)
        .collect();
    let hundredths = if attempts.is_empty() {
        0
    } else {
        div_half_up(100 * attempts.iter().sum::<u64>(), attempts.len() as u64)
    };
    let total: f64 = counted.iter().map(|r| r.wall_time_s).sum();
    Ok(EvalReport {
        n_problems: counted.len(),
        n_success: n_success as usize,
        n_aborted: records.len() - counted.len(),
        success_rate: tenths as f64 / 10.0,
        avg_attempts: hundredths as f64 / 100.0,
        total_exec_time: format_hms(total),
        total_wall_time_s: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up() {
        assert_eq!(div_half_up(5, 10), 1);
        assert_eq!(div_half_up(4, 10), 0);
        assert_eq!(div_half_up(25, 10), 3);
    }

    #[test]
    fn hms() {
        assert_eq!(format_hms(196.01), "00:03:16");
        assert_eq!(format_hms(0.0), "00:00:00");
        assert_eq!(format_hms(3599.5), "01:00:00");
        assert_eq!(format_hms(36_000.0 * 10.0), "100:00:00");
    }

    #[test]
    fn duplicate_names_rejected() {
        let p = BenchmarkProblem {
            problem_name: "a".into(),
            formal_statement: "s".into(),
            informal_statement: None,
            informal_proof: None,
        };
        assert!(matches!(BenchmarkSpec::new("x", vec![p.clone(), p]), Err(EvalError::DuplicateProblem(_))));
    }
}
