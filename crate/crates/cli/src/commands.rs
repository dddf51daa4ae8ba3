use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use proofseek::backends::{BackendError, LanguageModel};
use proofseek::curator::{
    build_rl_records, build_sft_records, filter_self_contained, load_corpus, write_jsonl, Manifest,
};
use proofseek::engine::Engine;
use proofseek::eval::{
    aggregate, format_table, load_records, method_label, run_benchmark, BenchmarkProblem, BenchmarkSpec,
    ReportRow,
};
use proofseek::formalizer::{
    compile_policy, formalize_nl, load_few_shots, render_body, render_theory, theory_name, FormalizationRecord,
    FormalizeError, Provenance,
};
use proofseek::policy::load_path;

use crate::config::{LoggedModel, RunConfig};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Verified = 0,
    Failed = 1,
    Aborted = 2,
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string(v).expect("output serializes"));
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_jsonl(&mut w, items)?;
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn model_with_log(config: &RunConfig, log: Option<&Path>) -> Result<Box<dyn LanguageModel>> {
    let model = config.model()?;
    Ok(match log {
        Some(path) => Box::new(LoggedModel::new(model, path)?),
        None => model,
    })
}

pub fn prove(config: &RunConfig, name: &str, statement: &str, prompt_log: Option<&Path>) -> Result<Status> {
    config.require(true, true)?;
    let model = model_with_log(config, prompt_log)?;
    let prover = config.prover()?;
    let engine = Engine::new(model.as_ref(), prover.as_ref(), config.budget())?;
    let record = engine.prove(name, statement)?;
    print_json(&record);
    Ok(if record.success { Status::Verified } else { Status::Failed })
}

#[derive(Debug, Serialize)]
struct RowError {
    problem_name: String,
    kind: &'static str,
    message: String,
}

impl RowError {
    fn new(problem_name: &str, kind: &'static str, message: impl ToString) -> Self {
        RowError { problem_name: problem_name.to_string(), kind, message: message.to_string() }
    }

    fn formalize(problem_name: &str, e: FormalizeError) -> Self {
        let kind = match &e {
            FormalizeError::UnsupportedPolicy(_) => "unsupported",
            FormalizeError::Backend(b) if b.is_infrastructure() => "backend",
            _ => "formalize",
        };
        Self::new(problem_name, kind, e)
    }
}

/// Writes theories, records, a benchmark file and per-row errors under `out`.
fn emit_formalizations(out: &Path, records: &[FormalizationRecord], errors: &[RowError], rows: usize) -> Result<Status> {
    let theories = out.join("theories");
    create_dir(&theories)?;
    let mut bench = Vec::new();
    for r in records {
        let name = theory_name(&r.problem_name);
        write_file(&theories.join(format!("{name}.thy")), &r.theory_text)?;
        bench.push(BenchmarkProblem {
            problem_name: r.problem_name.clone(),
            formal_statement: r.formal_statement.clone(),
            informal_statement: Some(r.natural_statement.clone()),
            informal_proof: Some(r.informal_proof.clone()).filter(|p| !p.is_empty()),
        });
    }
    write_lines(&out.join("formalizations.jsonl"), records)?;
    write_lines(&out.join("benchmark.jsonl"), &bench)?;
    write_lines(&out.join("errors.jsonl"), errors)?;
    let unsupported = errors.iter().filter(|e| e.kind == "unsupported").count();
    print_json(&json!({
        "rows": rows,
        "theories": records.len(),
        "errors": errors.len(),
        "unsupported": unsupported,
        "out_dir": out,
    }));
    Ok(if errors.iter().any(|e| e.kind == "backend") {
        Status::Aborted
    } else if errors.is_empty() {
        Status::Verified
    } else {
        Status::Failed
    })
}

pub struct PolicyArgs<'a> {
    pub input: &'a Path,
    pub out: &'a Path,
    pub llm: bool,
    pub few_shots: Option<&'a Path>,
}

pub fn policy(config: &RunConfig, args: PolicyArgs<'_>) -> Result<Status> {
    config.require(false, args.llm)?;
    let rows = load_path(args.input)?;
    create_dir(args.out)?;
    let few_shots = match args.few_shots {
        Some(p) => load_few_shots(p)?,
        None => Vec::new(),
    };
    let model = if args.llm { Some(model_with_log(config, Some(&args.out.join("prompts.jsonl")))?) } else { None };

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for row in &rows {
        let name = row.problem_name.as_str();
        let doc = match &row.policy {
            Ok(doc) => doc,
            Err(e) => {
                errors.push(RowError::new(name, "parse", e));
                continue;
            }
        };
        let text = serde_json::to_string_pretty(&doc.statements).expect("policies serialize");
        let result = match &model {
            Some(model) => formalize_nl(name, &text, model.as_ref(), &config.model.params, &few_shots),
            None => compile_policy(doc).map(|skeleton| FormalizationRecord {
                problem_name: name.to_string(),
                natural_statement: text,
                informal_description: String::new(),
                informal_proof: String::new(),
                formal_statement: render_body(&skeleton),
                theory_text: render_theory(&skeleton, &theory_name(name)),
                provenance: Provenance::Compiler,
                retry_count: 0,
            }),
        };
        match result {
            Ok(r) => records.push(r),
            Err(e) => errors.push(RowError::formalize(name, e)),
        }
    }
    emit_formalizations(args.out, &records, &errors, rows.len())
}

#[derive(Debug, Deserialize)]
struct NlProblem {
    problem_name: String,
    statement: String,
}

pub fn formalize(config: &RunConfig, input: &Path, out: &Path, few_shots: Option<&Path>) -> Result<Status> {
    config.require(false, true)?;
    let mut problems = Vec::new();
    for (i, line) in open(input)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: NlProblem = serde_json::from_str(&line).with_context(|| format!("{} line {}", input.display(), i + 1))?;
        problems.push(p);
    }
    create_dir(out)?;
    let few_shots = match few_shots {
        Some(p) => load_few_shots(p)?,
        None => Vec::new(),
    };
    let model = model_with_log(config, Some(&out.join("prompts.jsonl")))?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for p in &problems {
        match formalize_nl(&p.problem_name, &p.statement, model.as_ref(), &config.model.params, &few_shots) {
            Ok(r) => records.push(r),
            Err(e) => errors.push(RowError::formalize(&p.problem_name, e)),
        }
    }
    emit_formalizations(out, &records, &errors, problems.len())
}

pub struct BenchArgs<'a> {
    pub problems: &'a Path,
    pub out: &'a Path,
    pub dataset: Option<&'a str>,
}

pub fn bench(config: &RunConfig, args: BenchArgs<'_>, cancel: &AtomicBool) -> Result<Status> {
    config.require(true, true)?;
    let dataset = args.dataset.map(str::to_string).unwrap_or_else(|| {
        args.problems.file_stem().and_then(|s| s.to_str()).unwrap_or("benchmark").to_string()
    });
    let spec = BenchmarkSpec::load(dataset.clone(), open(args.problems)?)?;
    create_dir(args.out)?;
    let model = model_with_log(config, Some(&args.out.join("prompts.jsonl")))?;
    let prover = config.prover()?;
    let engine = Engine::new(model.as_ref(), prover.as_ref(), config.budget())?;

    let records_path = args.out.join("records.jsonl");
    let records = run_benchmark(&spec, &engine, &records_path, config.run.workers, cancel)?;
    let interrupted = cancel.load(Ordering::SeqCst) || records.len() < spec.problems.len();
    if records.iter().all(|r| r.is_aborted()) {
        print_json(&json!({ "dataset": dataset, "completed": 0, "problems": spec.problems.len() }));
        return Ok(Status::Aborted);
    }
    let report = aggregate(&records, config.run.attempts_over)?;
    let row = ReportRow { dataset: dataset.clone(), method: method_label(config.run.erp_enabled), report };
    let (md, csv) = format_table(std::slice::from_ref(&row));
    write_file(&args.out.join("report.md"), &md)?;
    write_file(&args.out.join("report.csv"), &csv)?;
    print_json(&json!({
        "dataset": row.dataset,
        "method": row.method,
        "report": row.report,
        "interrupted": interrupted,
    }));
    Ok(if interrupted || row.report.n_aborted > 0 { Status::Aborted } else { Status::Verified })
}

pub fn curate(config: &RunConfig, corpus: &Path, out: &Path, sft_count: usize) -> Result<Status> {
    config.require(true, true)?;
    let pairs = load_corpus(open(corpus)?)?;
    let prover = config.prover()?;
    let model = config.model()?;
    let params = &config.model.params;
    let part = filter_self_contained(&pairs, prover.as_ref(), &config.prover.config);
    for (pair, reason) in &part.undetermined {
        log::warn!("undetermined {:?}: {reason}", pair.statement);
    }
    let (sft, mut drops) = build_sft_records(&part.sft, model.as_ref(), params, sft_count, config.seed, config.run.nl_retries)?;
    let (rl, rl_drops) = build_rl_records(&part.rl, model.as_ref(), params, config.run.nl_retries)?;
    drops.extend(rl_drops);

    create_dir(out)?;
    write_lines(&out.join("sft.jsonl"), &sft)?;
    write_lines(&out.join("rl.jsonl"), &rl)?;
    let manifest = Manifest {
        seed: config.seed,
        corpus_pairs: pairs.len(),
        rl_pool: part.rl.len(),
        sft_pool: part.sft.len(),
        undetermined: part.undetermined.len(),
        sft_sample: sft_count,
        sft_records: sft.len(),
        rl_records: rl.len(),
        drops,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out.join("manifest.json"), &format!("{text}\n"))?;
    print_json(&manifest);
    Ok(if part.undetermined.is_empty() { Status::Verified } else { Status::Aborted })
}

/// `DATASET,METHOD,RECORDS_PATH`.
#[derive(Debug, Clone)]
pub struct ReportSource {
    pub dataset: String,
    pub method: String,
    pub path: PathBuf,
}

impl std::str::FromStr for ReportSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, ',');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(m), Some(p)) if !d.is_empty() && !m.is_empty() && !p.is_empty() => {
                Ok(ReportSource { dataset: d.into(), method: m.into(), path: p.into() })
            }
            _ => Err(format!("expected DATASET,METHOD,PATH, got {s:?}")),
        }
    }
}

pub fn report(config: &RunConfig, sources: &[ReportSource], csv_out: Option<&Path>) -> Result<Status> {
    if sources.is_empty() {
        bail!("no record files given");
    }
    let mut rows = Vec::new();
    for s in sources {
        if !s.path.exists() {
            bail!("{} does not exist", s.path.display());
        }
        let records = load_records(&s.path)?;
        let report = aggregate(&records, config.run.attempts_over).with_context(|| s.path.display().to_string())?;
        rows.push(ReportRow { dataset: s.dataset.clone(), method: s.method.clone(), report });
    }
    let (md, csv) = format_table(&rows);
    if let Some(path) = csv_out {
        write_file(path, &csv)?;
    }
    print!("{md}");
    Ok(Status::Verified)
}

/// Exit status for an error that escaped a command.
pub fn error_status(e: &anyhow::Error) -> Status {
    match e.downcast_ref::<BackendError>() {
        Some(b) if !b.is_infrastructure() => Status::Failed,
        _ => Status::Aborted,
    }
}
