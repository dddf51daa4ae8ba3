use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use super::{prompts, AttemptRecord, BudgetConfig, EngineError, Stage, TacticCascade};
use crate::backends::{BackendError, LanguageModel, Prover, ProverConfig, Session, StepResult, StepStatus, HAMMER};
use crate::extract::{extract_proof, fenced_block, strip_statement};
use crate::isar::{parse_script, ProofScript, Step};

/// Upper bound on repair iterations for one candidate.
const MAX_ROUNDS: usize = 10_000;

/// Drives candidates for one problem at a time against a model and a prover.
pub struct Engine<'a> {
    model: &'a dyn LanguageModel,
    prover: &'a dyn Prover,
    budget: BudgetConfig,
    cascade: TacticCascade,
}

impl<'a> Engine<'a> {
    pub fn new(
        model: &'a dyn LanguageModel,
        prover: &'a dyn Prover,
        budget: BudgetConfig,
    ) -> Result<Self, EngineError> {
        budget.validate()?;
        Ok(Engine { model, prover, budget, cascade: TacticCascade::standard() })
    }

    pub fn with_cascade(mut self, cascade: TacticCascade) -> Self {
        self.cascade = cascade;
        self
    }

    pub fn budget(&self) -> &BudgetConfig {
        &self.budget
    }

    pub fn cascade(&self) -> &TacticCascade {
        &self.cascade
    }

    /// Samples `sample_budget` whole proofs in one request and repairs them in
    /// order until one is accepted. `Err` means the infrastructure failed and
    /// no verdict was reached.
    pub fn prove(&self, problem_name: &str, statement: &str) -> Result<AttemptRecord, EngineError> {
        let start = Instant::now();
        if statement.trim().is_empty() {
            return Err(EngineError::EmptyStatement);
        }
        let budget = self.budget.sample_budget;
        let prompt = prompts::whole_proof(statement);
        let completions = self.model.complete(&self.budget.model, &prompt, budget)?;
        let theory = self.budget.prover.theory_for(statement);

        let mut record = AttemptRecord::failure(problem_name, budget - 1);
        for (i, completion) in completions.iter().take(budget).enumerate() {
            let Some(script) = extract_proof(completion).and_then(|t| parse_script(&t).ok()) else {
                log::debug!("{problem_name}: candidate {i} has no parseable proof");
                continue;
            };
            if script.is_empty() {
                continue;
            }
            let session = match self.prover.init_session(&theory) {
                Ok(s) => s,
                Err(BackendError::TheoryLoad(msg)) => {
                    log::warn!("{problem_name}: statement rejected by the prover: {msg}");
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let mut attempt = Attempt::new(self, statement, &session, script);
            let outcome = attempt.run();
            if let Err(e) = self.prover.close(&session) {
                log::debug!("{problem_name}: closing session {}: {e}", session.id);
            }
            let success = outcome?;
            record.has_timeout |= attempt.timed_out;
            record.extra_calls = attempt.extra_calls;
            if success {
                record.success = true;
                record.i_try = i;
                record.success_stage = attempt.stage;
                record.has_sc = attempt.has_sc;
                record.final_script = Some(attempt.script.render());
                break;
            }
        }
        record.wall_time_s = start.elapsed().as_secs_f64();
        Ok(record)
    }
}

/// Step-wise check from the last validated state. `states[i]` is the state
/// before step `i` with its goals-done flag. Placeholders are never sent.
fn run_steps(
    prover: &dyn Prover,
    config: &ProverConfig,
    session: &Session,
    script: &ProofScript,
    states: &mut Vec<(String, bool)>,
    timed_out: &mut bool,
) -> Result<Option<usize>, BackendError> {
    let mut i = states.len() - 1;
    while let Some(step) = script.step(i) {
        if step.is_placeholder() {
            return Ok(Some(i));
        }
        let r = prover.apply(session, &states[i].0, &step.text(), config.step_timeout())?;
        match (r.status, r.new_state_id) {
            (StepStatus::Ok, Some(next)) => states.push((next, r.is_done)),
            (StepStatus::Timeout, _) => {
                *timed_out = true;
                return Ok(Some(i));
            }
            _ => return Ok(Some(i)),
        }
        i += 1;
    }
    Ok(if states[i].1 { None } else { Some(i) })
}

/// First position that is not accepted, or `None` when the prover reports no
/// goals after the last step. A script whose steps all pass with goals left
/// fails at its length.
pub fn validate_candidate(
    prover: &dyn Prover,
    config: &ProverConfig,
    session: &Session,
    script: &ProofScript,
) -> Result<Option<usize>, BackendError> {
    let mut states = vec![(session.initial_state.clone(), false)];
    run_steps(prover, config, session, script, &mut states, &mut false)
}

/// Replaces the justification at `position` and every later `by` step with
/// `sorry`. Returns the rewritten script and the positions changed.
pub fn heuristic_repair(script: &ProofScript, position: usize) -> (ProofScript, Vec<usize>) {
    let mut out = script.clone();
    let mut changed = Vec::new();
    for i in position..script.len() {
        let step = script.step(i).expect("index in range");
        let rewrite = if i == position {
            step.has_justification() && !step.is_placeholder()
        } else {
            step.terminal_tactic().is_some()
        };
        if rewrite {
            out = out.splice(i, step.with_justification("sorry")).expect("index in range");
            changed.push(i);
        }
    }
    (out, changed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtpOutcome {
    Replaced,
    Failed,
    /// The step has no justification to swap.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErpOutcome {
    /// The merged script is accepted by the prover.
    Repaired,
    /// The merged script was adopted but fails at this position.
    Rejected(usize),
    /// The completion held no usable continuation; the script is unchanged.
    NoCompletion,
}

/// One candidate inside one prover session.
pub struct Attempt<'e, 'a> {
    engine: &'e Engine<'a>,
    statement: &'e str,
    session: &'e Session,
    pub script: ProofScript,
    states: Vec<(String, bool)>,
    pub extra_calls: u64,
    pub has_sc: bool,
    pub timed_out: bool,
    /// Latest repair mechanism that changed the script.
    pub stage: Stage,
    /// Placeholders from [`heuristic_repair`] with the justification they replaced.
    heuristic_marks: HashMap<usize, String>,
    backtrack_marks: HashSet<usize>,
    atp_failed: HashSet<(String, String)>,
    erp_tries: HashMap<usize, usize>,
    heuristic_tried: HashSet<usize>,
    backtracks: usize,
}

impl<'e, 'a> Attempt<'e, 'a> {
    pub fn new(engine: &'e Engine<'a>, statement: &'e str, session: &'e Session, script: ProofScript) -> Self {
        Attempt {
            engine,
            statement,
            session,
            script,
            states: vec![(session.initial_state.clone(), false)],
            extra_calls: 0,
            has_sc: false,
            timed_out: false,
            stage: Stage::InitProof,
            heuristic_marks: HashMap::new(),
            backtrack_marks: HashSet::new(),
            atp_failed: HashSet::new(),
            erp_tries: HashMap::new(),
            heuristic_tried: HashSet::new(),
            backtracks: 0,
        }
    }

    fn config(&self) -> &ProverConfig {
        &self.engine.budget.prover
    }

    fn apply(&mut self, pos: usize, step: &str, timeout: Duration) -> Result<StepResult, BackendError> {
        let r = self.engine.prover.apply(self.session, &self.states[pos].0, step, timeout)?;
        if r.status == StepStatus::Timeout {
            self.timed_out = true;
        }
        Ok(r)
    }

    fn contribute(&mut self, stage: Stage) {
        self.stage = self.stage.max(stage);
    }

    /// Validates from the first unchecked step; see [`validate_candidate`].
    pub fn validate(&mut self) -> Result<Option<usize>, BackendError> {
        let config = self.engine.budget.prover.clone();
        run_steps(self.engine.prover, &config, self.session, &self.script, &mut self.states, &mut self.timed_out)
    }

    fn accept(&mut self, pos: usize, step: Step, result: StepResult) {
        self.script = self.script.splice(pos, step).expect("position in range");
        self.states.truncate(pos + 1);
        self.states.push((result.new_state_id.expect("ok result has a state"), result.is_done));
    }

    /// Tries each cascade method, then the hammer, as the justification of
    /// the step at `pos`. Each try counts as an extra call.
    pub fn atp_substitute(&mut self, pos: usize) -> Result<AtpOutcome, BackendError> {
        let Some(step) = self.script.step(pos).cloned() else { return Ok(AtpOutcome::NotApplicable) };
        if !step.has_justification() || pos + 1 != self.states.len() {
            return Ok(AtpOutcome::NotApplicable);
        }
        let key = (self.states[pos].0.clone(), step.head());
        if self.atp_failed.contains(&key) {
            return Ok(AtpOutcome::Failed);
        }
        let step_timeout = self.config().step_timeout();
        let mut replaced = None;
        for tactic in self.engine.cascade.tactics() {
            let candidate = step.with_justification(&tactic.justification());
            self.extra_calls += 1;
            let r = self.apply(pos, &candidate.text(), step_timeout)?;
            if r.is_ok() {
                replaced = Some((candidate, r));
                break;
            }
        }
        if replaced.is_none() && self.engine.cascade.hammer {
            let hammer_timeout = self.config().hammer_timeout();
            self.extra_calls += 1;
            let r = self.apply(pos, &step.with_justification(HAMMER).text(), hammer_timeout)?;
            let found = r.message.trim();
            if r.is_ok() && !found.is_empty() {
                let justification =
                    if found.starts_with("by ") || found == "." || found == ".." { found.to_string() } else { format!("by {found}") };
                replaced = Some((step.with_justification(&justification), r));
            }
        }
        match replaced {
            Some((candidate, r)) => {
                self.has_sc |= step.is_placeholder();
                self.accept(pos, candidate, r);
                Ok(AtpOutcome::Replaced)
            }
            None => {
                self.atp_failed.insert(key);
                Ok(AtpOutcome::Failed)
            }
        }
    }

    /// Asks the model to continue from the validated prefix before `pos` and
    /// checks the merged script. A rejected continuation is kept so the
    /// heuristic stage can work on it.
    pub fn erp_repair(&mut self, pos: usize) -> Result<ErpOutcome, BackendError> {
        let prefix = self.script.render_prefix(pos);
        let prompt = prompts::erp(self.statement, &prefix);
        let completions = self.engine.model.complete(&self.engine.budget.model, &prompt, 1)?;
        let Some(text) = completions.first() else { return Ok(ErpOutcome::NoCompletion) };
        let body = strip_statement(fenced_block(text).unwrap_or(text).trim()).trim();
        if body.is_empty() {
            return Ok(ErpOutcome::NoCompletion);
        }
        let old: Vec<String> = self.script.steps().iter().take(pos).map(|s| s.text()).collect();
        let restates_prefix = |s: &ProofScript| s.len() > pos && s.steps().iter().zip(&old).all(|(a, b)| a.text() == *b);
        let merged = match parse_script(body) {
            Ok(s) if pos > 0 && restates_prefix(&s) => s,
            _ => match parse_script(&format!("{prefix}\n{body}")) {
                Ok(s) if s.len() > pos || (s.len() == pos && pos > 0) => s,
                _ => return Ok(ErpOutcome::NoCompletion),
            },
        };
        let same = merged.steps().iter().zip(&old).take_while(|(a, b)| a.text() == **b).count();
        if same < pos {
            log::debug!("continuation rewrote the prefix from step {same}");
        }
        self.script = merged;
        self.states.truncate(same.min(pos) + 1);
        self.heuristic_marks.retain(|&i, _| i < same);
        self.backtrack_marks.retain(|&i| i < same);
        self.contribute(Stage::Erp);
        Ok(match self.validate()? {
            None => ErpOutcome::Repaired,
            Some(p) => ErpOutcome::Rejected(p),
        })
    }

    /// Truncates the innermost block at `pos` and leaves a placeholder there.
    /// Returns false when the candidate should be abandoned instead.
    pub fn backtrack(&mut self, pos: usize) -> bool {
        if pos == 0 || pos >= self.script.len() || self.backtracks >= self.engine.budget.max_backtracks {
            return false;
        }
        // Undo heuristic placeholders past the cut so surviving steps keep their tactics.
        let mut restored = self.script.clone();
        for (&i, original) in &self.heuristic_marks {
            if i > pos && !original.is_empty() {
                let step = restored.step(i).expect("marked position in range").with_justification(original);
                restored = restored.splice(i, step).expect("marked position in range");
            }
        }
        let Ok(block) = restored.innermost_block(pos) else { return false };
        let Ok(truncated) = restored.truncate_to_block(&block, pos) else { return false };
        self.backtracks += 1;
        self.script = truncated;
        self.states.truncate(pos + 1);
        self.heuristic_marks.retain(|&i, _| i < pos);
        self.backtrack_marks.insert(pos);
        true
    }

    fn apply_heuristic(&mut self, pos: usize) -> bool {
        if !self.heuristic_tried.insert(pos) {
            return false;
        }
        let (rewritten, changed) = heuristic_repair(&self.script, pos);
        let at_placeholder = self.script.step(pos).is_some_and(Step::is_placeholder);
        if at_placeholder {
            self.heuristic_marks.insert(pos, String::new());
        }
        if !changed.contains(&pos) {
            // Later placeholders cannot help while this step still fails.
            return at_placeholder;
        }
        for &i in &changed {
            let original = self.script.step(i).and_then(Step::justification).unwrap_or_default();
            // The failing step's own tactic is known bad; later ones get replayed first.
            let replay = if i == pos { String::new() } else { original };
            self.heuristic_marks.insert(i, replay);
        }
        self.script = rewritten;
        self.states.truncate(pos + 1);
        true
    }

    /// Retries the justification a heuristic placeholder replaced. Not an extra call.
    fn replay_original(&mut self, pos: usize) -> Result<bool, BackendError> {
        let Some(original) = self.heuristic_marks.get(&pos).filter(|o| !o.is_empty()).cloned() else {
            return Ok(false);
        };
        let step = self.script.step(pos).expect("marked position in range").with_justification(&original);
        let r = self.apply(pos, &step.text(), self.config().step_timeout())?;
        if r.is_ok() {
            self.heuristic_marks.remove(&pos);
            self.accept(pos, step, r);
            return Ok(true);
        }
        Ok(false)
    }

    /// One repair round at a failure. Returns false when the candidate is abandoned.
    fn repair(&mut self, mut pos: usize) -> Result<bool, BackendError> {
        if self.replay_original(pos)? {
            return Ok(true);
        }
        if self.atp_substitute(pos)? == AtpOutcome::Replaced {
            let by = if self.heuristic_marks.remove(&pos).is_some() { Stage::Heuristic } else { Stage::Atp };
            self.contribute(by);
            return Ok(true);
        }
        if self.backtrack_marks.contains(&pos) {
            return Ok(false);
        }
        if !self.heuristic_marks.contains_key(&pos) {
            let budget = &self.engine.budget;
            let tries = self.erp_tries.entry(pos).or_insert(0);
            if budget.erp_enabled && pos > 0 && *tries < budget.erp_rounds {
                *tries += 1;
                match self.erp_repair(pos)? {
                    ErpOutcome::Repaired => return Ok(true),
                    ErpOutcome::Rejected(p) => pos = p,
                    ErpOutcome::NoCompletion => {}
                }
            }
            if self.apply_heuristic(pos) {
                return Ok(true);
            }
        }
        Ok(self.backtrack(pos))
    }

    /// Repairs until the prover accepts the script or the candidate is abandoned.
    pub fn run(&mut self) -> Result<bool, BackendError> {
        for _ in 0..MAX_ROUNDS {
            match self.validate()? {
                None => return Ok(true),
                Some(pos) => {
                    if !self.repair(pos)? {
                        return Ok(false);
                    }
                }
            }
        }
        log::warn!("candidate abandoned after {MAX_ROUNDS} repair rounds");
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heuristic_counts() {
        let s = parse_script(
            "proof -\n  have A by (metis x)\n  have B by simp\n  have C .\n  show ?thesis by auto\nqed",
        )
        .unwrap();
        let (out, changed) = heuristic_repair(&s, 1);
        assert_eq!(changed, [1, 2, 4]);
        assert_eq!(out.step(1).unwrap().text(), "have A sorry");
        assert_eq!(out.step(3).unwrap().text(), "have C .");
        let (same, none) = heuristic_repair(&s, 5);
        assert!(none.is_empty());
        assert_eq!(same, s);
    }
}
