use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use serde::{Deserialize, Serialize};

use super::{AttemptRecord, Engine};

/// Set to stop handing out new problems; running ones finish.
pub type CancelFlag = Arc<AtomicBool>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub statement: String,
}

/// Proves `problems` on up to `workers` threads. Records reach `emit` in
/// input order with their index; an infrastructure failure becomes an
/// aborted record. Returns the number of records emitted.
pub fn run_pool<F>(engine: &Engine<'_>, problems: &[Problem], workers: usize, cancel: &AtomicBool, mut emit: F) -> usize
where
    F: FnMut(usize, AttemptRecord),
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, AttemptRecord)>();
    let mut emitted = 0;
    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, problems.len().max(1)) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                if cancel.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = problems.get(i) else { break };
                let record = engine.prove(&p.name, &p.statement).unwrap_or_else(|e| {
                    log::error!("{}: aborted: {e}", p.name);
                    AttemptRecord::aborted(&p.name, e.to_string())
                });
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (i, record) in rx {
            pending.insert(i, record);
            while let Some(r) = pending.remove(&expected) {
                emit(expected, r);
                emitted += 1;
                expected += 1;
            }
        }
        // Gaps only appear after cancellation; keep what finished.
        for (i, r) in pending {
            emit(i, r);
            emitted += 1;
        }
    });
    emitted
}
