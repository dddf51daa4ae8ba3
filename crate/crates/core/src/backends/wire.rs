//! Line-delimited JSON prover protocol.
//!
//! Each request is one JSON object per line:
//! `{"command": "init"|"apply"|"close", "session_id", "state_id", "step", "timeout_s"}`
//! and each response one line back:
//! `{"status": "ok"|"error"|"timeout", "state_id", "message", "is_done"}`.
//! `init` carries the theory text in `step` and answers with `session_id` and
//! the initial `state_id`. Failures that are not prover verdicts set `fault`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prover::{Prover, ProverConfig, Session, StepResult, StepStatus};
use super::BackendError;

pub const PROVER_ADDR_ENV: &str = "PROOFSEEK_PROVER_ADDR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub status: StepStatus,
    #[serde(default)]
    pub state_id: Option<String>,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub is_done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl WireRequest {
    pub fn init(theory: &str, timeout_s: f64) -> Self {
        WireRequest {
            command: "init".into(),
            session_id: None,
            state_id: None,
            step: Some(theory.into()),
            timeout_s: Some(timeout_s),
        }
    }

    pub fn apply(session: &Session, state: &str, step: &str, timeout: Duration) -> Self {
        WireRequest {
            command: "apply".into(),
            session_id: Some(session.id.clone()),
            state_id: Some(state.into()),
            step: Some(step.into()),
            timeout_s: Some(timeout.as_secs_f64()),
        }
    }

    pub fn close(session: &Session) -> Self {
        WireRequest {
            command: "close".into(),
            session_id: Some(session.id.clone()),
            state_id: None,
            step: None,
            timeout_s: None,
        }
    }
}

impl WireResponse {
    pub fn from_step(r: &StepResult) -> Self {
        WireResponse {
            status: r.status,
            state_id: r.new_state_id.clone(),
            message: r.message.clone(),
            is_done: r.is_done,
            session_id: None,
            fault: None,
        }
    }

    pub fn from_session(s: &Session) -> Self {
        WireResponse {
            status: StepStatus::Ok,
            state_id: Some(s.initial_state.clone()),
            message: String::new(),
            is_done: false,
            session_id: Some(s.id.clone()),
            fault: None,
        }
    }

    pub fn from_error(e: &BackendError) -> Self {
        let (fault, message) = match e {
            BackendError::TheoryLoad(m) => ("theory_load", m.clone()),
            BackendError::SessionClosed(m) => ("session_closed", m.clone()),
            BackendError::Connection(m) => ("connection", m.clone()),
            BackendError::Protocol(m) => ("protocol", m.clone()),
            other => ("transport", other.to_string()),
        };
        WireResponse {
            status: StepStatus::Error,
            state_id: None,
            message,
            is_done: false,
            session_id: None,
            fault: Some(fault.into()),
        }
    }

    fn fault_error(&self) -> Option<BackendError> {
        let m = self.message.clone();
        self.fault.as_deref().map(|f| match f {
            "theory_load" => BackendError::TheoryLoad(m),
            "session_closed" => BackendError::SessionClosed(m),
            "connection" => BackendError::Connection(m),
            "protocol" => BackendError::Protocol(m),
            _ => BackendError::Transport(m),
        })
    }

    pub fn into_step_result(self) -> Result<StepResult, BackendError> {
        if let Some(e) = self.fault_error() {
            return Err(e);
        }
        if (self.status == StepStatus::Ok) != self.state_id.is_some() {
            return Err(BackendError::Protocol("state_id must accompany exactly the ok status".into()));
        }
        Ok(StepResult {
            status: self.status,
            new_state_id: self.state_id,
            message: self.message,
            is_done: self.is_done,
        })
    }

    pub fn into_session(self) -> Result<Session, BackendError> {
        if let Some(e) = self.fault_error() {
            return Err(e);
        }
        if self.status != StepStatus::Ok {
            return Err(BackendError::TheoryLoad(self.message));
        }
        match (self.session_id, self.state_id) {
            (Some(id), Some(initial_state)) => Ok(Session { id, initial_state }),
            _ => Err(BackendError::Protocol("init response lacks session_id/state_id".into())),
        }
    }
}

/// Answers one request against `prover`. `sessions` maps ids to the sessions
/// the prover handed out.
pub fn dispatch(
    prover: &dyn Prover,
    sessions: &Mutex<HashMap<String, Session>>,
    req: &WireRequest,
) -> WireResponse {
    let lookup = || -> Result<Session, BackendError> {
        let id = req
            .session_id
            .as_deref()
            .ok_or_else(|| BackendError::Protocol("missing session_id".into()))?;
        sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| BackendError::SessionClosed(id.into()))
    };
    match req.command.as_str() {
        "init" => match prover.init_session(req.step.as_deref().unwrap_or("")) {
            Ok(s) => {
                sessions.lock().unwrap().insert(s.id.clone(), s.clone());
                WireResponse::from_session(&s)
            }
            Err(e) => WireResponse::from_error(&e),
        },
        "apply" => {
            let result = lookup().and_then(|s| {
                let state = req.state_id.clone().unwrap_or_else(|| s.initial_state.clone());
                let timeout = Duration::from_secs_f64(req.timeout_s.unwrap_or(10.0).max(0.0));
                prover.apply(&s, &state, req.step.as_deref().unwrap_or(""), timeout)
            });
            match result {
                Ok(r) => WireResponse::from_step(&r),
                Err(e) => WireResponse::from_error(&e),
            }
        }
        "close" => match lookup().and_then(|s| {
            sessions.lock().unwrap().remove(&s.id);
            prover.close(&s)
        }) {
            Ok(()) => WireResponse::from_step(&StepResult::ok("closed", false)),
            Err(e) => WireResponse::from_error(&e),
        },
        other => WireResponse::from_error(&BackendError::Protocol(format!("unknown command {other}"))),
    }
}

/// Serves `prover` on `listener`, one thread per connection. The returned
/// handle runs until the process exits.
pub fn serve(listener: TcpListener, prover: Arc<dyn Prover>) -> JoinHandle<()> {
    let sessions = Arc::new(Mutex::new(HashMap::new()));
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let prover = Arc::clone(&prover);
            let sessions = Arc::clone(&sessions);
            std::thread::spawn(move || {
                let Ok(mut writer) = stream.try_clone() else { return };
                let reader = BufReader::new(stream);
                for line in reader.lines() {
                    let Ok(line) = line else { break };
                    if line.trim().is_empty() {
                        continue;
                    }
                    let resp = match serde_json::from_str::<WireRequest>(&line) {
                        Ok(req) => dispatch(prover.as_ref(), &sessions, &req),
                        Err(e) => WireResponse::from_error(&BackendError::Protocol(e.to_string())),
                    };
                    let mut out = serde_json::to_string(&resp).expect("response serializes");
                    out.push('\n');
                    if writer.write_all(out.as_bytes()).is_err() {
                        break;
                    }
                }
            });
        }
    })
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Conn {
    fn round_trip(&mut self, req: &WireRequest, wait: Duration) -> Result<WireResponse, BackendError> {
        let mut line = serde_json::to_string(req).map_err(|e| BackendError::Protocol(e.to_string()))?;
        line.push('\n');
        self.writer
            .set_read_timeout(Some(wait))
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        self.writer
            .write_all(line.as_bytes())
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let mut buf = String::new();
        let n = self
            .reader
            .read_line(&mut buf)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if n == 0 {
            return Err(BackendError::Transport("prover closed the connection".into()));
        }
        serde_json::from_str(&buf).map_err(|e| BackendError::Protocol(e.to_string()))
    }
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
    }

    fn release(&self) {
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
    }
}

/// Prover client over TCP. Each session gets its own connection; at most
/// `pool_size` sessions are open at once and further `init_session` calls wait.
pub struct TcpProver {
    config: ProverConfig,
    conns: Mutex<HashMap<String, Arc<Mutex<Conn>>>>,
    slots: Slots,
}

/// Extra read allowance beyond a request's own timeout.
const GRACE: Duration = Duration::from_secs(5);

impl TcpProver {
    pub fn new(config: ProverConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let slots = Slots { free: Mutex::new(config.pool_size), cv: Condvar::new() };
        Ok(TcpProver { config, conns: Mutex::new(HashMap::new()), slots })
    }

    fn connect(&self) -> Result<Conn, BackendError> {
        let addrs: Vec<SocketAddr> = self
            .config
            .endpoint
            .to_socket_addrs()
            .map_err(|e| BackendError::Connection(format!("{}: {e}", self.config.endpoint)))?
            .collect();
        let mut last = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, Duration::from_secs(5)) {
                Ok(stream) => {
                    let writer = stream
                        .try_clone()
                        .map_err(|e| BackendError::Connection(e.to_string()))?;
                    return Ok(Conn { reader: BufReader::new(stream), writer });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(BackendError::Connection(format!(
            "{}: {}",
            self.config.endpoint,
            last.map_or("no address".to_string(), |e| e.to_string())
        )))
    }

    fn conn(&self, session: &Session) -> Result<Arc<Mutex<Conn>>, BackendError> {
        self.conns
            .lock()
            .unwrap()
            .get(&session.id)
            .cloned()
            .ok_or_else(|| BackendError::SessionClosed(session.id.clone()))
    }
}

impl Prover for TcpProver {
    fn init_session(&self, theory: &str) -> Result<Session, BackendError> {
        self.slots.acquire();
        let result = (|| {
            let mut conn = self.connect()?;
            let wait = Duration::from_secs_f64(self.config.init_timeout_s) + GRACE;
            let session = conn
                .round_trip(&WireRequest::init(theory, self.config.init_timeout_s), wait)?
                .into_session()?;
            self.conns
                .lock()
                .unwrap()
                .insert(session.id.clone(), Arc::new(Mutex::new(conn)));
            Ok(session)
        })();
        if result.is_err() {
            self.slots.release();
        }
        result
    }

    fn apply(
        &self,
        session: &Session,
        state: &str,
        step: &str,
        timeout: Duration,
    ) -> Result<StepResult, BackendError> {
        let conn = self.conn(session)?;
        let mut conn = conn.lock().unwrap();
        conn.round_trip(&WireRequest::apply(session, state, step, timeout), timeout + GRACE)?
            .into_step_result()
    }

    fn close(&self, session: &Session) -> Result<(), BackendError> {
        let conn = self.conns.lock().unwrap().remove(&session.id);
        let Some(conn) = conn else {
            return Err(BackendError::SessionClosed(session.id.clone()));
        };
        self.slots.release();
        let mut conn = conn.lock().unwrap();
        conn.round_trip(&WireRequest::close(session), GRACE)?;
        Ok(())
    }
}
