//! Client for generator processes speaking line-delimited JSON on stdio.
//!
//! Protocol, version 1 (one UTF-8 JSON object per `\n`-terminated line):
//!
//! ```text
//! parent -> child  {"type":"hello","version":1,"dims":d,"context_len":p}
//! child  -> parent {"type":"ready","version":1,"dims":d,"context_len":p}
//! parent -> child  {"type":"propose","id":n,"context":[[..d..],..p rows..],"seed":u64}
//! child  -> parent {"type":"proposal","id":n,"value":[..d..]}
//! parent -> child  {"type":"shutdown"}          (child exits 0)
//! ```
//!
//! Any other reply, a mismatched id or a non-finite value is a protocol
//! error. Children write diagnostics to stderr only. One request is in
//! flight at a time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Context, Proposal, ProposalSource};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSourceConfig {
    /// Executable followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_handshake_ms")]
    pub handshake_timeout_ms: u64,
    #[serde(default = "default_proposal_ms")]
    pub proposal_timeout_ms: u64,
}

fn default_handshake_ms() -> u64 {
    10_000
}

fn default_proposal_ms() -> u64 {
    5_000
}

impl ExternalSourceConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            handshake_timeout_ms: default_handshake_ms(),
            proposal_timeout_ms: default_proposal_ms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() {
            return Err(Error::InvalidConfig("external source command is empty".into()));
        }
        if self.handshake_timeout_ms == 0 || self.proposal_timeout_ms == 0 {
            return Err(Error::InvalidConfig("external source timeouts must be positive".into()));
        }
        Ok(())
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Session {
    fn start(cfg: &ExternalSourceConfig, dims: usize, context_len: usize) -> Result<Self> {
        let mut child = Command::new(&cfg.command[0])
            .args(&cfg.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Spawn(format!("{}: {e}", cfg.command[0])))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut session = Session {
            child,
            stdin,
            lines: rx,
        };
        session.send(&json!({
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "dims": dims,
            "context_len": context_len,
        }))?;
        let reply = session.recv(cfg.handshake_timeout_ms, 0)?;
        expect_type(&reply, "ready")?;
        let version = reply.get("version").and_then(Value::as_u64);
        if version != Some(PROTOCOL_VERSION) {
            return Err(Error::Protocol(format!("unsupported protocol version {version:?}")));
        }
        let got_dims = field_usize(&reply, "dims")?;
        let got_ctx = field_usize(&reply, "context_len")?;
        if got_dims != dims || got_ctx != context_len {
            return Err(Error::HandshakeMismatch {
                expected_dims: dims,
                expected_context: context_len,
                dims: got_dims,
                context: got_ctx,
            });
        }
        Ok(session)
    }

    fn send(&mut self, msg: &Value) -> Result<()> {
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::ChildExit(format!("write failed: {e}")))
    }

    fn recv(&mut self, timeout_ms: u64, request: u64) -> Result<Value> {
        match self.lines.recv_timeout(Duration::from_millis(timeout_ms)) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map_err(|e| Error::Protocol(format!("malformed line {line:?}: {e}"))),
            Ok(Err(e)) => Err(Error::Protocol(format!("unreadable output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout {
                request,
                timeout_ms,
            }),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.wait().map(|s| s.to_string()).unwrap_or_default();
                Err(Error::ChildExit(format!("stdout closed ({status})")))
            }
        }
    }

    fn shutdown(mut self) -> Option<std::process::ExitStatus> {
        let _ = self.send(&json!({ "type": "shutdown" }));
        for _ in 0..100 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return Some(status);
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        self.child.wait().ok();
        None
    }
}

fn expect_type(msg: &Value, ty: &str) -> Result<()> {
    match msg.get("type").and_then(Value::as_str) {
        Some(t) if t == ty => Ok(()),
        other => Err(Error::Protocol(format!("expected '{ty}' message, got {other:?}: {msg}"))),
    }
}

fn field_usize(msg: &Value, key: &str) -> Result<usize> {
    msg.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::Protocol(format!("missing integer field '{key}' in {msg}")))
}

/// A proposal source backed by a child process. The process is restarted at
/// most once if it exits unexpectedly; it is shut down when the source is
/// dropped or [`ExternalSource::close`] is called.
pub struct ExternalSource {
    cfg: ExternalSourceConfig,
    dims: usize,
    context_len: usize,
    session: Option<Session>,
    next_id: u64,
    restarts: u32,
}

/// Spawns the generator process and performs the handshake.
pub fn spawn_external(
    cfg: &ExternalSourceConfig,
    dims: usize,
    context_len: usize,
) -> Result<ExternalSource> {
    cfg.validate()?;
    let session = Session::start(cfg, dims, context_len)?;
    Ok(ExternalSource {
        cfg: cfg.clone(),
        dims,
        context_len,
        session: Some(session),
        next_id: 0,
        restarts: 0,
    })
}

impl ExternalSource {
    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    /// Sends shutdown and returns the child's exit status, if it exited.
    pub fn close(mut self) -> Option<std::process::ExitStatus> {
        self.session.take().and_then(Session::shutdown)
    }

    fn request(&mut self, context: Context<'_>, seed: u64) -> Result<Vec<f64>> {
        let id = self.next_id;
        self.next_id += 1;
        let rows: Vec<&[f64]> = (0..context.rows()).map(|i| context.row(i)).collect();
        let msg = json!({ "type": "propose", "id": id, "context": rows, "seed": seed });
        let timeout = self.cfg.proposal_timeout_ms;
        let session = self
            .session
            .as_mut()
            .ok_or_else(|| Error::ChildExit("source already closed".into()))?;
        session.send(&msg)?;
        let reply = session.recv(timeout, id)?;
        expect_type(&reply, "proposal")?;
        if reply.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(Error::Protocol(format!("reply id mismatch, expected {id}: {reply}")));
        }
        let value: Vec<f64> = reply
            .get("value")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Protocol(format!("proposal without value array: {reply}")))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Error::Protocol(format!("non-numeric value in {reply}"))))
            .collect::<Result<_>>()?;
        if value.len() != self.dims {
            return Err(Error::Protocol(format!(
                "proposal has {} values, expected {}",
                value.len(),
                self.dims
            )));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Protocol("non-finite proposal value".into()));
        }
        Ok(value)
    }
}

impl ProposalSource for ExternalSource {
    fn dims(&self) -> usize {
        self.dims
    }

    fn context_len(&self) -> usize {
        self.context_len
    }

    fn propose_parts(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Proposal> {
        context.check(self.dims, self.context_len)?;
        let context = context.tail(self.context_len);
        let seed = rng.next_u64();
        let value = match self.request(context, seed) {
            Err(Error::ChildExit(reason)) if self.restarts == 0 => {
                log::warn!("generator process exited ({reason}); restarting once");
                self.restarts += 1;
                if let Some(old) = self.session.take() {
                    old.shutdown();
                }
                self.session = Some(Session::start(&self.cfg, self.dims, self.context_len)?);
                self.request(context, seed)?
            }
            other => other?,
        };
        Ok(Proposal {
            mean: value,
            innovation: None,
        })
    }

    fn describe(&self) -> Value {
        json!({ "kind": "external", "command": self.cfg.command, "restarts": self.restarts })
    }
}

impl Drop for ExternalSource {
    fn drop(&mut self) {
        if let Some(s) = self.session.take() {
            s.shutdown();
        }
    }
}
