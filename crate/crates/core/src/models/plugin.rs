//! Client for external model processes.
//!
//! Line-delimited JSON over the child's stdin/stdout, one request in flight
//! per process. A malformed or out-of-range reply poisons the handle: every
//! later call fails without talking to the process again.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{corpus_fingerprint, NerModel, ReModel, RelationPrediction, SpanPrediction};
use crate::distant::{NerExample, ReExample, ReInput};
use crate::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ner,
    Re,
}

pub struct PluginProcess {
    command: String,
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<std::io::Result<String>>,
    poisoned: Option<String>,
}

impl PluginProcess {
    /// Starts `command` (split on whitespace, no shell) and performs the
    /// `hello` handshake within `handshake_timeout`.
    pub fn spawn(command: &str, role: Role, handshake_timeout: Duration) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty plugin command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Plugin(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, replies) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut proc = PluginProcess {
            command: command.to_string(),
            child,
            stdin,
            replies,
            poisoned: None,
        };
        let reply = proc.exchange(
            &json!({"op": "hello", "role": role, "version": PROTOCOL_VERSION}),
            Some(handshake_timeout),
        )?;
        proc.expect_ok(&reply, "hello")?;
        Ok(proc)
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned.is_some()
    }

    /// Sends one request and waits for its reply.
    pub fn request(&mut self, msg: &Value) -> Result<Value> {
        self.exchange(msg, None)
    }

    fn exchange(&mut self, msg: &Value, timeout: Option<Duration>) -> Result<Value> {
        if let Some(why) = &self.poisoned {
            return Err(Error::Plugin(format!(
                "{}: handle unusable after {why}",
                self.command
            )));
        }
        let op = msg
            .get("op")
            .and_then(Value::as_str)
            .unwrap_or("?")
            .to_string();
        let mut line = serde_json::to_vec(msg)?;
        line.push(b'\n');
        if let Err(e) = self.stdin.write_all(&line).and_then(|_| self.stdin.flush()) {
            return Err(self.poison(format!("write failed during {op}: {e}")));
        }
        let received = match timeout {
            Some(t) => self.replies.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => {
                    format!("no reply to {op} within {}s", t.as_secs_f64())
                }
                RecvTimeoutError::Disconnected => format!("process exited during {op}"),
            }),
            None => self
                .replies
                .recv()
                .map_err(|_| format!("process exited during {op}")),
        };
        let text = match received {
            Ok(Ok(text)) => text,
            Ok(Err(e)) => return Err(self.poison(format!("read failed during {op}: {e}"))),
            Err(why) => return Err(self.poison(why)),
        };
        let reply: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Err(self.poison(format!("malformed reply to {op}: {e}"))),
        };
        if reply.get("ok") == Some(&Value::Bool(false)) || reply.get("error").is_some() {
            let msg = reply
                .get("error")
                .and_then(Value::as_str)
                .unwrap_or("unspecified failure");
            return Err(Error::Plugin(format!(
                "{} failed {op}: {msg}",
                self.command
            )));
        }
        Ok(reply)
    }

    fn expect_ok(&mut self, reply: &Value, op: &str) -> Result<()> {
        if reply.get("ok") == Some(&Value::Bool(true)) {
            Ok(())
        } else {
            Err(self.poison(format!("reply to {op} lacks \"ok\": true")))
        }
    }

    fn poison(&mut self, why: String) -> Error {
        let err = Error::Plugin(format!("{}: protocol violation: {why}", self.command));
        self.poisoned = Some(why);
        err
    }
}

impl Drop for PluginProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn lock(m: &Mutex<PluginProcess>) -> std::sync::MutexGuard<'_, PluginProcess> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn valid_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

fn path_value(path: &Path) -> Result<Value> {
    let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    Ok(Value::String(abs.to_string_lossy().into_owned()))
}

pub struct PluginNer {
    proc: Mutex<PluginProcess>,
    fingerprint: String,
}

impl PluginNer {
    pub fn train(
        command: &str,
        corpus: &[NerExample],
        seed: u64,
        handshake: Duration,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Precondition("NER training corpus is empty".into()));
        }
        for ex in corpus {
            ex.validate()?;
        }
        let mut proc = PluginProcess::spawn(command, Role::Ner, handshake)?;
        let reply = proc.request(&json!({"op": "train", "examples": corpus, "seed": seed}))?;
        proc.expect_ok(&reply, "train")?;
        Ok(PluginNer {
            proc: Mutex::new(proc),
            fingerprint: corpus_fingerprint(corpus)?,
        })
    }

    pub fn load(command: &str, path: &Path, handshake: Duration) -> Result<Self> {
        let mut proc = PluginProcess::spawn(command, Role::Ner, handshake)?;
        let reply = proc.request(&json!({"op": "load", "path": path_value(path)?}))?;
        proc.expect_ok(&reply, "load")?;
        Ok(PluginNer {
            proc: Mutex::new(proc),
            fingerprint: String::new(),
        })
    }
}

#[derive(Deserialize)]
struct SpanReply {
    spans: Vec<SpanPrediction>,
}

impl NerModel for PluginNer {
    fn predict(&self, tokens: &[String]) -> Result<Vec<SpanPrediction>> {
        if tokens.is_empty() {
            return Err(Error::Precondition("cannot tag an empty sentence".into()));
        }
        let mut proc = lock(&self.proc);
        let reply = proc.request(&json!({"op": "predict", "input": {"tokens": tokens}}))?;
        let spans = match serde_json::from_value::<SpanReply>(reply) {
            Ok(r) => r.spans,
            Err(e) => return Err(proc.poison(format!("bad span reply: {e}"))),
        };
        let mut cursor = 0;
        for s in &spans {
            if s.start < cursor || s.start >= s.end || s.end > tokens.len() {
                return Err(proc.poison(format!(
                    "span [{}, {}) invalid for {} tokens",
                    s.start,
                    s.end,
                    tokens.len()
                )));
            }
            if !valid_probability(s.probability) {
                return Err(
                    proc.poison(format!("span probability {} outside [0, 1]", s.probability))
                );
            }
            if s.etype.as_str().is_empty() {
                return Err(proc.poison("span without a type".into()));
            }
            cursor = s.end;
        }
        Ok(spans)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut proc = lock(&self.proc);
        let reply = proc.request(&json!({"op": "save", "path": path_value(path)?}))?;
        proc.expect_ok(&reply, "save")
    }

    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

pub struct PluginRe {
    proc: Mutex<PluginProcess>,
    fingerprint: String,
}

impl PluginRe {
    pub fn train(
        command: &str,
        corpus: &[ReExample],
        seed: u64,
        handshake: Duration,
    ) -> Result<Self> {
        let labels: std::collections::BTreeSet<_> = corpus.iter().map(|e| &e.label).collect();
        if labels.len() < 2 {
            return Err(Error::Precondition(format!(
                "RE training needs at least two distinct labels, corpus has {}",
                labels.len()
            )));
        }
        let mut proc = PluginProcess::spawn(command, Role::Re, handshake)?;
        let reply = proc.request(&json!({"op": "train", "examples": corpus, "seed": seed}))?;
        proc.expect_ok(&reply, "train")?;
        Ok(PluginRe {
            proc: Mutex::new(proc),
            fingerprint: corpus_fingerprint(corpus)?,
        })
    }

    pub fn load(command: &str, path: &Path, handshake: Duration) -> Result<Self> {
        let mut proc = PluginProcess::spawn(command, Role::Re, handshake)?;
        let reply = proc.request(&json!({"op": "load", "path": path_value(path)?}))?;
        proc.expect_ok(&reply, "load")?;
        Ok(PluginRe {
            proc: Mutex::new(proc),
            fingerprint: String::new(),
        })
    }
}

impl ReModel for PluginRe {
    fn predict(&self, input: &ReInput) -> Result<RelationPrediction> {
        let mut proc = lock(&self.proc);
        let reply = proc.request(&json!({"op": "predict", "input": input}))?;
        let pred: RelationPrediction = match serde_json::from_value(reply) {
            Ok(p) => p,
            Err(e) => return Err(proc.poison(format!("bad relation reply: {e}"))),
        };
        if !valid_probability(pred.probability) {
            return Err(proc.poison(format!(
                "relation probability {} outside [0, 1]",
                pred.probability
            )));
        }
        if let Some(dist) = &pred.distribution {
            let total: f64 = dist.values().sum();
            if !dist.values().all(|p| valid_probability(*p)) || (total - 1.0).abs() > 1e-6 {
                return Err(proc.poison(format!("relation distribution sums to {total}")));
            }
        }
        Ok(pred)
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut proc = lock(&self.proc);
        let reply = proc.request(&json!({"op": "save", "path": path_value(path)?}))?;
        proc.expect_ok(&reply, "save")
    }

    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}
