//! Reference plugin server that wraps the baseline models.
//!
//! Used as the protocol conformance fixture: behind the wire it makes the
//! same predictions as the in-process baselines, so a run through the
//! plugin must match a baseline run exactly. Fault-injection switches
//! exercise the client's error paths.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{BaselineNer, BaselineRe, ModelConfig, NerModel, ReModel, Role, PROTOCOL_VERSION};
use crate::distant::{NerExample, ReExample, ReInput};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EchoOptions {
    /// Report probability 1.2 on every prediction.
    pub bad_probability: bool,
    /// Fail without replying on the first prediction.
    pub crash_on_predict: bool,
    /// Never answer the handshake.
    pub silent: bool,
}

#[derive(Default)]
struct State {
    role: Option<Role>,
    ner: Option<BaselineNer>,
    re: Option<BaselineRe>,
    config: ModelConfig,
}

#[derive(Deserialize)]
struct TokensInput {
    tokens: Vec<String>,
}

/// Serves requests until `input` closes. Returns an error only for
/// injected crashes and broken output streams.
pub fn serve_echo(input: impl BufRead, mut output: impl Write, opts: EchoOptions) -> Result<()> {
    let mut state = State::default();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Value>(&line) {
            Ok(msg) => {
                let op = msg.get("op").and_then(Value::as_str).unwrap_or("");
                if op == "hello" && opts.silent {
                    continue;
                }
                if op == "predict" && opts.crash_on_predict {
                    return Err(Error::Plugin("crash requested".into()));
                }
                handle(&mut state, op, &msg, &opts)
                    .unwrap_or_else(|e| json!({"ok": false, "error": e.to_string()}))
            }
            Err(e) => json!({"ok": false, "error": format!("bad request: {e}")}),
        };
        let mut bytes = serde_json::to_vec(&reply)?;
        bytes.push(b'\n');
        output
            .write_all(&bytes)
            .and_then(|_| output.flush())
            .map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn field<'a>(msg: &'a Value, name: &str) -> Result<&'a Value> {
    msg.get(name)
        .ok_or_else(|| Error::InvalidInput(format!("request lacks {name:?}")))
}

fn handle(state: &mut State, op: &str, msg: &Value, opts: &EchoOptions) -> Result<Value> {
    match op {
        "hello" => {
            let version = msg.get("version").and_then(Value::as_u64);
            if version != Some(u64::from(PROTOCOL_VERSION)) {
                return Err(Error::InvalidInput(format!(
                    "unsupported protocol version {version:?}"
                )));
            }
            state.role = Some(Role::deserialize(field(msg, "role")?)?);
            Ok(json!({"ok": true}))
        }
        "train" => {
            let seed = msg.get("seed").and_then(Value::as_u64).unwrap_or(0);
            let examples = field(msg, "examples")?;
            match state.role {
                Some(Role::Ner) => {
                    let corpus = Vec::<NerExample>::deserialize(examples)?;
                    state.ner = Some(BaselineNer::train(&corpus, &state.config.ner, seed)?);
                }
                Some(Role::Re) => {
                    let corpus = Vec::<ReExample>::deserialize(examples)?;
                    state.re = Some(BaselineRe::train(&corpus, &state.config.re, seed)?);
                }
                None => return Err(Error::Precondition("train before hello".into())),
            }
            Ok(json!({"ok": true}))
        }
        "predict" => {
            let input = field(msg, "input")?;
            match state.role {
                Some(Role::Ner) => {
                    let model = state.ner.as_ref().ok_or_else(untrained)?;
                    let tokens = TokensInput::deserialize(input)?.tokens;
                    let mut spans = model.predict(&tokens)?;
                    if opts.bad_probability {
                        if spans.is_empty() {
                            return Ok(
                                json!({"spans": [{"start": 0, "end": 1, "type": "x", "p": 1.2}]}),
                            );
                        }
                        spans.iter_mut().for_each(|s| s.probability = 1.2);
                    }
                    Ok(json!({ "spans": spans }))
                }
                Some(Role::Re) => {
                    let model = state.re.as_ref().ok_or_else(untrained)?;
                    let mut pred = model.predict(&ReInput::deserialize(input)?)?;
                    if opts.bad_probability {
                        pred.probability = 1.2;
                    }
                    Ok(serde_json::to_value(pred)?)
                }
                None => Err(Error::Precondition("predict before hello".into())),
            }
        }
        "save" => {
            let path = PathBuf::deserialize(field(msg, "path")?)?;
            match state.role {
                Some(Role::Ner) => state.ner.as_ref().ok_or_else(untrained)?.save(&path)?,
                Some(Role::Re) => state.re.as_ref().ok_or_else(untrained)?.save(&path)?,
                None => return Err(Error::Precondition("save before hello".into())),
            }
            Ok(json!({"ok": true}))
        }
        "load" => {
            let path = PathBuf::deserialize(field(msg, "path")?)?;
            match state.role {
                Some(Role::Ner) => state.ner = Some(BaselineNer::load(&path)?),
                Some(Role::Re) => state.re = Some(BaselineRe::load(&path)?),
                None => return Err(Error::Precondition("load before hello".into())),
            }
            Ok(json!({"ok": true}))
        }
        other => Err(Error::InvalidInput(format!("unknown op {other:?}"))),
    }
}

fn untrained() -> Error {
    Error::Precondition("model not trained".into())
}
