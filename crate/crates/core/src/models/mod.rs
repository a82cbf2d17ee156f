//! NER and RE model contracts, the built-in baselines, and the client side
//! of the external plugin protocol.
//!
//! A trained model is immutable; retraining produces a new one. Backends
//! are interchangeable: the pipeline only sees [`NerModel`] and [`ReModel`].

mod echo;
mod logistic;
mod ner;
mod plugin;
mod re;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distant::{NerExample, ReExample, ReInput};
use crate::kg::{EntityType, RelationType};
use crate::{Error, Result};

pub use echo::{serve_echo, EchoOptions};
pub use logistic::{argmax, FeatureIndex, Logistic, LogisticConfig};
pub use ner::{geometric_mean, sentence_features, BaselineNer, NerConfig};
pub use plugin::{PluginNer, PluginProcess, PluginRe, Role, PROTOCOL_VERSION};
pub use re::{re_features, BaselineRe};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub etype: EntityType,
    #[serde(rename = "p")]
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationPrediction {
    pub relation: RelationType,
    #[serde(rename = "p")]
    pub probability: f64,
    #[serde(rename = "dist", default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<BTreeMap<String, f64>>,
}

pub trait NerModel: Send + Sync {
    fn predict(&self, tokens: &[String]) -> Result<Vec<SpanPrediction>>;

    fn predict_batch(&self, batch: &[Vec<String>]) -> Result<Vec<Vec<SpanPrediction>>> {
        batch.iter().map(|t| self.predict(t)).collect()
    }

    fn save(&self, path: &Path) -> Result<()>;

    /// Hash of the corpus the model was trained on.
    fn fingerprint(&self) -> &str;

    /// The in-process baseline behind this handle, if any.
    fn as_baseline(&self) -> Option<&BaselineNer> {
        None
    }
}

pub trait ReModel: Send + Sync {
    fn predict(&self, input: &ReInput) -> Result<RelationPrediction>;

    fn predict_batch(&self, batch: &[ReInput]) -> Result<Vec<RelationPrediction>> {
        batch.iter().map(|i| self.predict(i)).collect()
    }

    fn save(&self, path: &Path) -> Result<()>;

    fn fingerprint(&self) -> &str;

    fn as_baseline(&self) -> Option<&BaselineRe> {
        None
    }
}

/// Hex SHA-256 of the JSON-lines rendering of a corpus.
pub fn corpus_fingerprint<T: Serialize>(corpus: &[T]) -> Result<String> {
    let mut h = Sha256::new();
    for rec in corpus {
        h.update(serde_json::to_vec(rec)?);
        h.update(b"\n");
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Where models come from: the in-process baselines or an external process
/// speaking the plugin protocol.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Backend {
    #[default]
    Baseline,
    Plugin(String),
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "baseline" => Ok(Backend::Baseline),
            Some(("plugin", cmd)) if !cmd.trim().is_empty() => {
                Ok(Backend::Plugin(cmd.trim().to_string()))
            }
            _ => Err(Error::Config(format!(
                "unknown backend {s:?}, expected \"baseline\" or \"plugin:<command>\""
            ))),
        }
    }
}

impl TryFrom<String> for Backend {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Backend> for String {
    fn from(b: Backend) -> Self {
        b.to_string()
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Baseline => f.write_str("baseline"),
            Backend::Plugin(cmd) => write!(f, "plugin:{cmd}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub ner: NerConfig,
    pub re: LogisticConfig,
    pub handshake_timeout_secs: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            ner: NerConfig::default(),
            re: LogisticConfig::default(),
            handshake_timeout_secs: 30,
        }
    }
}

impl ModelConfig {
    fn handshake_timeout(&self) -> Duration {
        Duration::from_secs(self.handshake_timeout_secs)
    }
}

/// Trains an NER model on the whole corpus, from scratch unless `init` is
/// a baseline model to continue from.
pub fn train_ner(
    backend: &Backend,
    corpus: &[NerExample],
    cfg: &ModelConfig,
    seed: u64,
    init: Option<&dyn NerModel>,
) -> Result<Box<dyn NerModel>> {
    match backend {
        Backend::Baseline => {
            let init = init.and_then(|m| m.as_baseline());
            Ok(Box::new(BaselineNer::train_from(
                corpus, &cfg.ner, seed, init,
            )?))
        }
        Backend::Plugin(cmd) => Ok(Box::new(PluginNer::train(
            cmd,
            corpus,
            seed,
            cfg.handshake_timeout(),
        )?)),
    }
}

/// Trains an RE model on the whole corpus; see [`train_ner`] for `init`.
pub fn train_re(
    backend: &Backend,
    corpus: &[ReExample],
    cfg: &ModelConfig,
    seed: u64,
    init: Option<&dyn ReModel>,
) -> Result<Box<dyn ReModel>> {
    match backend {
        Backend::Baseline => {
            let init = init.and_then(|m| m.as_baseline());
            Ok(Box::new(BaselineRe::train_from(
                corpus, &cfg.re, seed, init,
            )?))
        }
        Backend::Plugin(cmd) => Ok(Box::new(PluginRe::train(
            cmd,
            corpus,
            seed,
            cfg.handshake_timeout(),
        )?)),
    }
}

pub fn load_ner(backend: &Backend, path: &Path, cfg: &ModelConfig) -> Result<Box<dyn NerModel>> {
    match backend {
        Backend::Baseline => Ok(Box::new(BaselineNer::load(path)?)),
        Backend::Plugin(cmd) => Ok(Box::new(PluginNer::load(
            cmd,
            path,
            cfg.handshake_timeout(),
        )?)),
    }
}

pub fn load_re(backend: &Backend, path: &Path, cfg: &ModelConfig) -> Result<Box<dyn ReModel>> {
    match backend {
        Backend::Baseline => Ok(Box::new(BaselineRe::load(path)?)),
        Backend::Plugin(cmd) => Ok(Box::new(PluginRe::load(
            cmd,
            path,
            cfg.handshake_timeout(),
        )?)),
    }
}
