use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IterationStats;
use crate::discovery::{CandidateEntity, CandidateTriple, EntityPool, Knowledge, TriplePool};
use crate::distant::{NerExample, ReExample};
use crate::kg::{EntityId, Triple};
use crate::models::{load_ner, load_re, Backend, ModelConfig, NerModel, ReModel};
use crate::util::{read_jsonl, write_json_pretty, write_jsonl};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

const NER_CORPUS: &str = "ner.jsonl";
const RE_CORPUS: &str = "re.jsonl";
const ENTITY_POOL: &str = "entity_pool.jsonl";
const TRIPLE_POOL: &str = "triple_pool.jsonl";
const NER_MODEL: &str = "ner.model";
const RE_MODEL: &str = "re.model";
const MANIFEST: &str = "state.json";

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Content key for deduplication: the sentence id is not part of it, so the
/// same text labelled the same way is kept once.
fn ner_key(ex: &NerExample) -> [u8; 32] {
    let bytes = serde_json::to_vec(&(&ex.tokens, &ex.labels)).expect("serializable");
    Sha256::digest(bytes).into()
}

fn re_key(ex: &ReExample) -> [u8; 32] {
    let bytes = serde_json::to_vec(&(&ex.input.text, &ex.label)).expect("serializable");
    Sha256::digest(bytes).into()
}

/// Hashes identifying what a checkpoint was produced from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: String,
    pub partitions: String,
    pub kg: String,
}

/// Loop state between iterations. All randomness is derived from the run
/// seed and stable labels, so there is no generator state to carry.
#[derive(Default)]
pub struct PipelineState {
    /// Number of completed iterations.
    pub iteration: usize,
    pub corp_n: Vec<NerExample>,
    pub corp_r: Vec<ReExample>,
    seen_n: HashSet<[u8; 32]>,
    seen_r: HashSet<[u8; 32]>,
    pub e_o: BTreeSet<EntityId>,
    pub t_o: BTreeSet<Triple>,
    pub entity_pool: EntityPool,
    pub triple_pool: TriplePool,
    pub knowledge: Knowledge,
    pub stats: Vec<IterationStats>,
    pub ner: Option<Box<dyn NerModel>>,
    pub re: Option<Box<dyn ReModel>>,
}

impl PipelineState {
    /// Set-union of new examples into the corpora, in arrival order.
    /// Returns how many were actually added.
    pub fn union(&mut self, ner: Vec<NerExample>, re: Vec<ReExample>) -> (usize, usize) {
        let (n0, r0) = (self.corp_n.len(), self.corp_r.len());
        for ex in ner {
            if self.seen_n.insert(ner_key(&ex)) {
                self.corp_n.push(ex);
            }
        }
        for ex in re {
            if self.seen_r.insert(re_key(&ex)) {
                self.corp_r.push(ex);
            }
        }
        (self.corp_n.len() - n0, self.corp_r.len() - r0)
    }

    /// Replaces the corpora with the new examples only (deduplicated).
    pub fn replace(&mut self, ner: Vec<NerExample>, re: Vec<ReExample>) {
        self.corp_n.clear();
        self.corp_r.clear();
        self.seen_n.clear();
        self.seen_r.clear();
        self.union(ner, re);
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    provenance: Provenance,
    iteration: usize,
    e_o: BTreeSet<EntityId>,
    t_o: BTreeSet<Triple>,
    e_conf: Vec<CandidateEntity>,
    t_conf: Vec<CandidateTriple>,
    stats: Vec<IterationStats>,
    ner_fingerprint: Option<String>,
    re_fingerprint: Option<String>,
    /// SHA-256 of every other file in the checkpoint.
    files: BTreeMap<String, String>,
}

fn tmp_dir(dir: &Path) -> PathBuf {
    dir.with_extension("tmp")
}

fn old_dir(dir: &Path) -> PathBuf {
    dir.with_extension("old")
}

/// Writes the state into `dir` atomically: everything goes to a sibling
/// temporary directory first, which then replaces `dir` by rename.
pub fn checkpoint(state: &PipelineState, provenance: &Provenance, dir: &Path) -> Result<()> {
    let tmp = tmp_dir(dir);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;

    write_jsonl(&tmp.join(NER_CORPUS), &state.corp_n)?;
    write_jsonl(&tmp.join(RE_CORPUS), &state.corp_r)?;
    state.entity_pool.save(&tmp.join(ENTITY_POOL))?;
    state.triple_pool.save(&tmp.join(TRIPLE_POOL))?;
    if let Some(m) = &state.ner {
        m.save(&tmp.join(NER_MODEL))?;
    }
    if let Some(m) = &state.re {
        m.save(&tmp.join(RE_MODEL))?;
    }

    let mut files = BTreeMap::new();
    for name in [
        NER_CORPUS,
        RE_CORPUS,
        ENTITY_POOL,
        TRIPLE_POOL,
        NER_MODEL,
        RE_MODEL,
    ] {
        let p = tmp.join(name);
        if p.exists() {
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            files.insert(name.to_string(), sha256_hex(&bytes));
        }
    }
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        provenance: provenance.clone(),
        iteration: state.iteration,
        e_o: state.e_o.clone(),
        t_o: state.t_o.clone(),
        e_conf: state.knowledge.e_conf.clone(),
        t_conf: state.knowledge.t_conf.clone(),
        stats: state.stats.clone(),
        ner_fingerprint: state.ner.as_ref().map(|m| m.fingerprint().to_string()),
        re_fingerprint: state.re.as_ref().map(|m| m.fingerprint().to_string()),
        files,
    };
    write_json_pretty(&tmp.join(MANIFEST), &manifest)?;

    let old = old_dir(dir);
    if dir.exists() {
        if old.exists() {
            fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
        }
        fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    if old.exists() {
        fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
    }
    Ok(())
}

/// True if `dir` (or the backup left by an interrupted swap) holds a checkpoint.
pub fn has_checkpoint(dir: &Path) -> bool {
    dir.join(MANIFEST).exists() || old_dir(dir).join(MANIFEST).exists()
}

/// Loads and verifies a checkpoint written by [`checkpoint`].
pub fn resume(
    dir: &Path,
    expected: &Provenance,
    backend: &Backend,
    models: &ModelConfig,
) -> Result<PipelineState> {
    let dir = if dir.join(MANIFEST).exists() {
        dir.to_path_buf()
    } else {
        // crashed between the two renames
        old_dir(dir)
    };
    let manifest_path = dir.join(MANIFEST);
    let bytes = fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let m: Manifest = serde_json::from_slice(&bytes).map_err(|e| {
        Error::Checkpoint(format!(
            "{}: corrupt manifest: {e}",
            manifest_path.display()
        ))
    })?;
    if m.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            m.version
        )));
    }
    if &m.provenance != expected {
        return Err(Error::Checkpoint(
            "checkpoint was written for a different configuration, corpus or KG".into(),
        ));
    }
    for (name, sha) in &m.files {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if &sha256_hex(&bytes) != sha {
            return Err(Error::Checkpoint(format!(
                "{}: content hash mismatch",
                p.display()
            )));
        }
    }
    let corrupt = |e: Error| Error::Checkpoint(format!("{}: {e}", dir.display()));

    let mut state = PipelineState {
        iteration: m.iteration,
        e_o: m.e_o,
        t_o: m.t_o,
        knowledge: Knowledge {
            e_conf: m.e_conf,
            t_conf: m.t_conf,
        },
        stats: m.stats,
        entity_pool: EntityPool::load(&dir.join(ENTITY_POOL)).map_err(corrupt)?,
        triple_pool: TriplePool::load(&dir.join(TRIPLE_POOL)).map_err(corrupt)?,
        ..PipelineState::default()
    };
    let ner: Vec<NerExample> = read_jsonl(&dir.join(NER_CORPUS)).map_err(corrupt)?;
    let re: Vec<ReExample> = read_jsonl(&dir.join(RE_CORPUS)).map_err(corrupt)?;
    state.union(ner, re);

    if let Some(fp) = &m.ner_fingerprint {
        let model = load_ner(backend, &dir.join(NER_MODEL), models)?;
        check_fingerprint(fp, model.fingerprint(), "NER")?;
        state.ner = Some(model);
    }
    if let Some(fp) = &m.re_fingerprint {
        let model = load_re(backend, &dir.join(RE_MODEL), models)?;
        check_fingerprint(fp, model.fingerprint(), "RE")?;
        state.re = Some(model);
    }
    Ok(state)
}

fn check_fingerprint(expected: &str, got: &str, what: &str) -> Result<()> {
    // plugin handles do not report the fingerprint of a loaded model
    if !got.is_empty() && got != expected {
        return Err(Error::Checkpoint(format!(
            "{what} model does not match the checkpointed corpus"
        )));
    }
    Ok(())
}
