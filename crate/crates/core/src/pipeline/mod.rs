//! The iterative adaptation loop.
//!
//! Partition 1 is labelled from the coarse KG alone and trains the first
//! pair of models. Every later training partition is first mined for new
//! entities and triples with the current models, then labelled with the KG
//! plus the confident discoveries; its samples join the cumulative corpora
//! and both models are retrained from scratch. The output graph holds the
//! overlap triples and the confident discovered triples.
//!
//! A run directory looks like:
//!
//! ```text
//! config.json
//! partitions/part_<i>.jsonl
//! corpora/iter_<i>/{ner,re}.jsonl     samples built in iteration i
//! pools/iter_<i>/{entities,triples,e_conf,t_conf}.jsonl
//! models/iter_<i>/{ner,re}.model
//! kg_out/{entities,triples}.tsv
//! reports/{summary,eval_ner,eval_re}.json, reports/{e_conf,t_conf}.jsonl
//! checkpoint/
//! ```

mod state;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    partition, preprocess, read_raw_corpus, write_sentences, PreprocessConfig, Sentence, SubCorpus,
};
use crate::discovery::{get_specific_knowledge, Knowledge, Thresholds};
use crate::distant::{
    build_distant_corpus, ConfidentTriples, DistantConfig, Gazetteer, KnowledgeBase,
    OutOfDomainWords, DEFAULT_OOD_SIZE,
};
use crate::eval::{eval_ner_heldout, eval_re_heldout, EvalReport};
use crate::kg::{build_kg, export_kg, load_kg, KnowledgeGraph};
use crate::models::{train_ner, train_re, Backend, ModelConfig, NerModel, ReModel};
use crate::util::{derive_seed, write_json_pretty, write_jsonl};
use crate::{Error, Result};

pub use state::{
    checkpoint, has_checkpoint, resume, PipelineState, Provenance, CHECKPOINT_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    #[default]
    None,
    /// Each iteration trains on its own partition's samples only.
    NoCumulative,
    /// Label every training partition from the KG alone and train once.
    NoIter,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "no-cumulative" => Ok(Ablation::NoCumulative),
            "no-iter" => Ok(Ablation::NoIter),
            _ => Err(Error::Config(format!(
                "unknown ablation {s:?}, expected none, no-cumulative or no-iter"
            ))),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::None => "none",
            Ablation::NoCumulative => "no-cumulative",
            Ablation::NoIter => "no-iter",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub partitions: usize,
    /// 1-based index of the held-out partition; the last one when unset.
    pub heldout: Option<usize>,
    pub seed: u64,
    pub ratio_n: f64,
    pub ratio_o: f64,
    pub thresholds: Thresholds,
    pub backend: Backend,
    pub ablation: Ablation,
    /// Start each retraining from the previous model instead of from scratch.
    pub warm_start: bool,
    pub preprocess: PreprocessConfig,
    pub ood_size: usize,
    /// Out-of-domain word list, one word per line, used instead of the
    /// corpus-derived one.
    pub ood_file: Option<PathBuf>,
    pub models: ModelConfig,
    /// Also score sampled NULL pairs in the held-out RE evaluation.
    pub eval_include_negatives: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            partitions: 6,
            heldout: None,
            seed: 0,
            ratio_n: 0.2,
            ratio_o: 0.3,
            thresholds: Thresholds::default(),
            backend: Backend::Baseline,
            ablation: Ablation::None,
            warm_start: false,
            preprocess: PreprocessConfig::default(),
            ood_size: DEFAULT_OOD_SIZE,
            ood_file: None,
            models: ModelConfig::default(),
            eval_include_negatives: false,
        }
    }
}

impl RunConfig {
    pub fn heldout_index(&self) -> usize {
        self.heldout.unwrap_or(self.partitions)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.partitions < 2 {
            return fail(format!(
                "need at least 2 partitions, got {}",
                self.partitions
            ));
        }
        let h = self.heldout_index();
        if h == 0 || h > self.partitions {
            return fail(format!(
                "held-out partition {h} is outside 1..={}",
                self.partitions
            ));
        }
        for (name, v) in [("ratio_n", self.ratio_n), ("ratio_o", self.ratio_o)] {
            if !(0.0..1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1), got {v}"));
            }
        }
        let th = &self.thresholds;
        for (name, v) in [("th_pe", th.th_pe), ("th_pt", th.th_pt)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        let pp = &self.preprocess;
        if pp.min_len == 0 || pp.min_len > pp.max_len {
            return fail(format!(
                "invalid length bounds [{}, {}]",
                pp.min_len, pp.max_len
            ));
        }
        if self.warm_start && self.backend != Backend::Baseline {
            return fail("warm start is only supported by the baseline backend".into());
        }
        Ok(())
    }

    pub fn distant(&self) -> DistantConfig {
        DistantConfig {
            ratio_n: self.ratio_n,
            ratio_o: self.ratio_o,
            seed: derive_seed(self.seed, "distant"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Partition number the iteration consumed.
    pub partition: usize,
    pub sentences: usize,
    pub skipped: usize,
    pub new_ner: usize,
    pub new_re: usize,
    pub corpus_ner: usize,
    pub corpus_re: usize,
    pub overlap_entities: usize,
    pub overlap_triples: usize,
    pub entity_pool: usize,
    pub triple_pool: usize,
    pub e_conf: usize,
    pub t_conf: usize,
    pub trained: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Continue from `checkpoint/` if present.
    pub resume: bool,
    /// Stop with [`Error::Interrupted`] once this iteration is checkpointed.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: Vec<IterationStats>,
    pub overlap_entities: usize,
    pub overlap_triples: usize,
    pub e_conf: usize,
    pub t_conf: usize,
    pub new_relation_triples: usize,
    pub new_entity_triples: usize,
    pub kg_entities: usize,
    pub kg_triples: usize,
    pub heldout_partition: usize,
    pub heldout_sentences: usize,
    /// Run-relative directory holding the final models.
    pub final_models: String,
}

pub struct RunOutcome {
    pub kg: KnowledgeGraph,
    pub state: PipelineState,
    pub summary: RunSummary,
    pub eval_ner: Option<EvalReport>,
    pub eval_re: Option<EvalReport>,
}

impl fmt::Debug for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunOutcome")
            .field("summary", &self.summary)
            .finish_non_exhaustive()
    }
}

impl RunOutcome {
    pub fn ner(&self) -> &dyn NerModel {
        self.state
            .ner
            .as_deref()
            .expect("a completed run has models")
    }

    pub fn re(&self) -> &dyn ReModel {
        self.state
            .re
            .as_deref()
            .expect("a completed run has models")
    }
}

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn partition(&self, i: usize) -> PathBuf {
        self.root.join("partitions").join(format!("part_{i}.jsonl"))
    }

    pub fn corpora(&self, i: usize) -> PathBuf {
        self.root.join("corpora").join(format!("iter_{i}"))
    }

    pub fn pools(&self, i: usize) -> PathBuf {
        self.root.join("pools").join(format!("iter_{i}"))
    }

    pub fn models(&self, i: usize) -> PathBuf {
        self.root.join("models").join(format!("iter_{i}"))
    }

    pub fn kg_out(&self) -> PathBuf {
        self.root.join("kg_out")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint")
    }
}

fn kg_digest(kg: &KnowledgeGraph) -> Result<String> {
    let entities: Vec<_> = kg.entities().collect();
    let bytes = serde_json::to_vec(&(entities, kg.triples()))?;
    Ok(state::sha256_hex(&bytes))
}

/// Loads the inputs from disk, preprocesses the corpus and runs.
pub fn run(
    cfg: &RunConfig,
    corpus: &Path,
    kg_entities: &Path,
    kg_triples: &Path,
    out: &Path,
    opts: RunOptions,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let (kg, report) = load_kg(kg_entities, kg_triples)?;
    if report.duplicate_triples > 0 {
        log::info!("{} duplicate KG triples ignored", report.duplicate_triples);
    }
    let raw = read_raw_corpus(corpus)?;
    let sentences = preprocess(raw.iter(), &cfg.preprocess);
    run_sentences(cfg, &kg, &sentences, out, opts)
}

/// Runs on already segmented sentences.
pub fn run_sentences(
    cfg: &RunConfig,
    kg: &KnowledgeGraph,
    sentences: &[Sentence],
    out: &Path,
    opts: RunOptions,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = RunDir::new(out);
    let parts = partition(sentences, cfg.partitions, cfg.seed)?;
    let heldout = cfg.heldout_index();
    let train: Vec<&SubCorpus> = parts.iter().filter(|p| p.index != heldout).collect();

    write_json_pretty(&dir.config(), cfg)?;
    for p in &parts {
        write_sentences(&dir.partition(p.index), &p.sentences)?;
    }
    let provenance = Provenance {
        config: state::sha256_hex(&serde_json::to_vec(cfg)?),
        partitions: state::sha256_hex(&serde_json::to_vec(&parts)?),
        kg: kg_digest(kg)?,
    };

    let mut st = if opts.resume && has_checkpoint(&dir.checkpoint()) {
        let s = resume(&dir.checkpoint(), &provenance, &cfg.backend, &cfg.models)?;
        log::info!("resuming after iteration {}", s.iteration);
        s
    } else {
        PipelineState::default()
    };

    let w_o = match &cfg.ood_file {
        Some(path) => OutOfDomainWords::from_file(path, kg)?,
        None => {
            OutOfDomainWords::from_corpus(train.iter().flat_map(|p| &p.sentences), kg, cfg.ood_size)
        }
    };
    let base = Gazetteer::from_kg(kg);

    for i in st.iteration + 1..=train.len() {
        iteration(
            cfg,
            kg,
            &base,
            &w_o,
            &dir,
            &mut st,
            i,
            train[i - 1],
            i == train.len(),
        )?;
        checkpoint(&st, &provenance, &dir.checkpoint())?;
        if opts.stop_after == Some(i) && i < train.len() {
            return Err(Error::Interrupted(i));
        }
    }
    finish(cfg, kg, &dir, st, &parts[heldout - 1], train.len())
}

#[allow(clippy::too_many_arguments)]
fn iteration(
    cfg: &RunConfig,
    kg: &KnowledgeGraph,
    base: &Gazetteer,
    w_o: &OutOfDomainWords,
    dir: &RunDir,
    st: &mut PipelineState,
    i: usize,
    part: &SubCorpus,
    last: bool,
) -> Result<()> {
    let discovering = i > 1 && cfg.ablation != Ablation::NoIter;
    let knowledge = if discovering {
        let (Some(ner), Some(re)) = (st.ner.as_deref(), st.re.as_deref()) else {
            return Err(Error::Precondition(format!(
                "iteration {i} has no models to discover with"
            )));
        };
        let k = get_specific_knowledge(
            part,
            kg,
            base,
            &mut st.entity_pool,
            &mut st.triple_pool,
            ner,
            re,
            &cfg.thresholds,
            i,
        )?;
        let pools = dir.pools(i);
        st.entity_pool.save(&pools.join("entities.jsonl"))?;
        st.triple_pool.save(&pools.join("triples.jsonl"))?;
        write_jsonl(&pools.join("e_conf.jsonl"), &k.e_conf)?;
        write_jsonl(&pools.join("t_conf.jsonl"), &k.t_conf)?;
        k
    } else {
        Knowledge::default()
    };

    let gazetteer = base.with_discovered(&knowledge.e_conf);
    let t_conf = ConfidentTriples::new(&knowledge.t_conf);
    let kb = KnowledgeBase {
        kg,
        gazetteer: &gazetteer,
        t_conf: &t_conf,
    };
    let corpus = build_distant_corpus(part, &kb, knowledge.e_conf_surfaces(), w_o, &cfg.distant());
    let corpora = dir.corpora(i);
    write_jsonl(&corpora.join("ner.jsonl"), &corpus.ner)?;
    write_jsonl(&corpora.join("re.jsonl"), &corpus.re)?;

    let (new_ner, new_re) = (corpus.ner.len(), corpus.re.len());
    st.e_o.extend(corpus.overlap_entities);
    st.t_o.extend(corpus.overlap_triples);
    if cfg.ablation == Ablation::NoCumulative {
        st.replace(corpus.ner, corpus.re);
    } else {
        st.union(corpus.ner, corpus.re);
    }
    if discovering {
        st.knowledge = knowledge;
    }

    let train_now = cfg.ablation != Ablation::NoIter || last;
    if train_now {
        let ner_seed = derive_seed(cfg.seed, &format!("train:ner:{i}"));
        let re_seed = derive_seed(cfg.seed, &format!("train:re:{i}"));
        let ner = train_ner(
            &cfg.backend,
            &st.corp_n,
            &cfg.models,
            ner_seed,
            warm(cfg, st.ner.as_deref()),
        )?;
        let re = train_re(
            &cfg.backend,
            &st.corp_r,
            &cfg.models,
            re_seed,
            warm(cfg, st.re.as_deref()),
        )?;
        let models = dir.models(i);
        ner.save(&models.join("ner.model"))?;
        re.save(&models.join("re.model"))?;
        st.ner = Some(ner);
        st.re = Some(re);
    }

    st.iteration = i;
    st.stats.push(IterationStats {
        iteration: i,
        partition: part.index,
        sentences: part.len(),
        skipped: corpus.skipped,
        new_ner,
        new_re,
        corpus_ner: st.corp_n.len(),
        corpus_re: st.corp_r.len(),
        overlap_entities: st.e_o.len(),
        overlap_triples: st.t_o.len(),
        entity_pool: st.entity_pool.len(),
        triple_pool: st.triple_pool.len(),
        e_conf: st.knowledge.e_conf.len(),
        t_conf: st.knowledge.t_conf.len(),
        trained: train_now,
    });
    log::info!(
        "iteration {i}: partition {} corp_N={} corp_R={} E_conf={} T_conf={}",
        part.index,
        st.corp_n.len(),
        st.corp_r.len(),
        st.knowledge.e_conf.len(),
        st.knowledge.t_conf.len()
    );
    Ok(())
}

fn warm<'a, M: ?Sized>(cfg: &RunConfig, prev: Option<&'a M>) -> Option<&'a M> {
    if cfg.warm_start {
        prev
    } else {
        None
    }
}

fn finish(
    cfg: &RunConfig,
    kg: &KnowledgeGraph,
    dir: &RunDir,
    st: PipelineState,
    heldout: &SubCorpus,
    iterations: usize,
) -> Result<RunOutcome> {
    let kf = build_kg(&st.t_o, &st.knowledge.t_conf, kg)?;
    export_kg(&kf, &dir.kg_out())?;

    let reports = dir.reports();
    write_jsonl(&reports.join("e_conf.jsonl"), &st.knowledge.e_conf)?;
    write_jsonl(&reports.join("t_conf.jsonl"), &st.knowledge.t_conf)?;

    let (ner, re) = match (st.ner.as_deref(), st.re.as_deref()) {
        (Some(n), Some(r)) => (n, r),
        _ => {
            return Err(Error::Precondition(
                "run finished without trained models".into(),
            ))
        }
    };
    let (eval_ner, eval_re) = if heldout.is_empty() {
        (None, None)
    } else {
        let negatives = cfg.eval_include_negatives.then(|| cfg.distant());
        let n = eval_ner_heldout(ner, heldout, kg)?;
        let r = eval_re_heldout(re, heldout, kg, negatives.as_ref())?;
        write_json_pretty(&reports.join("eval_ner.json"), &n)?;
        write_json_pretty(&reports.join("eval_re.json"), &r)?;
        (Some(n), Some(r))
    };

    let categories: BTreeSet<_> = st
        .knowledge
        .t_conf
        .iter()
        .map(|t| (t.category, t.key()))
        .collect();
    let count = |c| categories.iter().filter(|(cat, _)| *cat == c).count();
    let summary = RunSummary {
        iterations: st.stats.clone(),
        overlap_entities: st.e_o.len(),
        overlap_triples: st.t_o.len(),
        e_conf: st.knowledge.e_conf.len(),
        t_conf: st.knowledge.t_conf.len(),
        new_relation_triples: count(crate::discovery::TripleCategory::NewRelation),
        new_entity_triples: count(crate::discovery::TripleCategory::NewEntity),
        kg_entities: kf.entity_count(),
        kg_triples: kf.triple_count(),
        heldout_partition: heldout.index,
        heldout_sentences: heldout.len(),
        final_models: format!("models/iter_{iterations}"),
    };
    write_json_pretty(&reports.join("summary.json"), &summary)?;
    Ok(RunOutcome {
        kg: kf,
        state: st,
        summary,
        eval_ner,
        eval_re,
    })
}
