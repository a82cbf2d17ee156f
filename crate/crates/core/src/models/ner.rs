//! Baseline token tagger: per-token logistic regression over window
//! features with greedy BIO-constrained decoding.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{FeatureIndex, Logistic, LogisticConfig};
use super::{corpus_fingerprint, NerModel, SpanPrediction};
use crate::distant::{bio_spans, BioTag, NerExample};
use crate::kg::normalize_token;
use crate::util::write_json_pretty;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NerConfig {
    #[serde(flatten)]
    pub train: LogisticConfig,
    /// Adds a feature marking tokens that appear inside a labelled span
    /// somewhere in the training corpus. Off by default: on distantly
    /// labelled data it reproduces the dictionary and suppresses discovery.
    pub lexicon_feature: bool,
}

/// Feature dropout used when the configuration leaves it unset. Distant
/// labels mark every unmatched mention as O; heavy dropout keeps a few such
/// exposures from flipping a word whose suffix, shape and context all say
/// entity.
pub const DEFAULT_NER_DROPOUT: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineNer {
    config: NerConfig,
    tags: Vec<BioTag>,
    features: FeatureIndex,
    lexicon: BTreeSet<String>,
    model: Logistic,
    fingerprint: String,
}

impl BaselineNer {
    pub fn train(corpus: &[NerExample], config: &NerConfig, seed: u64) -> Result<Self> {
        Self::train_from(corpus, config, seed, None)
    }

    /// Trains with parameters initialized from `init` where features and
    /// tags carry over.
    pub fn train_from(
        corpus: &[NerExample],
        config: &NerConfig,
        seed: u64,
        init: Option<&BaselineNer>,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Precondition("NER training corpus is empty".into()));
        }
        for ex in corpus {
            ex.validate()?;
        }
        let mut tags: BTreeSet<BioTag> = corpus
            .iter()
            .flat_map(|e| e.labels.iter().cloned())
            .collect();
        tags.insert(BioTag::O);
        let tags: Vec<BioTag> = tags.into_iter().collect();

        let lexicon: BTreeSet<String> = if config.lexicon_feature {
            corpus
                .iter()
                .flat_map(|e| {
                    e.tokens
                        .iter()
                        .zip(&e.labels)
                        .filter(|(_, l)| **l != BioTag::O)
                        .map(|(t, _)| normalize_token(t))
                })
                .collect()
        } else {
            BTreeSet::new()
        };

        let per_sentence: Vec<Vec<Vec<String>>> = corpus
            .par_iter()
            .map(|e| sentence_features(&e.tokens, &lexicon))
            .collect();
        let features = FeatureIndex::build(
            per_sentence.iter().flatten().map(Vec::as_slice),
            config.train.min_feature_count,
        );
        let mut data = Vec::new();
        for (ex, feats) in corpus.iter().zip(&per_sentence) {
            for (label, f) in ex.labels.iter().zip(feats) {
                let class = tags.binary_search(label).expect("tag set covers corpus");
                data.push((features.encode(f), class));
            }
        }
        let train = LogisticConfig {
            feature_dropout: Some(config.train.feature_dropout.unwrap_or(DEFAULT_NER_DROPOUT)),
            ..config.train
        };
        let model = match init {
            Some(prev) => {
                let map: Vec<Option<usize>> = tags
                    .iter()
                    .map(|t| prev.tags.binary_search(t).ok())
                    .collect();
                let start = prev.model.transfer(&prev.features, &features, &map);
                Logistic::train_from(start, &data, &train, seed)
            }
            None => Logistic::train(&data, features.len(), tags.len(), &train, seed),
        };
        Ok(BaselineNer {
            config: *config,
            tags,
            features,
            lexicon,
            model,
            fingerprint: corpus_fingerprint(corpus)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Model(format!("{}: not a baseline NER model: {e}", path.display())))
    }

    pub fn tags(&self) -> &[BioTag] {
        &self.tags
    }

    /// Greedy decode: each position takes the most probable tag allowed
    /// after the previous choice. Returns the tags and their probabilities.
    pub fn decode(&self, tokens: &[String]) -> (Vec<BioTag>, Vec<f64>) {
        let feats = sentence_features(tokens, &self.lexicon);
        let mut tags = Vec::with_capacity(tokens.len());
        let mut probs = Vec::with_capacity(tokens.len());
        for f in &feats {
            let p = self.model.predict(&self.features.encode(f));
            let prev = tags.last();
            let mut best: Option<usize> = None;
            for (c, tag) in self.tags.iter().enumerate() {
                if tag.may_follow(prev) && best.is_none_or(|b| p[c] > p[b]) {
                    best = Some(c);
                }
            }
            // O is always allowed, so a choice exists
            let c = best.expect("O is always admissible");
            tags.push(self.tags[c].clone());
            probs.push(p[c]);
        }
        (tags, probs)
    }
}

impl NerModel for BaselineNer {
    fn predict(&self, tokens: &[String]) -> Result<Vec<SpanPrediction>> {
        if tokens.is_empty() {
            return Err(Error::Precondition("cannot tag an empty sentence".into()));
        }
        let (tags, probs) = self.decode(tokens);
        Ok(bio_spans(&tags)
            .into_iter()
            .map(|(start, end, etype)| SpanPrediction {
                start,
                end,
                etype,
                probability: geometric_mean(&probs[start..end]),
            })
            .collect())
    }

    fn predict_batch(&self, batch: &[Vec<String>]) -> Result<Vec<Vec<SpanPrediction>>> {
        batch.par_iter().map(|t| self.predict(t)).collect()
    }

    fn save(&self, path: &Path) -> Result<()> {
        write_json_pretty(path, self)
    }

    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn as_baseline(&self) -> Option<&BaselineNer> {
        Some(self)
    }
}

pub fn geometric_mean(ps: &[f64]) -> f64 {
    if ps.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = ps.iter().map(|p| p.max(f64::MIN_POSITIVE).ln()).sum();
    (log_sum / ps.len() as f64).exp().clamp(0.0, 1.0)
}

fn shape(word: &str) -> String {
    let mut out = String::new();
    for c in word.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}

fn affixes(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    for n in 1..=3.min(chars.len()) {
        out.push(format!("p{n}={}", chars[..n].iter().collect::<String>()));
        out.push(format!(
            "s{n}={}",
            chars[chars.len() - n..].iter().collect::<String>()
        ));
    }
}

/// Window features for every token of a sentence.
pub fn sentence_features(tokens: &[String], lexicon: &BTreeSet<String>) -> Vec<Vec<String>> {
    let lower: Vec<String> = tokens.iter().map(|t| normalize_token(t)).collect();
    let at = |i: isize| -> &str {
        if i < 0 {
            "<s>"
        } else {
            lower.get(i as usize).map_or("</s>", String::as_str)
        }
    };
    let mut out = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        let i = i as isize;
        let mut f = vec![
            "bias".to_string(),
            format!("w={}", at(i)),
            format!("w-1={}", at(i - 1)),
            format!("w+1={}", at(i + 1)),
            format!("w-2={}", at(i - 2)),
            format!("w+2={}", at(i + 2)),
            format!("w-1|w+1={}|{}", at(i - 1), at(i + 1)),
            format!("shape={}", shape(tok)),
        ];
        affixes(at(i), &mut f);
        if lexicon.contains(at(i)) {
            f.push("lex".into());
        }
        out.push(f);
    }
    out
}
