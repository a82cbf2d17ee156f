//! Baseline relation classifier: logistic regression over a segment-aware
//! bag of words of the rendered template plus type and position features.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{argmax, FeatureIndex, Logistic, LogisticConfig};
use super::{corpus_fingerprint, ReModel, RelationPrediction};
use crate::corpus::token_strings;
use crate::distant::{ReExample, ReInput};
use crate::kg::{normalize_token, RelationType};
use crate::util::write_json_pretty;
use crate::{Error, Result};

/// Between-entity context longer than this is not featurized.
const MAX_GAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRe {
    config: LogisticConfig,
    classes: Vec<RelationType>,
    features: FeatureIndex,
    model: Logistic,
    fingerprint: String,
}

impl BaselineRe {
    pub fn train(corpus: &[ReExample], config: &LogisticConfig, seed: u64) -> Result<Self> {
        Self::train_from(corpus, config, seed, None)
    }

    /// Trains with parameters initialized from `init` where features and
    /// classes carry over.
    pub fn train_from(
        corpus: &[ReExample],
        config: &LogisticConfig,
        seed: u64,
        init: Option<&BaselineRe>,
    ) -> Result<Self> {
        let classes: Vec<RelationType> = corpus
            .iter()
            .map(|e| e.label.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if classes.len() < 2 {
            return Err(Error::Precondition(format!(
                "RE training needs at least two distinct labels, corpus has {}",
                classes.len()
            )));
        }
        let feats: Vec<Vec<String>> = corpus.par_iter().map(|e| re_features(&e.input)).collect();
        let features =
            FeatureIndex::build(feats.iter().map(Vec::as_slice), config.min_feature_count);
        let data: Vec<(Vec<u32>, usize)> = corpus
            .iter()
            .zip(&feats)
            .map(|(e, f)| {
                (
                    features.encode(f),
                    classes.binary_search(&e.label).expect("class present"),
                )
            })
            .collect();
        let model = match init {
            Some(prev) => {
                let map: Vec<Option<usize>> = classes
                    .iter()
                    .map(|c| prev.classes.binary_search(c).ok())
                    .collect();
                Logistic::train_from(
                    prev.model.transfer(&prev.features, &features, &map),
                    &data,
                    config,
                    seed,
                )
            }
            None => Logistic::train(&data, features.len(), classes.len(), config, seed),
        };
        Ok(BaselineRe {
            config: *config,
            classes,
            features,
            model,
            fingerprint: corpus_fingerprint(corpus)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Model(format!("{}: not a baseline RE model: {e}", path.display())))
    }

    pub fn classes(&self) -> &[RelationType] {
        &self.classes
    }
}

impl ReModel for BaselineRe {
    fn predict(&self, input: &ReInput) -> Result<RelationPrediction> {
        let p = self
            .model
            .predict(&self.features.encode(&re_features(input)));
        let best = argmax(&p);
        Ok(RelationPrediction {
            relation: self.classes[best].clone(),
            probability: p[best],
            distribution: Some(
                self.classes
                    .iter()
                    .zip(&p)
                    .map(|(c, p)| (c.as_str().to_string(), *p))
                    .collect::<BTreeMap<_, _>>(),
            ),
        })
    }

    fn predict_batch(&self, batch: &[ReInput]) -> Result<Vec<RelationPrediction>> {
        batch.par_iter().map(|i| self.predict(i)).collect()
    }

    fn save(&self, path: &Path) -> Result<()> {
        write_json_pretty(path, self)
    }

    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn as_baseline(&self) -> Option<&BaselineRe> {
        Some(self)
    }
}

fn lower_tokens(text: &str) -> Vec<String> {
    token_strings(text)
        .iter()
        .map(|t| normalize_token(t))
        .collect()
}

fn find(hay: &[String], needle: &[String], from: usize) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

/// Features of one relation query. Template markers are not featurized;
/// the three template segments get distinct prefixes.
pub fn re_features(input: &ReInput) -> Vec<String> {
    let head = lower_tokens(&input.head);
    let tail = lower_tokens(&input.tail);
    let sent = lower_tokens(input.sentence());
    let (ht, tt) = (input.head_type.label_slug(), input.tail_type.label_slug());

    let mut f = vec![
        "bias".to_string(),
        format!("ht={ht}"),
        format!("tt={tt}"),
        format!("tp={ht}|{tt}"),
    ];
    f.extend(head.iter().map(|w| format!("h={w}")));
    f.extend(tail.iter().map(|w| format!("t={w}")));
    f.extend(sent.iter().map(|w| format!("s={w}")));

    let hpos = find(&sent, &head, 0);
    let tpos = hpos.and_then(|h| {
        // prefer a tail occurrence that does not overlap the head
        find(&sent, &tail, 0)
            .filter(|&t| t + tail.len() <= h || t >= h + head.len())
            .or_else(|| find(&sent, &tail, h + head.len()))
    });
    match (hpos, tpos) {
        (Some(h), Some(t)) => {
            let (order, lo, hi) = if h < t {
                ("ht", h + head.len(), t)
            } else {
                ("th", t + tail.len(), h)
            };
            f.push(format!("o={order}"));
            f.push(format!("tpo={ht}|{tt}|{order}"));
            if hi >= lo && hi - lo <= MAX_GAP {
                f.push(format!("gap={}", hi - lo));
                for w in &sent[lo..hi] {
                    f.push(format!("b={w}"));
                    f.push(format!("bo={order}|{w}"));
                }
            }
        }
        _ => f.push("o=?".into()),
    }
    f.sort_unstable();
    f.dedup();
    f
}
