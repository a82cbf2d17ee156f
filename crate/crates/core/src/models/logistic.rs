//! Multinomial logistic regression over sparse binary features.
//!
//! Trained with plain SGD on the cross-entropy loss. L2 shrinkage uses a
//! global scale factor so each step only touches the active features.

use rand::seq::SliceRandom;
use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Features seen fewer times than this in training are dropped.
    pub min_feature_count: usize,
    /// Probability of masking each active feature in a training step.
    /// Acts as a regularizer that penalizes rare features more than common
    /// ones. Unset means the model's own default; zero disables it.
    pub feature_dropout: Option<f64>,
    /// Lower bound on SGD steps; small corpora get more epochs to reach it.
    pub min_updates: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-4,
            min_feature_count: 1,
            feature_dropout: None,
            min_updates: 200,
        }
    }
}

/// Feature name to dense id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureIndex {
    names: Vec<String>,
    ids: FxHashMap<String, u32>,
}

impl From<Vec<String>> for FeatureIndex {
    fn from(names: Vec<String>) -> Self {
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        FeatureIndex { names, ids }
    }
}

impl From<FeatureIndex> for Vec<String> {
    fn from(f: FeatureIndex) -> Self {
        f.names
    }
}

impl FeatureIndex {
    /// Indexes every feature occurring at least `min_count` times, in
    /// first-seen order.
    pub fn build<'a>(
        feature_sets: impl IntoIterator<Item = &'a [String]>,
        min_count: usize,
    ) -> Self {
        let mut counts: FxHashMap<&str, usize> = FxHashMap::default();
        let mut order = Vec::new();
        for set in feature_sets {
            for f in set {
                let c = counts.entry(f.as_str()).or_insert_with(|| {
                    order.push(f.as_str());
                    0
                });
                *c += 1;
            }
        }
        let names: Vec<String> = order
            .into_iter()
            .filter(|f| counts[f] >= min_count.max(1))
            .map(str::to_string)
            .collect();
        names.into()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Ids of the known features; unknown ones are ignored.
    pub fn encode(&self, features: &[String]) -> Vec<u32> {
        let mut ids: Vec<u32> = features
            .iter()
            .filter_map(|f| self.ids.get(f).copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    classes: usize,
    /// Row-major `[feature][class]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Logistic {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn train(
        examples: &[(Vec<u32>, usize)],
        n_features: usize,
        classes: usize,
        cfg: &LogisticConfig,
        seed: u64,
    ) -> Self {
        let zero = Logistic {
            classes,
            weights: vec![0.0; n_features * classes],
            bias: vec![0.0; classes],
        };
        Self::train_from(zero, examples, cfg, seed)
    }

    /// Continues training from `init`, whose shape fixes the feature and
    /// class counts.
    pub fn train_from(
        init: Logistic,
        examples: &[(Vec<u32>, usize)],
        cfg: &LogisticConfig,
        seed: u64,
    ) -> Self {
        let Logistic {
            classes,
            mut weights,
            mut bias,
        } = init;
        let mut scale = 1.0f64;
        let lr = cfg.learning_rate;
        let shrink = 1.0 - lr * cfg.l2;
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut probs = vec![0.0; classes];
        let dropout = cfg.feature_dropout.unwrap_or(0.0).clamp(0.0, 0.99);
        let mut kept: Vec<u32> = Vec::new();
        // tiny corpora get extra passes so dropout noise averages out
        let epochs = if examples.is_empty() || cfg.epochs == 0 {
            cfg.epochs
        } else {
            cfg.epochs.max(cfg.min_updates.div_ceil(examples.len()))
        };

        for epoch in 0..epochs {
            let mut rng = rng_for(seed, &format!("epoch:{epoch}"));
            order.shuffle(&mut rng);
            for &idx in &order {
                let (all, gold) = &examples[idx];
                // inverted dropout: kept features are scaled up so the
                // expected score matches prediction time
                let boost = if dropout > 0.0 {
                    kept.clear();
                    kept.extend(all.iter().copied().filter(|_| rng.gen::<f64>() >= dropout));
                    1.0 / (1.0 - dropout)
                } else {
                    1.0
                };
                let feats: &[u32] = if dropout > 0.0 { &kept } else { all };
                score_into(&weights, &bias, scale * boost, classes, feats, &mut probs);
                softmax(&mut probs);
                probs[*gold] -= 1.0;

                if cfg.l2 > 0.0 {
                    scale *= shrink;
                }
                let step = lr * boost / scale;
                for &f in feats {
                    let row = &mut weights[f as usize * classes..(f as usize + 1) * classes];
                    for (w, g) in row.iter_mut().zip(&probs) {
                        *w -= step * g;
                    }
                }
                for (b, g) in bias.iter_mut().zip(&probs) {
                    *b -= lr * g;
                }
                if scale < 1e-6 {
                    weights.iter_mut().for_each(|w| *w *= scale);
                    scale = 1.0;
                }
            }
        }
        weights.iter_mut().for_each(|w| *w *= scale);
        Logistic {
            classes,
            weights,
            bias,
        }
    }

    /// Re-indexes the parameters onto a new feature index and class list.
    /// `class_map[new]` names the old class to copy from; anything without a
    /// counterpart starts at zero.
    pub fn transfer(
        &self,
        from: &FeatureIndex,
        to: &FeatureIndex,
        class_map: &[Option<usize>],
    ) -> Logistic {
        let classes = class_map.len();
        let mut weights = vec![0.0; to.len() * classes];
        for (new_f, name) in to.names().iter().enumerate() {
            let Some(old_f) = from.id(name) else { continue };
            for (new_c, old_c) in class_map.iter().enumerate() {
                if let Some(old_c) = old_c {
                    weights[new_f * classes + new_c] =
                        self.weights[old_f as usize * self.classes + old_c];
                }
            }
        }
        let bias = class_map
            .iter()
            .map(|c| c.map_or(0.0, |c| self.bias[c]))
            .collect();
        Logistic {
            classes,
            weights,
            bias,
        }
    }

    /// Class probabilities for an encoded feature set.
    pub fn predict(&self, feats: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.classes];
        score_into(
            &self.weights,
            &self.bias,
            1.0,
            self.classes,
            feats,
            &mut out,
        );
        softmax(&mut out);
        out
    }
}

fn score_into(
    weights: &[f64],
    bias: &[f64],
    scale: f64,
    classes: usize,
    feats: &[u32],
    out: &mut [f64],
) {
    out.fill(0.0);
    for &f in feats {
        let row = &weights[f as usize * classes..(f as usize + 1) * classes];
        for (o, w) in out.iter_mut().zip(row) {
            *o += w;
        }
    }
    for (o, b) in out.iter_mut().zip(bias) {
        *o = *o * scale + b;
    }
}

fn softmax(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
