//! Held-out scoring against distant labels, and manual-evaluation sampling.
//!
//! NER is scored by exact `(start, end, type)` span match, micro-averaged.
//! RE is scored on entity pairs related in the KG; per-class scores are
//! combined by support-weighted averaging. A prediction on a pair with
//! several stored relations is correct if it matches any of them.

mod manual;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::SubCorpus;
use crate::distant::{
    build_distant_corpus, entity_matching, ordered_pairs, pair_input, ConfidentTriples,
    DistantConfig, Gazetteer, KnowledgeBase, MatchSource, OutOfDomainWords, DEFAULT_OOD_SIZE,
};
use crate::kg::{EntityType, KnowledgeGraph, RelationType};
use crate::models::{NerModel, ReModel};
use crate::Result;

pub use manual::{
    import_manual, sample_for_manual, CategoryPrecision, ManualCategory, ManualReport, ManualRow,
    SampleSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Ner,
    Re,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    MicroSpan,
    Weighted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Counts {
    /// Precision, recall and F1; a ratio with an empty denominator is 0.
    pub fn scores(&self) -> Scores {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Scores {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    #[serde(flatten)]
    pub counts: Counts,
    pub support: usize,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub averaging: Averaging,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold items.
    pub support: usize,
    /// Set when there was nothing to score; the metrics are then 1.0 by
    /// convention.
    pub zero_support: bool,
    pub per_class: BTreeMap<String, ClassReport>,
}

pub type Span = (usize, usize, EntityType);

/// Micro-averaged exact span match over sentences. `gold[i]` and `pred[i]`
/// belong to the same sentence.
pub fn score_ner(gold: &[Vec<Span>], pred: &[Vec<Span>]) -> EvalReport {
    assert_eq!(gold.len(), pred.len(), "gold and predictions must align");
    let mut total = Counts::default();
    let mut per_type: BTreeMap<String, (Counts, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        let g: BTreeSet<&Span> = g.iter().collect();
        let p: BTreeSet<&Span> = p.iter().collect();
        for s in &g {
            let e = per_type.entry(s.2.as_str().to_string()).or_default();
            e.1 += 1;
            if p.contains(s) {
                e.0.tp += 1;
                total.tp += 1;
            } else {
                e.0.fn_ += 1;
                total.fn_ += 1;
            }
        }
        for s in p.difference(&g) {
            per_type.entry(s.2.as_str().to_string()).or_default().0.fp += 1;
            total.fp += 1;
        }
    }
    let support = total.tp + total.fn_;
    let zero = support == 0 && total.fp == 0;
    let s = if zero {
        Scores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        }
    } else {
        total.scores()
    };
    EvalReport {
        task: Task::Ner,
        averaging: Averaging::MicroSpan,
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        support,
        zero_support: zero,
        per_class: per_type
            .into_iter()
            .map(|(k, (c, support))| {
                (
                    k,
                    ClassReport {
                        counts: c,
                        support,
                        scores: c.scores(),
                    },
                )
            })
            .collect(),
    }
}

/// One RE evaluation instance: the acceptable gold labels and the prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReCase {
    pub gold: BTreeSet<RelationType>,
    pub predicted: RelationType,
}

/// Support-weighted per-class precision, recall and F1.
///
/// An instance whose prediction is among its gold labels counts for that
/// label; otherwise its gold class is the smallest gold label.
pub fn score_re(cases: &[ReCase]) -> EvalReport {
    let mut per: BTreeMap<String, (Counts, usize)> = BTreeMap::new();
    for c in cases {
        let gold = if c.gold.contains(&c.predicted) {
            c.predicted.clone()
        } else {
            c.gold.iter().next().expect("non-empty gold").clone()
        };
        per.entry(gold.as_str().to_string()).or_default().1 += 1;
        if gold == c.predicted {
            per.get_mut(gold.as_str()).unwrap().0.tp += 1;
        } else {
            per.get_mut(gold.as_str()).unwrap().0.fn_ += 1;
            per.entry(c.predicted.as_str().to_string())
                .or_default()
                .0
                .fp += 1;
        }
    }
    let support: usize = per.values().map(|(_, s)| *s).sum();
    let per_class: BTreeMap<String, ClassReport> = per
        .into_iter()
        .map(|(k, (c, support))| {
            (
                k,
                ClassReport {
                    counts: c,
                    support,
                    scores: c.scores(),
                },
            )
        })
        .collect();
    let (precision, recall, f1) = if support == 0 {
        (1.0, 1.0, 1.0)
    } else {
        let w = |f: fn(&Scores) -> f64| {
            per_class
                .values()
                .map(|c| c.support as f64 * f(&c.scores))
                .sum::<f64>()
                / support as f64
        };
        (w(|s| s.precision), w(|s| s.recall), w(|s| s.f1))
    };
    EvalReport {
        task: Task::Re,
        averaging: Averaging::Weighted,
        precision,
        recall,
        f1,
        support,
        zero_support: support == 0,
        per_class,
    }
}

/// Scores NER predictions against dictionary matches on the KG alone.
pub fn eval_ner_heldout(
    model: &dyn NerModel,
    heldout: &SubCorpus,
    kg: &KnowledgeGraph,
) -> Result<EvalReport> {
    let gaz = Gazetteer::from_kg(kg);
    let gold: Vec<Vec<Span>> = heldout
        .sentences
        .iter()
        .map(|s| {
            entity_matching(s, &gaz)
                .into_iter()
                .map(|m| (m.start, m.end, m.etype))
                .collect()
        })
        .collect();
    let batch: Vec<Vec<String>> = heldout
        .sentences
        .iter()
        .map(|s| s.tokens.iter().map(|t| t.text.clone()).collect())
        .collect();
    let pred: Vec<Vec<Span>> = model
        .predict_batch(&batch)?
        .into_iter()
        .map(|v| v.into_iter().map(|p| (p.start, p.end, p.etype)).collect())
        .collect();
    Ok(score_ner(&gold, &pred))
}

/// Scores relation predictions on held-out pairs that are related in the
/// KG. With `negatives`, sampled NULL pairs (built with that distant
/// configuration) are scored as well.
pub fn eval_re_heldout(
    model: &dyn ReModel,
    heldout: &SubCorpus,
    kg: &KnowledgeGraph,
    negatives: Option<&DistantConfig>,
) -> Result<EvalReport> {
    let gaz = Gazetteer::from_kg(kg);
    let mut inputs = Vec::new();
    let mut golds = Vec::new();
    for s in &heldout.sentences {
        let spans = entity_matching(s, &gaz);
        for (i, j) in ordered_pairs(&spans) {
            debug_assert!(spans[i].source == MatchSource::CoarseKg);
            if let Some(rels) =
                kg.relations_between(spans[i].entity_id.as_str(), spans[j].entity_id.as_str())
            {
                inputs.push(pair_input(s, &spans, i, j)?);
                golds.push(rels.clone());
            }
        }
    }
    if let Some(cfg) = negatives {
        let t_conf = ConfidentTriples::default();
        let kb = KnowledgeBase {
            kg,
            gazetteer: &gaz,
            t_conf: &t_conf,
        };
        let w_o = OutOfDomainWords::from_corpus(&heldout.sentences, kg, DEFAULT_OOD_SIZE);
        let corpus = build_distant_corpus(heldout, &kb, Vec::new(), &w_o, cfg);
        for ex in corpus.re.into_iter().filter(|e| e.label.is_null()) {
            inputs.push(ex.input);
            golds.push(BTreeSet::from([RelationType::null()]));
        }
    }
    let preds = model.predict_batch(&inputs)?;
    let cases: Vec<ReCase> = golds
        .into_iter()
        .zip(preds)
        .map(|(gold, p)| ReCase {
            gold,
            predicted: p.relation,
        })
        .collect();
    Ok(score_re(&cases))
}
