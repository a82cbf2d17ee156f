//! Discovery of fine-domain entities and triples on a new sub-corpus.
//!
//! Predictions that are not already coarse-domain knowledge are merged into
//! candidate pools keyed by normalized surface and type (entities) or by
//! `(head, relation, tail)` (triples). A pool entry keeps its highest
//! probability and the number of times it was observed. The confident sets
//! are recomputed from the pools with strict thresholds on both.

mod pool;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, SubCorpus};
use crate::distant::{ordered_pairs, pair_input, Gazetteer, MatchSpan, ReInput};
use crate::kg::{join_normalized, EntityRef, EntityType, KnowledgeGraph, RelationType};
use crate::models::{NerModel, ReModel, SpanPrediction};
use crate::Result;

pub use pool::{EntityPool, TriplePool};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntity {
    /// Normalized surface form.
    pub surface: String,
    #[serde(rename = "type")]
    pub etype: EntityType,
    #[serde(rename = "p_max")]
    pub max_probability: f64,
    #[serde(rename = "freq")]
    pub cumulative_frequency: u64,
    pub first_seen: usize,
    pub last_seen: usize,
}

impl CandidateEntity {
    pub fn new(
        surface: impl Into<String>,
        etype: EntityType,
        probability: f64,
        frequency: u64,
    ) -> Self {
        CandidateEntity {
            surface: surface.into(),
            etype,
            max_probability: probability,
            cumulative_frequency: frequency,
            first_seen: 0,
            last_seen: 0,
        }
    }

    pub fn key(&self) -> (&str, &EntityType) {
        (&self.surface, &self.etype)
    }

    pub fn entity_ref(&self) -> EntityRef {
        EntityRef::Candidate {
            surface: self.surface.clone(),
            etype: self.etype.clone(),
        }
    }
}

/// New-relation triples connect two coarse-KG entities; new-entity triples
/// involve at least one discovered entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TripleCategory {
    #[serde(rename = "T_R")]
    NewRelation,
    #[serde(rename = "T_E")]
    NewEntity,
}

impl TripleCategory {
    pub fn of(head: &EntityRef, tail: &EntityRef) -> Self {
        if head.is_candidate() || tail.is_candidate() {
            TripleCategory::NewEntity
        } else {
            TripleCategory::NewRelation
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TripleCategory::NewRelation => "T_R",
            TripleCategory::NewEntity => "T_E",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTriple {
    pub head: EntityRef,
    pub rel: RelationType,
    pub tail: EntityRef,
    #[serde(rename = "cat")]
    pub category: TripleCategory,
    #[serde(rename = "p_max")]
    pub max_probability: f64,
    #[serde(rename = "freq")]
    pub cumulative_frequency: u64,
    pub first_seen: usize,
    pub last_seen: usize,
}

impl CandidateTriple {
    pub fn key(&self) -> (&EntityRef, &RelationType, &EntityRef) {
        (&self.head, &self.rel, &self.tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub th_pe: f64,
    pub th_fe: u64,
    pub th_pt: f64,
    pub th_ft: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            th_pe: 0.95,
            th_fe: 2,
            th_pt: 0.97,
            th_ft: 3,
        }
    }
}

/// One predicted mention of an entity absent from the coarse KG.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityObservation {
    pub surface: String,
    pub etype: EntityType,
    pub probability: f64,
}

/// One non-NULL relation prediction for a new pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleObservation {
    pub head: EntityRef,
    pub rel: RelationType,
    pub tail: EntityRef,
    pub probability: f64,
}

/// Predicted spans whose normalized surface is not in the KG.
///
/// Surfaces containing `|` are skipped since the graph's TSV format uses it
/// as the surface separator.
pub fn get_new_entities(
    sent: &Sentence,
    preds: &[SpanPrediction],
    kg: &KnowledgeGraph,
) -> Vec<EntityObservation> {
    let tokens = sent.token_texts();
    preds
        .iter()
        .filter(|p| p.start < p.end && p.end <= tokens.len())
        .filter_map(|p| {
            let surface = join_normalized(&tokens[p.start..p.end]);
            (!surface.is_empty() && !surface.contains('|') && !kg.has_surface(&surface)).then(
                || EntityObservation {
                    surface,
                    etype: p.etype.clone(),
                    probability: p.probability,
                },
            )
        })
        .collect()
}

pub fn merge_entity(
    pool: &mut EntityPool,
    observed: impl IntoIterator<Item = EntityObservation>,
    iteration: usize,
) {
    for o in observed {
        pool.observe(o, iteration);
    }
}

/// Entities with `max_probability > th_pe` and `cumulative_frequency > th_fe`.
pub fn get_confidence_entity(pool: &EntityPool, th_pe: f64, th_fe: u64) -> Vec<CandidateEntity> {
    pool.iter()
        .filter(|c| c.max_probability > th_pe && c.cumulative_frequency > th_fe)
        .cloned()
        .collect()
}

/// A candidate pair for relation prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct NewPair {
    pub head: EntityRef,
    pub tail: EntityRef,
    pub category: TripleCategory,
    pub input: ReInput,
}

/// Ordered pairs of matched entities in `sent`, excluding pairs that are
/// already related in the KG. `gazetteer` covers the KG and E_conf.
pub fn enumerate_new_pairs(
    sent: &Sentence,
    kg: &KnowledgeGraph,
    gazetteer: &Gazetteer,
) -> Result<Vec<NewPair>> {
    let spans = crate::distant::entity_matching(sent, gazetteer);
    new_pairs_from_spans(sent, kg, &spans)
}

fn new_pairs_from_spans(
    sent: &Sentence,
    kg: &KnowledgeGraph,
    spans: &[MatchSpan],
) -> Result<Vec<NewPair>> {
    let mut out = Vec::new();
    for (i, j) in ordered_pairs(spans) {
        let head = spans[i].entity_ref();
        let tail = spans[j].entity_ref();
        if let (EntityRef::Known(h), EntityRef::Known(t)) = (&head, &tail) {
            if kg.is_related(h.as_str(), t.as_str()) {
                continue;
            }
        }
        out.push(NewPair {
            category: TripleCategory::of(&head, &tail),
            input: pair_input(sent, spans, i, j)?,
            head,
            tail,
        });
    }
    Ok(out)
}

/// Relation predictions for every new pair of the sub-corpus, NULL ones dropped.
pub fn predict_new_triples(
    sub: &SubCorpus,
    kg: &KnowledgeGraph,
    gazetteer: &Gazetteer,
    model_r: &dyn ReModel,
) -> Result<Vec<TripleObservation>> {
    let per_sentence: Vec<Vec<NewPair>> = sub
        .sentences
        .par_iter()
        .map(|s| enumerate_new_pairs(s, kg, gazetteer))
        .collect::<Result<_>>()?;
    let pairs: Vec<NewPair> = per_sentence.into_iter().flatten().collect();
    let inputs: Vec<ReInput> = pairs.iter().map(|p| p.input.clone()).collect();
    let preds = model_r.predict_batch(&inputs)?;
    Ok(pairs
        .into_iter()
        .zip(preds)
        .filter(|(_, p)| !p.relation.is_null())
        .map(|(pair, p)| TripleObservation {
            head: pair.head,
            rel: p.relation,
            tail: pair.tail,
            probability: p.probability,
        })
        .collect())
}

/// Predicts relations for new pairs and merges non-NULL results into `pool`.
pub fn harvest_triples(
    sub: &SubCorpus,
    kg: &KnowledgeGraph,
    gazetteer: &Gazetteer,
    model_r: &dyn ReModel,
    pool: &mut TriplePool,
    iteration: usize,
) -> Result<()> {
    for o in predict_new_triples(sub, kg, gazetteer, model_r)? {
        pool.observe(o, iteration);
    }
    Ok(())
}

/// Triples with `max_probability > th_pt` and `cumulative_frequency > th_ft`.
pub fn get_confidence_triple(pool: &TriplePool, th_pt: f64, th_ft: u64) -> Vec<CandidateTriple> {
    pool.iter()
        .filter(|c| c.max_probability > th_pt && c.cumulative_frequency > th_ft)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Knowledge {
    pub e_conf: Vec<CandidateEntity>,
    pub t_conf: Vec<CandidateTriple>,
}

impl Knowledge {
    pub fn e_conf_surfaces(&self) -> BTreeSet<String> {
        self.e_conf.iter().map(|c| c.surface.clone()).collect()
    }
}

/// One discovery round on sub-corpus `sub`: the entity pass updates the
/// entity pool and E_conf, then the triple pass matches against the KG plus
/// the refreshed E_conf and updates the triple pool and T_conf.
#[allow(clippy::too_many_arguments)]
pub fn get_specific_knowledge(
    sub: &SubCorpus,
    kg: &KnowledgeGraph,
    base: &Gazetteer,
    entities: &mut EntityPool,
    triples: &mut TriplePool,
    model_n: &dyn NerModel,
    model_r: &dyn ReModel,
    th: &Thresholds,
    iteration: usize,
) -> Result<Knowledge> {
    let batch: Vec<Vec<String>> = sub
        .sentences
        .iter()
        .map(|s| s.tokens.iter().map(|t| t.text.clone()).collect())
        .collect();
    let preds = model_n.predict_batch(&batch)?;
    for (sent, p) in sub.sentences.iter().zip(&preds) {
        merge_entity(entities, get_new_entities(sent, p, kg), iteration);
    }
    let e_conf = get_confidence_entity(entities, th.th_pe, th.th_fe);

    let gazetteer = base.with_discovered(&e_conf);
    harvest_triples(sub, kg, &gazetteer, model_r, triples, iteration)?;
    let t_conf = get_confidence_triple(triples, th.th_pt, th.th_ft);
    Ok(Knowledge { e_conf, t_conf })
}
