//! Distantly-supervised corpus construction.
//!
//! Each sentence is matched against the coarse KG plus confidently
//! discovered entities. Matches become BIO-labelled NER samples; co-occurring
//! pairs with a known relation (from the KG or confident discovered triples)
//! become positive relation samples, and a controlled share of NULL samples
//! is added from unrelated pairs and out-of-domain words.

mod gazetteer;
mod negatives;
mod ood;
mod samples;

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, SubCorpus};
use crate::discovery::CandidateTriple;
use crate::kg::{EntityId, EntityRef, EntityType, KnowledgeGraph, RelationType, Triple};
use crate::Result;

pub use gazetteer::{entity_matching, Gazetteer, MatchSource, MatchSpan};
pub use negatives::{get_negative_triples, negative_count, NegativeContext};
pub use ood::{OutOfDomainWords, DEFAULT_OOD_SIZE};
pub use samples::{
    bio_spans, build_ner_sample, is_valid_bio, render_template, BioTag, NerExample, Polarity,
    ReExample, ReInput,
};

/// Lookup over confidently discovered triples by ordered entity pair.
#[derive(Debug, Clone, Default)]
pub struct ConfidentTriples {
    pairs: FxHashMap<(EntityRef, EntityRef), BTreeSet<RelationType>>,
    candidate_surfaces: HashSet<String>,
}

impl ConfidentTriples {
    pub fn new<'a>(triples: impl IntoIterator<Item = &'a CandidateTriple>) -> Self {
        let mut out = ConfidentTriples::default();
        for t in triples {
            out.pairs
                .entry((t.head.clone(), t.tail.clone()))
                .or_default()
                .insert(t.rel.clone());
            for r in [&t.head, &t.tail] {
                if let EntityRef::Candidate { surface, .. } = r {
                    out.candidate_surfaces.insert(surface.clone());
                }
            }
        }
        out
    }

    pub fn relations(&self, head: &EntityRef, tail: &EntityRef) -> Option<&BTreeSet<RelationType>> {
        // tuple keys need owned values; pairs are small and lookups rare enough
        self.pairs.get(&(head.clone(), tail.clone()))
    }

    pub fn contains_pair(&self, head: &EntityRef, tail: &EntityRef) -> bool {
        self.relations(head, tail).is_some()
    }

    pub fn candidate_surfaces(&self) -> impl Iterator<Item = &str> {
        self.candidate_surfaces.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pairs.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Knowledge used to label a sentence: the coarse KG, the matcher built
/// from it plus confident entities, and the confident triples.
#[derive(Debug, Clone, Copy)]
pub struct KnowledgeBase<'a> {
    pub kg: &'a KnowledgeGraph,
    pub gazetteer: &'a Gazetteer,
    pub t_conf: &'a ConfidentTriples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOrigin {
    CoarseKg,
    Confident,
}

/// A positive pair: indexes into the sentence's match list plus the relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMatch {
    pub head: usize,
    pub tail: usize,
    pub rel: RelationType,
    pub origin: PairOrigin,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairMatches {
    /// Pairs related in the coarse KG (one entry per stored relation).
    pub known: Vec<PairMatch>,
    /// Pairs related only through confident discovered triples.
    pub confident: Vec<PairMatch>,
}

/// Ordered pairs `(i, j)` of matches referring to different entities. A pair
/// of entities that co-occurs several times is reported once, at its first
/// occurrence.
pub fn ordered_pairs(spans: &[MatchSpan]) -> Vec<(usize, usize)> {
    let refs: Vec<EntityRef> = spans.iter().map(MatchSpan::entity_ref).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in 0..spans.len() {
        for j in 0..spans.len() {
            if i == j || refs[i] == refs[j] {
                continue;
            }
            if seen.insert((&refs[i], &refs[j])) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Applies the distant-supervision assumption to every co-occurring pair.
pub fn entity_pair_matching(
    kg: &KnowledgeGraph,
    t_conf: &ConfidentTriples,
    spans: &[MatchSpan],
) -> PairMatches {
    let mut out = PairMatches::default();
    for (i, j) in ordered_pairs(spans) {
        let (h, t) = (&spans[i], &spans[j]);
        let kg_rels = match (h.source, t.source) {
            (MatchSource::CoarseKg, MatchSource::CoarseKg) => {
                kg.relations_between(h.entity_id.as_str(), t.entity_id.as_str())
            }
            _ => None,
        };
        if let Some(rels) = kg_rels {
            out.known.extend(rels.iter().map(|r| PairMatch {
                head: i,
                tail: j,
                rel: r.clone(),
                origin: PairOrigin::CoarseKg,
            }));
        } else if let Some(rels) = t_conf.relations(&h.entity_ref(), &t.entity_ref()) {
            out.confident.extend(rels.iter().map(|r| PairMatch {
                head: i,
                tail: j,
                rel: r.clone(),
                origin: PairOrigin::Confident,
            }));
        }
    }
    out
}

/// Renders one relation sample for the pair of matches `(head, tail)`.
pub fn pair_input(
    sent: &Sentence,
    spans: &[MatchSpan],
    head: usize,
    tail: usize,
) -> Result<ReInput> {
    let (h, t) = (&spans[head], &spans[tail]);
    ReInput::new(
        sent.id.clone(),
        &sent.span_text(h.start, h.end),
        &h.etype,
        &sent.span_text(t.start, t.end),
        &t.etype,
        &sent.text,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistantConfig {
    pub ratio_n: f64,
    pub ratio_o: f64,
    pub seed: u64,
}

impl Default for DistantConfig {
    fn default() -> Self {
        DistantConfig {
            ratio_n: 0.2,
            ratio_o: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistantCorpus {
    pub ner: Vec<NerExample>,
    pub re: Vec<ReExample>,
    /// Coarse-KG entities matched in the text.
    pub overlap_entities: BTreeSet<EntityId>,
    /// Coarse-KG triples whose pair co-occurs in a sentence.
    pub overlap_triples: BTreeSet<Triple>,
    /// Sentences dropped because a sample could not be built.
    pub skipped: usize,
}

struct SentenceOutput {
    ner: NerExample,
    re: Vec<ReExample>,
    entities: Vec<EntityId>,
    triples: Vec<Triple>,
}

fn label_sentence(
    sent: &Sentence,
    kb: &KnowledgeBase<'_>,
    w_o: &OutOfDomainWords,
    neg: &NegativeContext,
    cfg: &DistantConfig,
) -> Result<SentenceOutput> {
    let spans = entity_matching(sent, kb.gazetteer);
    let ner = build_ner_sample(sent, &spans)?;

    let pairs = entity_pair_matching(kb.kg, kb.t_conf, &spans);
    let mut re = Vec::new();
    for p in pairs.known.iter().chain(&pairs.confident) {
        re.push(ReExample {
            input: pair_input(sent, &spans, p.head, p.tail)?,
            label: p.rel.clone(),
            polarity: Polarity::Positive,
        });
    }
    let negatives = get_negative_triples(
        sent,
        w_o,
        &re,
        &spans,
        kb,
        neg,
        cfg.ratio_n,
        cfg.ratio_o,
        cfg.seed,
    )?;
    re.extend(negatives);

    let entities = spans
        .iter()
        .filter(|s| s.source == MatchSource::CoarseKg)
        .map(|s| s.entity_id.clone())
        .collect();
    let triples = pairs
        .known
        .iter()
        .map(|p| Triple {
            head: spans[p.head].entity_id.clone(),
            rel: p.rel.clone(),
            tail: spans[p.tail].entity_id.clone(),
        })
        .collect();
    Ok(SentenceOutput {
        ner,
        re,
        entities,
        triples,
    })
}

/// Builds the NER and RE corpora for one sub-corpus, along with the overlap
/// entities and triples it evidences.
pub fn build_distant_corpus(
    sub: &SubCorpus,
    kb: &KnowledgeBase<'_>,
    e_conf_surfaces: impl IntoIterator<Item = String>,
    w_o: &OutOfDomainWords,
    cfg: &DistantConfig,
) -> DistantCorpus {
    let neg = NegativeContext::new(kb.kg, kb.t_conf, e_conf_surfaces, w_o);
    let per_sentence: Vec<Result<SentenceOutput>> = sub
        .sentences
        .par_iter()
        .map(|s| label_sentence(s, kb, w_o, &neg, cfg))
        .collect();

    let mut out = DistantCorpus::default();
    for (sent, res) in sub.sentences.iter().zip(per_sentence) {
        match res {
            Ok(o) => {
                out.ner.push(o.ner);
                out.re.extend(o.re);
                out.overlap_entities.extend(o.entities);
                out.overlap_triples.extend(o.triples);
            }
            Err(e) => {
                log::warn!("sentence {} skipped: {e}", sent.id);
                out.skipped += 1;
            }
        }
    }
    out
}

/// All entity types of the KG in sorted order.
pub(crate) fn type_list(kg: &KnowledgeGraph) -> Vec<EntityType> {
    kg.entity_types().iter().cloned().collect()
}

#[cfg(test)]
mod tests;
