//! Fixtures shared by unit tests.

use std::collections::HashMap;
use std::path::Path;

use crate::corpus::{Sentence, SubCorpus};
use crate::distant::ReInput;
use crate::kg::{
    EntityId, EntityRecord, EntityType, KnowledgeGraph, Provenance, RelationType, Triple,
};
use crate::models::{NerModel, ReModel, RelationPrediction, SpanPrediction};
use crate::Result;

pub fn record(id: &str, etype: &str, surfaces: &[&str]) -> EntityRecord {
    EntityRecord {
        id: EntityId::new(id),
        canonical: surfaces[0].to_string(),
        surfaces: surfaces.iter().map(|s| s.to_string()).collect(),
        etype: EntityType::new(etype),
        provenance: Provenance::Source,
    }
}

pub fn kg(entities: &[(&str, &str, &[&str])], triples: &[(&str, &str, &str)]) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    for (id, t, s) in entities {
        g.add_entity(record(id, t, s)).unwrap();
    }
    for (h, r, t) in triples {
        g.add_triple(Triple::new(*h, *r, *t)).unwrap();
    }
    g
}

pub fn sub(index: usize, texts: &[&str]) -> SubCorpus {
    SubCorpus {
        index,
        sentences: texts
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(format!("d{index}:{i}"), *t).unwrap())
            .collect(),
    }
}

/// NER stub answering from a table keyed by the space-joined tokens.
#[derive(Default)]
pub struct TableNer {
    pub answers: HashMap<String, Vec<SpanPrediction>>,
}

impl TableNer {
    pub fn with(mut self, sentence: &str, spans: &[(usize, usize, &str, f64)]) -> Self {
        self.answers.insert(
            sentence.to_string(),
            spans
                .iter()
                .map(|(s, e, t, p)| SpanPrediction {
                    start: *s,
                    end: *e,
                    etype: EntityType::new(*t),
                    probability: *p,
                })
                .collect(),
        );
        self
    }
}

impl NerModel for TableNer {
    fn predict(&self, tokens: &[String]) -> Result<Vec<SpanPrediction>> {
        Ok(self
            .answers
            .get(&tokens.join(" "))
            .cloned()
            .unwrap_or_default())
    }

    fn save(&self, _: &Path) -> Result<()> {
        Ok(())
    }

    fn fingerprint(&self) -> &str {
        "table"
    }
}

/// RE stub answering by `(head, tail)` surface, NULL otherwise.
#[derive(Default)]
pub struct TableRe {
    pub answers: HashMap<(String, String), (String, f64)>,
}

impl TableRe {
    pub fn with(mut self, head: &str, tail: &str, rel: &str, p: f64) -> Self {
        self.answers
            .insert((head.into(), tail.into()), (rel.into(), p));
        self
    }
}

impl ReModel for TableRe {
    fn predict(&self, input: &ReInput) -> Result<RelationPrediction> {
        let (rel, p) = self
            .answers
            .get(&(input.head.to_lowercase(), input.tail.to_lowercase()))
            .cloned()
            .unwrap_or_else(|| ("NULL".into(), 0.9));
        Ok(RelationPrediction {
            relation: RelationType::new(rel),
            probability: p,
            distribution: None,
        })
    }

    fn save(&self, _: &Path) -> Result<()> {
        Ok(())
    }

    fn fingerprint(&self) -> &str {
        "table"
    }
}
