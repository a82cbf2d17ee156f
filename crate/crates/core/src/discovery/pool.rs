use std::collections::BTreeMap;
use std::path::Path;

use super::{
    CandidateEntity, CandidateTriple, EntityObservation, TripleCategory, TripleObservation,
};
use crate::kg::{EntityRef, EntityType, RelationType};
use crate::util::{read_jsonl, write_jsonl};
use crate::{Error, Result};

/// Entity candidates keyed by `(normalized surface, type)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityPool {
    entries: BTreeMap<(String, EntityType), CandidateEntity>,
}

impl EntityPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, o: EntityObservation, iteration: usize) {
        let key = (o.surface, o.etype);
        match self.entries.get_mut(&key) {
            Some(c) => {
                c.cumulative_frequency += 1;
                c.max_probability = c.max_probability.max(o.probability);
                c.last_seen = iteration;
            }
            None => {
                let mut c = CandidateEntity::new(key.0.clone(), key.1.clone(), o.probability, 1);
                c.first_seen = iteration;
                c.last_seen = iteration;
                self.entries.insert(key, c);
            }
        }
    }

    /// Folds another pool in with the same semantics as repeated `observe`.
    pub fn absorb(&mut self, other: EntityPool) {
        for (key, c) in other.entries {
            match self.entries.get_mut(&key) {
                Some(mine) => {
                    mine.cumulative_frequency += c.cumulative_frequency;
                    mine.max_probability = mine.max_probability.max(c.max_probability);
                    mine.first_seen = mine.first_seen.min(c.first_seen);
                    mine.last_seen = mine.last_seen.max(c.last_seen);
                }
                None => {
                    self.entries.insert(key, c);
                }
            }
        }
    }

    pub fn get(&self, surface: &str, etype: &EntityType) -> Option<&CandidateEntity> {
        self.entries.get(&(surface.to_string(), etype.clone()))
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = &CandidateEntity> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(path, self.iter())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut pool = EntityPool::new();
        for c in read_jsonl::<CandidateEntity>(path)? {
            let key = (c.surface.clone(), c.etype.clone());
            if pool.entries.insert(key, c).is_some() {
                return Err(Error::InvalidInput(format!(
                    "{}: duplicate pool key",
                    path.display()
                )));
            }
        }
        Ok(pool)
    }
}

type TripleKey = (EntityRef, RelationType, EntityRef);

/// Triple candidates keyed by `(head, relation, tail)`. NULL is never pooled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriplePool {
    entries: BTreeMap<TripleKey, CandidateTriple>,
}

impl TriplePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, o: TripleObservation, iteration: usize) {
        if o.rel.is_null() {
            log::warn!("ignoring NULL triple {} -> {}", o.head, o.tail);
            return;
        }
        let key = (o.head, o.rel, o.tail);
        match self.entries.get_mut(&key) {
            Some(c) => {
                c.cumulative_frequency += 1;
                c.max_probability = c.max_probability.max(o.probability);
                c.last_seen = iteration;
            }
            None => {
                let c = CandidateTriple {
                    category: TripleCategory::of(&key.0, &key.2),
                    head: key.0.clone(),
                    rel: key.1.clone(),
                    tail: key.2.clone(),
                    max_probability: o.probability,
                    cumulative_frequency: 1,
                    first_seen: iteration,
                    last_seen: iteration,
                };
                self.entries.insert(key, c);
            }
        }
    }

    pub fn absorb(&mut self, other: TriplePool) {
        for (key, c) in other.entries {
            match self.entries.get_mut(&key) {
                Some(mine) => {
                    mine.cumulative_frequency += c.cumulative_frequency;
                    mine.max_probability = mine.max_probability.max(c.max_probability);
                    mine.first_seen = mine.first_seen.min(c.first_seen);
                    mine.last_seen = mine.last_seen.max(c.last_seen);
                }
                None => {
                    self.entries.insert(key, c);
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &CandidateTriple> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(path, self.iter())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut pool = TriplePool::new();
        for c in read_jsonl::<CandidateTriple>(path)? {
            if c.rel.is_null() {
                return Err(Error::InvalidInput(format!(
                    "{}: NULL triple in pool",
                    path.display()
                )));
            }
            let key = (c.head.clone(), c.rel.clone(), c.tail.clone());
            if pool.entries.insert(key, c).is_some() {
                return Err(Error::InvalidInput(format!(
                    "{}: duplicate pool key",
                    path.display()
                )));
            }
        }
        Ok(pool)
    }
}
