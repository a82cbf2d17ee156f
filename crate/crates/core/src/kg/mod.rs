//! Knowledge graph data model with surface-form and entity-pair indexes.
//!
//! The same structure holds both the coarse-domain graph that seeds
//! supervision and the fine-domain graph produced by a run. Indexes are
//! derived from entities and triples on insertion and can always be
//! rebuilt from them.

mod build;
mod io;
mod normalize;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap;

use crate::{Error, Result};

pub use build::build_kg;
pub use io::{export_kg, load_kg, LoadReport};
pub use normalize::{join_normalized, normalize_surface, normalize_token};
pub use types::{
    EntityId, EntityRecord, EntityRef, EntityType, Provenance, RelationType, Triple,
    DISCOVERED_ID_PREFIX,
};

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, EntityRecord>,
    triples: BTreeSet<Triple>,
    entity_types: BTreeSet<EntityType>,
    relation_types: BTreeSet<RelationType>,
    surface_index: FxHashMap<String, Vec<EntityId>>,
    pair_index: FxHashMap<EntityId, FxHashMap<EntityId, BTreeSet<RelationType>>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty graph sharing the type and relation vocabulary of `base`.
    pub fn with_vocabulary_of(base: &KnowledgeGraph) -> Self {
        KnowledgeGraph {
            entity_types: base.entity_types.clone(),
            relation_types: base.relation_types.clone(),
            ..Self::default()
        }
    }

    pub fn add_entity(&mut self, record: EntityRecord) -> Result<()> {
        if record.id.as_str().is_empty() {
            return Err(Error::InvalidKg("empty entity id".into()));
        }
        if record.etype.as_str().is_empty() {
            return Err(Error::InvalidKg(format!(
                "entity {} has an empty type",
                record.id
            )));
        }
        // BIO labels encode spaces as underscores
        if record.etype.as_str().contains('_') {
            return Err(Error::InvalidKg(format!(
                "entity type {:?} of {} contains '_'",
                record.etype.as_str(),
                record.id
            )));
        }
        if record.surfaces.is_empty() {
            return Err(Error::InvalidKg(format!(
                "entity {} has no surface forms",
                record.id
            )));
        }
        if self.entities.contains_key(&record.id) {
            return Err(Error::InvalidKg(format!(
                "duplicate entity id {}",
                record.id
            )));
        }
        let mut keys = BTreeSet::new();
        for s in &record.surfaces {
            let key = normalize_surface(s);
            if key.is_empty() {
                return Err(Error::InvalidKg(format!(
                    "entity {} has an empty surface form",
                    record.id
                )));
            }
            keys.insert(key);
        }
        for key in keys {
            let ids = self.surface_index.entry(key).or_default();
            let pos = ids.binary_search(&record.id).unwrap_err();
            ids.insert(pos, record.id.clone());
        }
        self.entity_types.insert(record.etype.clone());
        self.entities.insert(record.id.clone(), record);
        Ok(())
    }

    /// Inserts a triple. Returns `Ok(false)` if it was already present.
    pub fn add_triple(&mut self, triple: Triple) -> Result<bool> {
        if triple.rel.is_null() || triple.rel.as_str().is_empty() {
            return Err(Error::InvalidKg(format!(
                "triple {} -> {} has relation {:?}",
                triple.head,
                triple.tail,
                triple.rel.as_str()
            )));
        }
        if triple.head == triple.tail {
            return Err(Error::InvalidKg(format!("self-loop on {}", triple.head)));
        }
        for id in [&triple.head, &triple.tail] {
            if !self.entities.contains_key(id) {
                return Err(Error::InvalidKg(format!(
                    "triple references unknown entity {id}"
                )));
            }
        }
        if self.triples.contains(&triple) {
            return Ok(false);
        }
        self.pair_index
            .entry(triple.head.clone())
            .or_default()
            .entry(triple.tail.clone())
            .or_default()
            .insert(triple.rel.clone());
        self.relation_types.insert(triple.rel.clone());
        self.triples.insert(triple);
        Ok(true)
    }

    pub fn entity(&self, id: &str) -> Option<&EntityRecord> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.values()
    }

    pub fn triples(&self) -> &BTreeSet<Triple> {
        &self.triples
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn entity_types(&self) -> &BTreeSet<EntityType> {
        &self.entity_types
    }

    pub fn relation_types(&self) -> &BTreeSet<RelationType> {
        &self.relation_types
    }

    /// Registers vocabulary entries that no entity or triple uses yet.
    pub fn extend_vocabulary(
        &mut self,
        types: impl IntoIterator<Item = EntityType>,
        relations: impl IntoIterator<Item = RelationType>,
    ) {
        self.entity_types.extend(types);
        self.relation_types
            .extend(relations.into_iter().filter(|r| !r.is_null()));
    }

    /// Entities whose normalized surface set contains the normalized query.
    pub fn lookup_surface(&self, surface: &str) -> Vec<(EntityId, EntityType)> {
        let key = normalize_surface(surface);
        self.lookup_normalized(&key)
            .iter()
            .map(|id| (id.clone(), self.entities[id].etype.clone()))
            .collect()
    }

    /// Ids for an already-normalized key, sorted.
    pub fn lookup_normalized(&self, key: &str) -> &[EntityId] {
        self.surface_index.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn has_surface(&self, normalized: &str) -> bool {
        self.surface_index.contains_key(normalized)
    }

    /// Normalized surface keys with the ids they resolve to.
    pub fn surface_keys(&self) -> impl Iterator<Item = (&str, &[EntityId])> {
        self.surface_index
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Relations stored for the ordered pair `(head, tail)`.
    pub fn relation_of(&self, head: &str, tail: &str) -> BTreeSet<RelationType> {
        self.relations_between(head, tail)
            .cloned()
            .unwrap_or_default()
    }

    pub fn relations_between(&self, head: &str, tail: &str) -> Option<&BTreeSet<RelationType>> {
        self.pair_index.get(head).and_then(|m| m.get(tail))
    }

    pub fn is_related(&self, head: &str, tail: &str) -> bool {
        self.relations_between(head, tail).is_some()
    }

    pub fn pair_count(&self) -> usize {
        self.pair_index.values().map(|m| m.len()).sum()
    }
}
