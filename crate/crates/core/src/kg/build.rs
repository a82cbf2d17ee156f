use std::collections::BTreeSet;

use super::{EntityRecord, EntityRef, KnowledgeGraph, Provenance, Triple};
use crate::discovery::CandidateTriple;
use crate::{Error, Result};

/// Assembles the fine-domain graph from overlap triples and confidently
/// discovered triples.
///
/// Known entities are copied from `base`. Candidate entities are minted as
/// `new:<surface>` with provenance `discovered`; when one surface occurs with
/// several types, the smallest type name is kept for the record.
pub fn build_kg<'a>(
    overlap: &BTreeSet<Triple>,
    discovered: impl IntoIterator<Item = &'a CandidateTriple>,
    base: &KnowledgeGraph,
) -> Result<KnowledgeGraph> {
    let mut kf = KnowledgeGraph::with_vocabulary_of(base);

    let mut discovered: Vec<&CandidateTriple> = discovered.into_iter().collect();
    discovered.sort_by(|a, b| a.key().cmp(&b.key()));

    for c in &discovered {
        if c.rel.is_null() {
            return Err(Error::InvalidKg(format!(
                "discovered triple {} -> {} carries the NULL relation",
                c.head, c.tail
            )));
        }
    }

    for t in overlap {
        ensure_known(&mut kf, base, t.head.as_str())?;
        ensure_known(&mut kf, base, t.tail.as_str())?;
        kf.add_triple(t.clone())?;
    }

    for c in discovered {
        for r in [&c.head, &c.tail] {
            match r {
                EntityRef::Known(id) => ensure_known(&mut kf, base, id.as_str())?,
                EntityRef::Candidate { surface, etype } => {
                    let id = r.graph_id();
                    if kf.entity(id.as_str()).is_none() {
                        kf.add_entity(EntityRecord {
                            id,
                            canonical: surface.clone(),
                            surfaces: BTreeSet::from([surface.clone()]),
                            etype: etype.clone(),
                            provenance: Provenance::Discovered,
                        })?;
                    }
                }
            }
        }
        kf.add_triple(Triple {
            head: c.head.graph_id(),
            rel: c.rel.clone(),
            tail: c.tail.graph_id(),
        })?;
    }
    Ok(kf)
}

fn ensure_known(kf: &mut KnowledgeGraph, base: &KnowledgeGraph, id: &str) -> Result<()> {
    if kf.entity(id).is_some() {
        return Ok(());
    }
    let rec = base
        .entity(id)
        .ok_or_else(|| Error::InvalidKg(format!("entity {id} not found in the base graph")))?;
    kf.add_entity(rec.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::TripleCategory;
    use crate::kg::{EntityId, EntityType, RelationType};
    use proptest::prelude::*;

    fn base() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::new();
        for (id, t, s) in [
            ("A", "chemical or drug", "aspirin"),
            ("B", "sign, symptom or finding", "headache"),
            ("C", "disease or syndrome", "fever"),
            ("D", "anatomy", "liver"),
        ] {
            kg.add_entity(EntityRecord {
                id: EntityId::new(id),
                canonical: s.into(),
                surfaces: BTreeSet::from([s.to_string()]),
                etype: EntityType::new(t),
                provenance: Provenance::Source,
            })
            .unwrap();
        }
        kg.add_triple(Triple::new("A", "may_treat", "B")).unwrap();
        kg.add_triple(Triple::new("A", "may_treat", "C")).unwrap();
        kg.add_triple(Triple::new("C", "found_in", "D")).unwrap();
        kg
    }

    fn cand(head: EntityRef, rel: &str, tail: EntityRef) -> CandidateTriple {
        let category = if head.is_candidate() || tail.is_candidate() {
            TripleCategory::NewEntity
        } else {
            TripleCategory::NewRelation
        };
        CandidateTriple {
            head,
            rel: RelationType::new(rel),
            tail,
            max_probability: 0.99,
            cumulative_frequency: 4,
            category,
            first_seen: 2,
            last_seen: 2,
        }
    }

    fn known(id: &str) -> EntityRef {
        EntityRef::Known(EntityId::new(id))
    }

    #[test]
    fn empty_inputs() {
        let kf = build_kg(&BTreeSet::new(), &[], &base()).unwrap();
        assert_eq!((kf.entity_count(), kf.triple_count()), (0, 0));
        assert_eq!(kf.entity_types(), base().entity_types());
        assert_eq!(kf.relation_types(), base().relation_types());
    }

    #[test]
    fn disjoint_union() {
        let overlap = BTreeSet::from([
            Triple::new("A", "may_treat", "B"),
            Triple::new("C", "found_in", "D"),
        ]);
        let disc = [cand(known("B"), "found_in", known("D"))];
        let kf = build_kg(&overlap, &disc, &base()).unwrap();
        assert_eq!(kf.triple_count(), 3);
    }

    #[test]
    fn shared_triple_stored_once() {
        let overlap = BTreeSet::from([Triple::new("A", "may_treat", "B")]);
        let disc = [cand(known("A"), "may_treat", known("B"))];
        let kf = build_kg(&overlap, &disc, &base()).unwrap();
        assert_eq!(kf.triple_count(), 1);
    }

    #[test]
    fn mints_discovered_entities() {
        let new = EntityRef::Candidate {
            surface: "immune evasion".into(),
            etype: EntityType::new("physiology"),
        };
        let kf = build_kg(
            &BTreeSet::new(),
            &[cand(new, "found_in", known("D"))],
            &base(),
        )
        .unwrap();
        let rec = kf.entity("new:immune evasion").unwrap();
        assert_eq!(rec.provenance, Provenance::Discovered);
        assert_eq!(kf.entity("D").unwrap().provenance, Provenance::Source);
        assert!(kf.is_related("new:immune evasion", "D"));
    }

    #[test]
    fn null_relation_rejected() {
        let err = build_kg(
            &BTreeSet::new(),
            &[cand(known("B"), "NULL", known("D"))],
            &base(),
        );
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn output_is_exact_union(
            ov in prop::collection::btree_set((0usize..4, 0usize..2, 0usize..4), 0..8),
            disc in prop::collection::vec((0usize..6, 0usize..2, 0usize..6), 0..8),
        ) {
            let ids = ["A", "B", "C", "D"];
            let rels = ["is_a", "found_in"];
            let overlap: BTreeSet<Triple> = ov.into_iter()
                .filter(|(h, _, t)| h != t)
                .map(|(h, r, t)| Triple::new(ids[h], rels[r], ids[t]))
                .collect();
            let to_ref = |i: usize| if i < 4 { known(ids[i]) } else {
                EntityRef::Candidate { surface: format!("novel{i}"), etype: EntityType::new("anatomy") }
            };
            let cands: Vec<_> = disc.into_iter()
                .filter(|(h, _, t)| h != t)
                .map(|(h, r, t)| cand(to_ref(h), rels[r], to_ref(t)))
                .collect();
            let kf = build_kg(&overlap, &cands, &base()).unwrap();
            let mut expected = overlap.clone();
            expected.extend(cands.iter().map(|c| Triple { head: c.head.graph_id(), rel: c.rel.clone(), tail: c.tail.graph_id() }));
            prop_assert_eq!(kf.triples(), &expected);
        }
    }
}
