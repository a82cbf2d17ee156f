//! Synthetic worlds: a small coarse KG, a corpus generated from it, and
//! planted fine-domain entities and triples that the corpus mentions but
//! the KG lacks. Used by the end-to-end tests.
//!
//! Entity names carry type-specific morphology (suffixes, gene-like shapes)
//! and relations are expressed through fixed cue phrases, so a model trained
//! on KG-labelled sentences can generalize to the planted ones.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::kg::{
    normalize_surface, EntityId, EntityRecord, EntityRef, EntityType, KnowledgeGraph, Provenance,
    RelationType, Triple,
};
use crate::util::rng_for;
use crate::{Error, Result};

pub const CHEMICAL: &str = "chemical";
pub const DISEASE: &str = "disease";
pub const GENE: &str = "gene";
pub const MAY_TREAT: &str = "may_treat";
pub const ASSOCIATED_WITH: &str = "associated_with";

/// Sentences generated per background KG triple.
const PER_KG_TRIPLE: usize = 5;
/// Sentences per planted triple between two KG entities.
const PER_NEW_RELATION: usize = 8;
/// Sentences per planted triple involving a planted entity.
const PER_NEW_ENTITY_TRIPLE: usize = 10;
/// Stand-alone mentions per planted entity.
const PER_PLANTED_MENTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub entities: usize,
    pub triples: usize,
    pub sentences: usize,
    pub planted_entities: usize,
    pub planted_triples: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            entities: 50,
            triples: 40,
            sentences: 600,
            planted_entities: 10,
            planted_triples: 15,
            seed: 13,
        }
    }
}

pub type PlantedTriple = (EntityRef, RelationType, EntityRef);

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub kg: KnowledgeGraph,
    pub sentences: Vec<Sentence>,
    /// `(normalized surface, type)` of entities absent from the KG.
    pub planted_entities: Vec<(String, EntityType)>,
    pub planted_triples: Vec<PlantedTriple>,
}

#[derive(Debug, Clone)]
struct Ent {
    surface: String,
    etype: &'static str,
    r: EntityRef,
}

const CONSONANTS: &[char] = &[
    'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
const CHEM_SUFFIXES: &[&str] = &["mab", "pril", "azole", "statin"];
const DISEASE_SUFFIXES: &[&str] = &["itis", "osis", "emia", "algia"];
const GENE_LETTERS: &[char] = &[
    'B', 'C', 'D', 'F', 'G', 'K', 'L', 'M', 'N', 'P', 'R', 'S', 'T', 'X',
];

fn stem(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    (0..syllables)
        .flat_map(|_| {
            [
                *CONSONANTS.choose(rng).unwrap(),
                *VOWELS.choose(rng).unwrap(),
            ]
        })
        .collect()
}

fn name(rng: &mut ChaCha8Rng, etype: &str) -> String {
    match etype {
        CHEMICAL => format!("{}{}", stem(rng), CHEM_SUFFIXES.choose(rng).unwrap()),
        DISEASE => format!("{}{}", stem(rng), DISEASE_SUFFIXES.choose(rng).unwrap()),
        _ => {
            let letters: String = (0..3).map(|_| *GENE_LETTERS.choose(rng).unwrap()).collect();
            format!("{letters}{}", rng.gen_range(1..10))
        }
    }
}

fn relation_templates(rel: &str) -> &'static [&'static str] {
    match rel {
        MAY_TREAT => &[
            "{h} may treat {t} in adults .",
            "patients with {t} received {h} .",
            "{h} is indicated for {t} .",
            "treatment of {t} with {h} was effective .",
            "{h} improved symptoms of {t} .",
        ],
        _ => &[
            "{h} is associated with {t} .",
            "mutations in {h} cause {t} .",
            "{t} is linked to variants of {h} .",
            "expression of {h} was elevated in {t} .",
        ],
    }
}

fn mention_templates(etype: &str) -> &'static [&'static str] {
    match etype {
        CHEMICAL => &[
            "{e} was administered daily .",
            "the dose of {e} was reduced .",
            "a trial of {e} enrolled volunteers .",
            "side effects of {e} were mild .",
        ],
        DISEASE => &[
            "{e} was diagnosed in the cohort .",
            "symptoms of {e} persisted for weeks .",
            "cases of {e} increased last year .",
            "the prevalence of {e} remains unclear .",
        ],
        _ => &[
            "{e} was sequenced in all samples .",
            "levels of {e} were measured .",
            "the promoter of {e} is conserved .",
        ],
    }
}

const UNRELATED_TEMPLATES: &[&str] = &[
    "{a} and {b} were recorded separately .",
    "neither {a} nor {b} was reported in the survey .",
    "the registry lists {a} next to {b} .",
];

const DISTRACTOR: &str = " , while {x} was also examined";

/// Splits `total` into parts proportional to `weights`, remainder to the first.
fn split(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let mut parts: Vec<usize> = weights.iter().map(|w| total * w / sum).collect();
    parts[0] += total - parts.iter().sum::<usize>();
    parts
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in slots {
        s = s.replace(k, v);
    }
    s
}

struct Builder {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
    texts: Vec<String>,
}

impl Builder {
    /// A fresh single-token name. Planted entities borrow the first three
    /// characters of a KG entity of their type, so apart from the full word
    /// every prefix, suffix and shape feature has been seen on labelled KG
    /// mentions.
    fn fresh_name(&mut self, etype: &'static str, parent: Option<&str>) -> String {
        loop {
            let fresh = name(&mut self.rng, etype);
            let n = match parent {
                Some(p) => format!("{}{}", &p[..3], &fresh[3..]),
                None => fresh,
            };
            if self.used.insert(n.to_lowercase()) {
                return n;
            }
        }
    }

    fn relation_sentence(&mut self, rel: &str, h: &Ent, t: &Ent, distractor: Option<&Ent>) {
        let tpl = *relation_templates(rel).choose(&mut self.rng).unwrap();
        let mut s = fill(tpl, &[("{h}", &h.surface), ("{t}", &t.surface)]);
        if let Some(x) = distractor {
            let stem = s.trim_end_matches(" .").to_string();
            s = format!("{stem}{} .", DISTRACTOR.replace("{x}", &x.surface));
        }
        self.texts.push(s);
    }

    fn mention(&mut self, e: &Ent) {
        let tpl = *mention_templates(e.etype).choose(&mut self.rng).unwrap();
        self.texts.push(fill(tpl, &[("{e}", &e.surface)]));
    }
}

/// Generates a world. The same configuration always yields the same world.
pub fn generate(cfg: &SynthConfig) -> Result<SynthWorld> {
    let n_new_entity_triples = cfg.planted_entities.min(cfg.planted_triples / 2);
    let n_new_relations = cfg.planted_triples - n_new_entity_triples;
    let needed = cfg.triples * PER_KG_TRIPLE
        + n_new_relations * PER_NEW_RELATION
        + n_new_entity_triples * PER_NEW_ENTITY_TRIPLE
        + cfg.planted_entities * PER_PLANTED_MENTION;
    if needed > cfg.sentences || cfg.entities < 6 {
        return Err(Error::Config(format!(
            "synthetic world needs at least {needed} sentences and 6 entities"
        )));
    }

    let mut b = Builder {
        rng: rng_for(cfg.seed, "synth"),
        used: BTreeSet::new(),
        texts: Vec::new(),
    };

    let mut kg = KnowledgeGraph::new();
    let counts = split(cfg.entities, &[2, 2, 1]);
    let mut by_type: [Vec<Ent>; 3] = Default::default();
    for (slot, (etype, count)) in [CHEMICAL, DISEASE, GENE]
        .into_iter()
        .zip(counts)
        .enumerate()
    {
        for i in 0..count {
            let id = format!("{}{:03}", etype[..1].to_uppercase(), i + 1);
            let surface = b.fresh_name(etype, None);
            kg.add_entity(EntityRecord {
                id: EntityId::new(&id),
                canonical: surface.clone(),
                surfaces: BTreeSet::from([surface.clone()]),
                etype: EntityType::new(etype),
                provenance: Provenance::Source,
            })?;
            by_type[slot].push(Ent {
                surface,
                etype,
                r: EntityRef::Known(EntityId::new(id)),
            });
        }
    }
    let [chems, diseases, genes] = &by_type;

    // every (head, tail) pair allowed by the relation signatures
    let signature_pairs = |rel: &str| -> Vec<(usize, usize)> {
        let heads = if rel == MAY_TREAT {
            chems.len()
        } else {
            genes.len()
        };
        (0..heads)
            .flat_map(|h| (0..diseases.len()).map(move |t| (h, t)))
            .collect()
    };
    let heads_of = |rel: &str| if rel == MAY_TREAT { chems } else { genes };

    let triple_split = split(cfg.triples + n_new_relations, &[5, 3]);
    let mut kg_triples: Vec<(&'static str, Ent, Ent)> = Vec::new();
    let mut new_relations: Vec<(&'static str, Ent, Ent)> = Vec::new();
    for (rel, total) in [MAY_TREAT, ASSOCIATED_WITH].into_iter().zip(triple_split) {
        let mut pairs = signature_pairs(rel);
        if pairs.len() < total {
            return Err(Error::Config(
                "too few entities for the requested triples".into(),
            ));
        }
        pairs.shuffle(&mut b.rng);
        for (h, t) in pairs.into_iter().take(total) {
            let item = (rel, heads_of(rel)[h].clone(), diseases[t].clone());
            let want_kg = cfg.triples * if rel == MAY_TREAT { 5 } else { 3 } / 8;
            if kg_triples.iter().filter(|x| x.0 == rel).count() < want_kg {
                kg_triples.push(item);
            } else {
                new_relations.push(item);
            }
        }
    }
    // rounding may leave the KG short; move planted relations over
    while kg_triples.len() < cfg.triples {
        kg_triples.push(new_relations.pop().expect("enough pairs"));
    }
    new_relations.truncate(n_new_relations);
    for (rel, h, t) in &kg_triples {
        let (EntityRef::Known(hid), EntityRef::Known(tid)) = (&h.r, &t.r) else {
            unreachable!()
        };
        kg.add_triple(Triple::new(hid.as_str(), *rel, tid.as_str()))?;
    }

    let planted_counts = split(cfg.planted_entities, &[2, 2, 1]);
    let mut planted_by_type: Vec<Vec<Ent>> = Vec::new();
    for (slot, (etype, count)) in [CHEMICAL, DISEASE, GENE]
        .into_iter()
        .zip(planted_counts)
        .enumerate()
    {
        let mut group = Vec::new();
        let parents: Vec<String> = by_type[slot]
            .choose_multiple(&mut b.rng, count)
            .map(|e| e.surface.clone())
            .collect();
        if parents.len() < count {
            return Err(Error::Config(format!(
                "too few {etype} entities to derive planted names from"
            )));
        }
        for parent in &parents {
            let surface = b.fresh_name(etype, Some(parent));
            group.push(Ent {
                r: EntityRef::Candidate {
                    surface: normalize_surface(&surface),
                    etype: EntityType::new(etype),
                },
                surface,
                etype,
            });
        }
        planted_by_type.push(group);
    }
    // round-robin over types so the triple-bearing prefix mixes them
    let mut planted: Vec<Ent> = Vec::new();
    for i in 0..cfg.planted_entities {
        planted.extend(planted_by_type.iter().filter_map(|g| g.get(i).cloned()));
    }

    let mut new_entity_triples: Vec<(&'static str, Ent, Ent)> = Vec::new();
    for p in planted.iter().take(n_new_entity_triples) {
        let triple = match p.etype {
            CHEMICAL => (
                MAY_TREAT,
                p.clone(),
                diseases.choose(&mut b.rng).unwrap().clone(),
            ),
            DISEASE => (
                MAY_TREAT,
                chems.choose(&mut b.rng).unwrap().clone(),
                p.clone(),
            ),
            _ => (
                ASSOCIATED_WITH,
                p.clone(),
                diseases.choose(&mut b.rng).unwrap().clone(),
            ),
        };
        new_entity_triples.push(triple);
    }

    // pairs that must never co-occur without their intended relation
    let mut touched: BTreeSet<(EntityRef, EntityRef)> = BTreeSet::new();
    for (_, h, t) in kg_triples
        .iter()
        .chain(&new_relations)
        .chain(&new_entity_triples)
    {
        touched.insert((h.r.clone(), t.r.clone()));
        touched.insert((t.r.clone(), h.r.clone()));
    }
    let all_known: Vec<Ent> = by_type.iter().flatten().cloned().collect();
    let free = |a: &Ent, c: &Ent| a.r != c.r && !touched.contains(&(a.r.clone(), c.r.clone()));

    for (rel, h, t) in &kg_triples {
        for _ in 0..PER_KG_TRIPLE {
            let distractor = if b.rng.gen_bool(0.4) {
                let pool: Vec<&Ent> = all_known
                    .iter()
                    .filter(|x| free(x, h) && free(x, t))
                    .collect();
                pool.choose(&mut b.rng).map(|x| (*x).clone())
            } else {
                None
            };
            b.relation_sentence(rel, h, t, distractor.as_ref());
        }
    }
    for (rel, h, t) in &new_relations {
        for _ in 0..PER_NEW_RELATION {
            b.relation_sentence(rel, h, t, None);
        }
    }
    for (rel, h, t) in &new_entity_triples {
        for _ in 0..PER_NEW_ENTITY_TRIPLE {
            b.relation_sentence(rel, h, t, None);
        }
    }
    for p in &planted {
        for _ in 0..PER_PLANTED_MENTION {
            b.mention(p);
        }
    }
    while b.texts.len() < cfg.sentences {
        let a = all_known.choose(&mut b.rng).unwrap().clone();
        if b.rng.gen_bool(0.5) {
            b.mention(&a);
            continue;
        }
        let c = all_known.choose(&mut b.rng).unwrap().clone();
        if free(&a, &c) {
            let tpl = *UNRELATED_TEMPLATES.choose(&mut b.rng).unwrap();
            b.texts
                .push(fill(tpl, &[("{a}", &a.surface), ("{b}", &c.surface)]));
        }
    }

    let mut texts = b.texts;
    texts.shuffle(&mut b.rng);
    let sentences = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Sentence::new(format!("syn{i:04}:0"), t.as_str()))
        .collect::<Result<Vec<_>>>()?;

    let planted_triples = new_relations
        .iter()
        .chain(&new_entity_triples)
        .map(|(rel, h, t)| (h.r.clone(), RelationType::new(*rel), t.r.clone()))
        .collect();
    Ok(SynthWorld {
        kg,
        sentences,
        planted_entities: planted
            .iter()
            .map(|p| (normalize_surface(&p.surface), EntityType::new(p.etype)))
            .collect(),
        planted_triples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_world_has_requested_shape() {
        let w = generate(&SynthConfig::default()).unwrap();
        assert_eq!(w.kg.entity_count(), 50);
        assert_eq!(w.kg.triple_count(), 40);
        assert_eq!(w.sentences.len(), 600);
        assert_eq!(w.planted_entities.len(), 10);
        assert_eq!(w.planted_triples.len(), 15);
        let kinds: BTreeSet<bool> = w
            .planted_triples
            .iter()
            .map(|(h, _, t)| h.is_candidate() || t.is_candidate())
            .collect();
        assert_eq!(kinds.len(), 2, "both triple categories are planted");
    }

    #[test]
    fn planted_items_are_absent_from_kg() {
        let w = generate(&SynthConfig::default()).unwrap();
        for (s, _) in &w.planted_entities {
            assert!(!w.kg.has_surface(&normalize_surface(s)));
        }
        for (h, _, t) in &w.planted_triples {
            if let (EntityRef::Known(h), EntityRef::Known(t)) = (h, t) {
                assert!(!w.kg.is_related(h.as_str(), t.as_str()));
                assert!(!w.kg.is_related(t.as_str(), h.as_str()));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&SynthConfig::default()).unwrap();
        let b = generate(&SynthConfig::default()).unwrap();
        assert_eq!(a.sentences, b.sentences);
        let c = generate(&SynthConfig {
            seed: 99,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a.sentences, c.sentences);
    }

    #[test]
    fn too_small_budget_is_rejected() {
        let cfg = SynthConfig {
            sentences: 100,
            ..SynthConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }
}
