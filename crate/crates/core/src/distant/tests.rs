use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::corpus::Sentence;
use crate::discovery::{CandidateEntity, CandidateTriple, TripleCategory};
use crate::kg::{normalize_surface, normalize_token, EntityRecord, Provenance};
use crate::testutil::{kg, sub};

fn fixture_kg() -> KnowledgeGraph {
    kg(
        &[
            ("C1", "chemical", &["aspirin"]),
            ("C2", "finding", &["headache"]),
            ("C3", "disease", &["fever"]),
            ("C4", "disease", &["lung cancer"]),
        ],
        &[("C1", "may_treat", "C2"), ("C1", "may_treat", "C3")],
    )
}

fn spans_of(s: &str, g: &Gazetteer) -> (Sentence, Vec<MatchSpan>) {
    let sent = Sentence::new("s", s).unwrap();
    let spans = entity_matching(&sent, g);
    (sent, spans)
}

#[test]
fn pair_matching_finds_known_relations() {
    let g = fixture_kg();
    let gaz = Gazetteer::from_kg(&g);
    let (_, spans) = spans_of("aspirin relieves headache but not lung cancer", &gaz);
    assert_eq!(spans.len(), 3);
    let pm = entity_pair_matching(&g, &ConfidentTriples::default(), &spans);
    assert_eq!(pm.known.len(), 1);
    assert_eq!((pm.known[0].head, pm.known[0].tail), (0, 1));
    assert_eq!(pm.known[0].rel.as_str(), "may_treat");
    assert!(pm.confident.is_empty());
    assert_eq!(ordered_pairs(&spans).len(), 6);
}

#[test]
fn repeated_mentions_pair_once() {
    let g = fixture_kg();
    let gaz = Gazetteer::from_kg(&g);
    let (_, spans) = spans_of("aspirin , headache , aspirin , headache", &gaz);
    assert_eq!(spans.len(), 4);
    assert_eq!(ordered_pairs(&spans), [(0, 1), (1, 0)]);
}

#[test]
fn confident_triples_label_discovered_pairs() {
    let g = fixture_kg();
    let zol = CandidateEntity::new("zolimab", EntityType::new("chemical"), 0.99, 5);
    let t = CandidateTriple {
        head: zol.entity_ref(),
        rel: RelationType::new("may_treat"),
        tail: EntityRef::Known(EntityId::new("C4")),
        category: TripleCategory::NewEntity,
        max_probability: 0.99,
        cumulative_frequency: 5,
        first_seen: 2,
        last_seen: 2,
    };
    let t_conf = ConfidentTriples::new([&t]);
    let gaz = Gazetteer::new(&g, [&zol]);
    let (_, spans) = spans_of("zolimab shrinks lung cancer", &gaz);
    let pm = entity_pair_matching(&g, &t_conf, &spans);
    assert!(pm.known.is_empty());
    assert_eq!(pm.confident.len(), 1);
    assert_eq!(pm.confident[0].origin, PairOrigin::Confident);
}

#[test]
fn negative_count_matches_formula_on_fixture() {
    let g = kg(
        &[
            ("A", "t", &["a1"]),
            ("B", "t", &["b1"]),
            ("C", "t", &["c1"]),
            ("D", "t", &["d1"]),
            ("E", "t", &["e1"]),
        ],
        &[
            ("A", "r", "B"),
            ("A", "r", "C"),
            ("A", "r", "D"),
            ("A", "r", "E"),
        ],
    );
    let gaz = Gazetteer::from_kg(&g);
    let t_conf = ConfidentTriples::default();
    let kb = KnowledgeBase {
        kg: &g,
        gazetteer: &gaz,
        t_conf: &t_conf,
    };
    let w_o = OutOfDomainWords::from_words(["weather"]);
    let sub = sub(1, &["a1 b1 c1 d1 e1 weather"]);
    let out = build_distant_corpus(&sub, &kb, Vec::new(), &w_o, &DistantConfig::default());
    let pos = out
        .re
        .iter()
        .filter(|e| e.polarity == Polarity::Positive)
        .count();
    let neg = out.re.len() - pos;
    assert_eq!(pos, 4);
    // ceil(4 * 0.2 / 0.8) = 1, round(0.3 * 1) = 0 of scheme 2
    assert_eq!(neg, 1);
    assert_eq!(
        out.re
            .iter()
            .filter(|e| e.polarity == Polarity::NegativeScheme1)
            .count(),
        1
    );
}

#[test]
fn scheme1_shortfall_moves_to_scheme2() {
    // one related pair, its reverse is the only unrelated pair
    let g = kg(
        &[("A", "t", &["a1"]), ("B", "t", &["b1"])],
        &[("A", "r", "B"), ("B", "r", "A")],
    );
    let gaz = Gazetteer::from_kg(&g);
    let t_conf = ConfidentTriples::default();
    let kb = KnowledgeBase {
        kg: &g,
        gazetteer: &gaz,
        t_conf: &t_conf,
    };
    let w_o = OutOfDomainWords::from_words(["rain"]);
    let ctx = NegativeContext::new(&g, &t_conf, Vec::new(), &w_o);
    let sent = Sentence::new("s", "a1 b1 rain").unwrap();
    let spans = entity_matching(&sent, &gaz);
    let positives: Vec<ReExample> = (0..2)
        .map(|i| ReExample {
            input: pair_input(&sent, &spans, i, 1 - i).unwrap(),
            label: RelationType::new("r"),
            polarity: Polarity::Positive,
        })
        .collect();
    let neg =
        get_negative_triples(&sent, &w_o, &positives, &spans, &kb, &ctx, 0.5, 0.0, 1).unwrap();
    assert_eq!(neg.len(), 2);
    assert!(neg.iter().all(|e| e.polarity == Polarity::NegativeScheme2));
    assert!(neg
        .iter()
        .all(|e| e.input.head == "rain" || e.input.tail == "rain"));
}

#[test]
fn global_words_used_when_sentence_has_none() {
    let g = kg(
        &[("A", "t", &["a1"]), ("B", "t", &["b1"])],
        &[("A", "r", "B")],
    );
    let gaz = Gazetteer::from_kg(&g);
    let t_conf = ConfidentTriples::default();
    let kb = KnowledgeBase {
        kg: &g,
        gazetteer: &gaz,
        t_conf: &t_conf,
    };
    let w_o = OutOfDomainWords::from_words(["rain", "snow"]);
    let ctx = NegativeContext::new(&g, &t_conf, vec!["snow".to_string()], &w_o);
    let sent = Sentence::new("s", "a1 b1").unwrap();
    let spans = entity_matching(&sent, &gaz);
    let pos = vec![ReExample {
        input: pair_input(&sent, &spans, 0, 1).unwrap(),
        label: RelationType::new("r"),
        polarity: Polarity::Positive,
    }];
    let neg = get_negative_triples(&sent, &w_o, &pos, &spans, &kb, &ctx, 0.5, 1.0, 3).unwrap();
    assert_eq!(neg.len(), 1);
    // "snow" is an E_conf surface and must not be used
    assert!(neg[0].input.head == "rain" || neg[0].input.tail == "rain");
}

#[test]
fn bad_ratios_rejected() {
    let g = fixture_kg();
    let gaz = Gazetteer::from_kg(&g);
    let t_conf = ConfidentTriples::default();
    let kb = KnowledgeBase {
        kg: &g,
        gazetteer: &gaz,
        t_conf: &t_conf,
    };
    let w_o = OutOfDomainWords::default();
    let ctx = NegativeContext::new(&g, &t_conf, Vec::new(), &w_o);
    let sent = Sentence::new("s", "aspirin").unwrap();
    assert!(get_negative_triples(&sent, &w_o, &[], &[], &kb, &ctx, 1.0, 0.3, 0).is_err());
}

#[test]
fn distant_corpus_fixture() {
    let g = fixture_kg();
    let zol = CandidateEntity::new("zolimab", EntityType::new("chemical"), 0.99, 5);
    let gaz = Gazetteer::new(&g, [&zol]);
    let t_conf = ConfidentTriples::default();
    let kb = KnowledgeBase {
        kg: &g,
        gazetteer: &gaz,
        t_conf: &t_conf,
    };
    let sentences = sub(
        1,
        &[
            "Aspirin relieves headache in most adults.",
            "Zolimab was given for fever today.",
            "Nothing relevant happened here at all.",
        ],
    );
    let w_o = OutOfDomainWords::from_corpus(&sentences.sentences, &g, 100);
    let cfg = DistantConfig::default();
    let out = build_distant_corpus(&sentences, &kb, vec!["zolimab".to_string()], &w_o, &cfg);
    assert_eq!(out.ner.len(), 3);
    assert_eq!(out.skipped, 0);
    assert!(out.ner.iter().all(|e| is_valid_bio(&e.labels)));
    let labels: Vec<String> = out.ner[1].labels.iter().map(ToString::to_string).collect();
    assert_eq!(labels[0], "B-chemical");
    assert_eq!(labels[4], "B-disease");
    // discovered matches never count as overlap entities
    let ents: Vec<&str> = out.overlap_entities.iter().map(EntityId::as_str).collect();
    assert_eq!(ents, ["C1", "C2", "C3"]);
    assert_eq!(
        out.overlap_triples,
        BTreeSet::from([Triple::new("C1", "may_treat", "C2")])
    );
    assert!(out
        .re
        .iter()
        .any(|e| e.polarity == Polarity::Positive && e.input.head == "Aspirin"));
    assert!(out
        .re
        .iter()
        .all(|e| e.input.head != "zolimab" && e.input.tail != "zolimab"));

    let again = build_distant_corpus(&sentences, &kb, vec!["zolimab".to_string()], &w_o, &cfg);
    assert_eq!(out, again);
}

type World = (Vec<Vec<u8>>, Vec<(usize, usize)>, Vec<Vec<u8>>);

fn arb_world() -> impl Strategy<Value = World> {
    // entities: surfaces over a 6-word vocabulary; relations between them;
    // sentences over an 8-word vocabulary (words 6, 7 are out-of-domain)
    let ents = prop::collection::vec(prop::collection::vec(0u8..6, 1..3), 1..10);
    let rels = prop::collection::vec((0usize..10, 0usize..10), 0..20);
    let sents = prop::collection::vec(prop::collection::vec(0u8..8, 1..14), 1..8);
    (ents, rels, sents)
}

const WORDS: [&str; 8] = ["w0", "w1", "w2", "w3", "w4", "w5", "ood6", "ood7"];

fn build_world(ents: &[Vec<u8>], rels: &[(usize, usize)]) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    for (i, s) in ents.iter().enumerate() {
        let surface: Vec<&str> = s.iter().map(|w| WORDS[*w as usize]).collect();
        g.add_entity(EntityRecord {
            id: EntityId::new(format!("E{i}")),
            canonical: surface.join(" "),
            surfaces: BTreeSet::from([surface.join(" ")]),
            etype: EntityType::new(if i % 2 == 0 { "even" } else { "odd" }),
            provenance: Provenance::Source,
        })
        .unwrap();
    }
    for (h, t) in rels {
        let (h, t) = (h % ents.len(), t % ents.len());
        if h != t {
            g.add_triple(Triple::new(format!("E{h}"), "r", format!("E{t}")))
                .unwrap();
        }
    }
    g
}

/// Leftmost-longest matching by scanning every pattern at every position.
fn oracle_matches(g: &KnowledgeGraph, tokens: &[String]) -> Vec<(usize, usize, String)> {
    let norm: Vec<String> = tokens.iter().map(|t| normalize_token(t)).collect();
    let patterns: Vec<(Vec<String>, String)> = g
        .entities()
        .flat_map(|e| {
            e.surfaces.iter().map(move |s| {
                (
                    normalize_surface(s)
                        .split(' ')
                        .map(str::to_string)
                        .collect(),
                    e.id.as_str().to_string(),
                )
            })
        })
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < norm.len() {
        let mut best: Option<(usize, String)> = None;
        for (p, id) in &patterns {
            if i + p.len() <= norm.len() && norm[i..i + p.len()] == p[..] {
                let end = i + p.len();
                best = match best {
                    Some((be, bid)) if be > end || (be == end && bid <= *id) => Some((be, bid)),
                    _ => Some((end, id.clone())),
                };
            }
        }
        match best {
            Some((end, id)) => {
                out.push((i, end, id));
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

proptest! {
    #[test]
    fn matching_equals_linear_oracle((ents, rels, sents) in arb_world()) {
        let g = build_world(&ents, &rels);
        let gaz = Gazetteer::from_kg(&g);
        for s in &sents {
            let toks: Vec<String> = s.iter().map(|w| WORDS[*w as usize].to_string()).collect();
            let got: Vec<(usize, usize, String)> = gaz
                .find_tokens(&toks)
                .into_iter()
                .map(|m| (m.start, m.end, m.entity_id.as_str().to_string()))
                .collect();
            prop_assert_eq!(got, oracle_matches(&g, &toks));
        }
    }

    #[test]
    fn negatives_obey_count_and_purity((ents, rels, sents) in arb_world(), seed in 0u64..1000) {
        let g = build_world(&ents, &rels);
        let gaz = Gazetteer::from_kg(&g);
        let t_conf = ConfidentTriples::default();
        let kb = KnowledgeBase { kg: &g, gazetteer: &gaz, t_conf: &t_conf };
        let w_o = OutOfDomainWords::from_words(["ood6", "ood7"]);
        let texts: Vec<String> = sents
            .iter()
            .map(|s| s.iter().map(|w| WORDS[*w as usize]).collect::<Vec<_>>().join(" "))
            .collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let sc = sub(1, &refs);
        let cfg = DistantConfig { seed, ..DistantConfig::default() };
        let out = build_distant_corpus(&sc, &kb, Vec::new(), &w_o, &cfg);
        prop_assert_eq!(out.ner.len(), sc.len());

        for sent in &sc.sentences {
            let mine: Vec<&ReExample> = out.re.iter().filter(|e| e.input.sid == sent.id).collect();
            let p = mine.iter().filter(|e| e.polarity == Polarity::Positive).count();
            let n = mine.len() - p;
            let k = negative_count(p, cfg.ratio_n);
            let spans = entity_matching(sent, &gaz);
            let unrelated = ordered_pairs(&spans)
                .into_iter()
                .filter(|&(i, j)| !g.is_related(spans[i].entity_id.as_str(), spans[j].entity_id.as_str()))
                .count();
            let want2 = (cfg.ratio_o * k as f64).round() as usize;
            if unrelated >= k - want2 {
                prop_assert_eq!(n, k);
            }
            prop_assert!(n <= k);
            for e in mine.iter().filter(|e| e.polarity != Polarity::Positive) {
                prop_assert!(e.label.is_null());
                let h = g.lookup_surface(&e.input.head);
                let t = g.lookup_surface(&e.input.tail);
                match e.polarity {
                    Polarity::NegativeScheme1 => {
                        prop_assert!(!h.is_empty() && !t.is_empty());
                        // the chosen ids are the gazetteer's picks; check those
                        let hid = spans.iter().find(|s| sent.span_text(s.start, s.end) == e.input.head).unwrap();
                        let tid = spans.iter().find(|s| sent.span_text(s.start, s.end) == e.input.tail).unwrap();
                        prop_assert!(!g.is_related(hid.entity_id.as_str(), tid.entity_id.as_str()));
                    }
                    Polarity::NegativeScheme2 => {
                        prop_assert!(w_o.contains(&e.input.head) || w_o.contains(&e.input.tail));
                    }
                    Polarity::Positive => unreachable!(),
                }
            }
        }
    }
}
