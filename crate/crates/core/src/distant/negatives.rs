use std::collections::{BTreeSet, HashSet};

use rand::seq::index;
use rand::Rng;

use super::{
    ordered_pairs, pair_input, ConfidentTriples, KnowledgeBase, MatchSource, MatchSpan,
    OutOfDomainWords,
};
use super::{Polarity, ReExample, ReInput};
use crate::corpus::{is_punct_token, Sentence};
use crate::kg::{normalize_token, EntityType, KnowledgeGraph, RelationType};
use crate::util::rng_for;
use crate::{Error, Result};

/// Number of NULL samples that makes negatives `ratio_n` of all samples:
/// `ceil(p * ratio_n / (1 - ratio_n))`.
pub fn negative_count(positives: usize, ratio_n: f64) -> usize {
    if positives == 0 || ratio_n <= 0.0 {
        return 0;
    }
    let exact = positives as f64 * ratio_n / (1.0 - ratio_n);
    // absorb float noise such as 4 * 0.2 / 0.8 = 1.0000000000000002
    (exact - 1e-9).ceil().max(0.0) as usize
}

/// Per-iteration data for negative sampling, shared by all sentences.
#[derive(Debug, Clone)]
pub struct NegativeContext {
    types: Vec<EntityType>,
    /// Surfaces that may take part in confident knowledge and so cannot
    /// stand in as a "non-entity" slot.
    excluded: HashSet<String>,
    global_words: Vec<String>,
}

impl NegativeContext {
    pub fn new(
        kg: &KnowledgeGraph,
        t_conf: &ConfidentTriples,
        e_conf_surfaces: impl IntoIterator<Item = String>,
        w_o: &OutOfDomainWords,
    ) -> Self {
        let mut excluded: HashSet<String> = e_conf_surfaces.into_iter().collect();
        excluded.extend(t_conf.candidate_surfaces().map(str::to_string));
        let global_words = w_o
            .iter()
            .filter(|w| !excluded.contains(*w))
            .map(str::to_string)
            .collect();
        NegativeContext {
            types: super::type_list(kg),
            excluded,
            global_words,
        }
    }
}

/// Samples NULL-labelled relation examples for one sentence.
///
/// Scheme 1 pairs two matched entities with no relation in the KG or in the
/// confident triples. Scheme 2 pairs a matched entity with an out-of-domain
/// word, preferring words that occur in the sentence. `round(ratio_o * k)`
/// of the `k` negatives use scheme 2; if the sentence lacks scheme-1 pairs
/// the shortfall moves to scheme 2.
#[allow(clippy::too_many_arguments)]
pub fn get_negative_triples(
    sent: &Sentence,
    w_o: &OutOfDomainWords,
    positives: &[ReExample],
    spans: &[MatchSpan],
    kb: &KnowledgeBase<'_>,
    ctx: &NegativeContext,
    ratio_n: f64,
    ratio_o: f64,
    seed: u64,
) -> Result<Vec<ReExample>> {
    if !(0.0..1.0).contains(&ratio_n) || !(0.0..=1.0).contains(&ratio_o) {
        return Err(Error::Precondition(format!(
            "need 0 <= ratio_n < 1 and 0 <= ratio_o <= 1, got {ratio_n} and {ratio_o}"
        )));
    }
    let k = negative_count(positives.len(), ratio_n);
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut rng = rng_for(seed, &format!("negatives:{}", sent.id));
    let want_scheme2 = (ratio_o * k as f64).round() as usize;
    let want_scheme1 = k - want_scheme2;

    let candidates: Vec<(usize, usize)> = ordered_pairs(spans)
        .into_iter()
        .filter(|&(i, j)| is_unrelated(kb, &spans[i], &spans[j]))
        .collect();
    let take1 = want_scheme1.min(candidates.len());
    let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), take1).into_vec();
    picked.sort_unstable();

    let mut out = Vec::with_capacity(k);
    for idx in picked {
        let (i, j) = candidates[idx];
        out.push(ReExample {
            input: pair_input(sent, spans, i, j)?,
            label: RelationType::null(),
            polarity: Polarity::NegativeScheme1,
        });
    }

    let take2 = want_scheme2 + (want_scheme1 - take1);
    if take2 > 0 && !spans.is_empty() && !ctx.types.is_empty() {
        let local: Vec<String> = sent
            .tokens
            .iter()
            .filter(|t| !is_punct_token(&t.text))
            .map(|t| normalize_token(&t.text))
            .filter(|w| w_o.contains(w) && !ctx.excluded.contains(w))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pool = if local.is_empty() {
            &ctx.global_words
        } else {
            &local
        };
        if !pool.is_empty() {
            for _ in 0..take2 {
                let anchor = &spans[rng.gen_range(0..spans.len())];
                let word = &pool[rng.gen_range(0..pool.len())];
                let wtype = &ctx.types[rng.gen_range(0..ctx.types.len())];
                let anchor_text = sent.span_text(anchor.start, anchor.end);
                let input = if rng.gen_bool(0.5) {
                    ReInput::new(
                        sent.id.clone(),
                        word,
                        wtype,
                        &anchor_text,
                        &anchor.etype,
                        &sent.text,
                    )?
                } else {
                    ReInput::new(
                        sent.id.clone(),
                        &anchor_text,
                        &anchor.etype,
                        word,
                        wtype,
                        &sent.text,
                    )?
                };
                out.push(ReExample {
                    input,
                    label: RelationType::null(),
                    polarity: Polarity::NegativeScheme2,
                });
            }
        }
    }
    if out.len() < k {
        log::debug!("{}: produced {} of {k} negatives", sent.id, out.len());
    }
    Ok(out)
}

fn is_unrelated(kb: &KnowledgeBase<'_>, h: &MatchSpan, t: &MatchSpan) -> bool {
    let kg_related = h.source == MatchSource::CoarseKg
        && t.source == MatchSource::CoarseKg
        && kb.kg.is_related(h.entity_id.as_str(), t.entity_id.as_str());
    !kg_related && !kb.t_conf.contains_pair(&h.entity_ref(), &t.entity_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_formula() {
        assert_eq!(negative_count(0, 0.2), 0);
        assert_eq!(negative_count(4, 0.2), 1);
        assert_eq!(negative_count(5, 0.2), 2);
        assert_eq!(negative_count(1, 0.2), 1);
        assert_eq!(negative_count(3, 0.5), 3);
        assert_eq!(negative_count(10, 0.0), 0);
    }
}
