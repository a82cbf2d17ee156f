use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_punct_token, Sentence};
use crate::kg::{normalize_surface, normalize_token, KnowledgeGraph};
use crate::util::open_input;
use crate::{Error, Result};

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "before", "being", "between", "both", "but", "by", "can", "could", "did", "do", "does",
    "during", "each", "for", "from", "had", "has", "have", "he", "her", "his", "how", "however",
    "i", "if", "in", "into", "is", "it", "its", "may", "might", "more", "most", "no", "nor", "not",
    "of", "on", "only", "or", "other", "our", "over", "she", "should", "so", "some", "such",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those",
    "through", "to", "under", "up", "was", "we", "were", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "within", "without", "would", "you",
];

pub const DEFAULT_OOD_SIZE: usize = 10_000;

/// Words known not to be coarse-domain entities; used to build negative
/// relation samples where one slot is not an entity at all.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutOfDomainWords {
    words: BTreeSet<String>,
}

impl OutOfDomainWords {
    /// The `limit` most frequent corpus tokens that are not stopwords,
    /// punctuation, numbers or KG surface forms. Ties break alphabetically.
    pub fn from_corpus<'a>(
        sentences: impl IntoIterator<Item = &'a Sentence>,
        kg: &KnowledgeGraph,
        limit: usize,
    ) -> Self {
        let mut counts: FxHashMap<String, usize> = FxHashMap::default();
        for s in sentences {
            for t in &s.tokens {
                if is_punct_token(&t.text) || t.text.chars().all(|c| c.is_numeric()) {
                    continue;
                }
                *counts.entry(normalize_token(&t.text)).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, _)| !STOPWORDS.contains(&w.as_str()) && !kg.has_surface(w))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        OutOfDomainWords {
            words: ranked.into_iter().take(limit).map(|(w, _)| w).collect(),
        }
    }

    /// One word per line. Words that normalize to a KG surface are dropped.
    pub fn from_file(path: &Path, kg: &KnowledgeGraph) -> Result<Self> {
        let reader = BufReader::new(open_input(path)?);
        let mut words = BTreeSet::new();
        let mut dropped = 0usize;
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let w = normalize_surface(line.trim());
            if w.is_empty() {
                continue;
            }
            if kg.has_surface(&w) {
                dropped += 1;
            } else {
                words.insert(w);
            }
        }
        if dropped > 0 {
            log::warn!(
                "{}: {dropped} words are KG surfaces and were dropped",
                path.display()
            );
        }
        Ok(OutOfDomainWords { words })
    }

    pub fn from_words(words: impl IntoIterator<Item = impl Into<String>>) -> Self {
        OutOfDomainWords {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.words.contains(normalized)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
