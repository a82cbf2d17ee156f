//! Fine-domain text ingestion: cleanup, sentence segmentation, tokenization,
//! length filtering and seeded partitioning into disjoint sub-corpora.

mod io;
mod segment;
mod tokenize;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::util::rng_for;
use crate::{Error, Result};

pub use io::{read_raw_corpus, read_sentences, write_sentences, RawCorpus, RawDoc};
pub use segment::{normalize_text, split_sentences};
pub use tokenize::{is_punct, is_punct_token, token_strings, tokenize, Token};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Builds a sentence by tokenizing `text`. Fails when it has no tokens.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let tokens = tokenize(&text);
        if tokens.is_empty() {
            return Err(Error::Precondition("sentence has no tokens".into()));
        }
        Ok(Sentence {
            id: id.into(),
            text,
            tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Original text covered by tokens `[start, end)`.
    pub fn span_text(&self, start: usize, end: usize) -> String {
        let from = self.tokens[start].start;
        let to = self.tokens[end - 1].end;
        self.text.chars().skip(from).take(to - from).collect()
    }

    /// Number of tokens that carry at least one alphanumeric character.
    pub fn word_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| !is_punct_token(&t.text))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubCorpus {
    /// 1-based partition number.
    pub index: usize,
    pub sentences: Vec<Sentence>,
}

impl SubCorpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_len: 5,
            max_len: 128,
        }
    }
}

/// Cleans, segments, tokenizes and length-filters documents.
///
/// Length bounds count word tokens; standalone punctuation does not count.
pub fn preprocess<'a, I>(docs: I, cfg: &PreprocessConfig) -> Vec<Sentence>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut out = Vec::new();
    for (doc_id, text) in docs {
        let clean = normalize_text(text);
        for (offset, sent) in split_sentences(&clean) {
            let tokens = tokenize(sent);
            if tokens.is_empty() {
                continue;
            }
            let s = Sentence {
                id: format!("{doc_id}:{offset}"),
                text: sent.to_string(),
                tokens,
            };
            let words = s.word_count();
            if words >= cfg.min_len && words <= cfg.max_len {
                out.push(s);
            }
        }
    }
    out
}

/// Seeded shuffle followed by a balanced split into `n` parts.
pub fn partition(sentences: &[Sentence], n: usize, seed: u64) -> Result<Vec<SubCorpus>> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "partition count must be at least 1".into(),
        ));
    }
    if n > sentences.len() {
        return Err(Error::InvalidInput(format!(
            "cannot split {} sentences into {n} partitions",
            sentences.len()
        )));
    }
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.shuffle(&mut rng_for(seed, "partition"));

    let base = sentences.len() / n;
    let extra = sentences.len() % n;
    let mut parts = Vec::with_capacity(n);
    let mut cursor = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        let sents = order[cursor..cursor + size]
            .iter()
            .map(|&j| sentences[j].clone())
            .collect();
        parts.push(SubCorpus {
            index: i + 1,
            sentences: sents,
        });
        cursor += size;
    }
    Ok(parts)
}
