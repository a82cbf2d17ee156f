//! Token-level multi-pattern matcher over normalized surface forms.
//!
//! Surfaces are stored in a trie keyed by interned token ids. Matching
//! is leftmost-longest and non-overlapping: from the current position the
//! longest surface wins, the scan then resumes after it. The coarse-KG
//! trie is built once and shared; discovered entities live in a small
//! overlay trie that is rebuilt whenever the confident entity set changes.

use std::cmp::Ordering;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::discovery::CandidateEntity;
use crate::kg::{normalize_token, EntityId, EntityRef, EntityType, KnowledgeGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchSource {
    CoarseKg,
    Discovered,
}

/// A matched entity occurrence, `[start, end)` in token positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpan {
    pub start: usize,
    pub end: usize,
    pub entity_id: EntityId,
    pub etype: EntityType,
    pub source: MatchSource,
    /// Normalized surface key that matched.
    pub surface: String,
}

impl MatchSpan {
    pub fn entity_ref(&self) -> EntityRef {
        match self.source {
            MatchSource::CoarseKg => EntityRef::Known(self.entity_id.clone()),
            MatchSource::Discovered => EntityRef::Candidate {
                surface: self.surface.clone(),
                etype: self.etype.clone(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    source: MatchSource,
    entity_id: EntityId,
    etype: EntityType,
    surface: Arc<str>,
}

impl Entry {
    /// Tie-break among entries sharing one surface: coarse KG first, then
    /// smallest id, then smallest type.
    fn preference(&self, other: &Entry) -> Ordering {
        (self.source, &self.entity_id, &self.etype).cmp(&(
            other.source,
            &other.entity_id,
            &other.etype,
        ))
    }
}

#[derive(Debug, Default)]
struct TokenTrie {
    vocab: FxHashMap<String, u32>,
    edges: FxHashMap<(u32, u32), u32>,
    // best entry per node, index into `entries`
    terminal: Vec<Option<u32>>,
    entries: Vec<Entry>,
    patterns: usize,
}

impl TokenTrie {
    fn new() -> Self {
        TokenTrie {
            terminal: vec![None],
            ..Default::default()
        }
    }

    fn insert(&mut self, key: &str, entry: Entry) {
        if key.is_empty() {
            return;
        }
        let mut node = 0u32;
        for tok in key.split(' ') {
            let next_vocab = self.vocab.len() as u32;
            let tid = *self.vocab.entry(tok.to_string()).or_insert(next_vocab);
            node = match self.edges.get(&(node, tid)) {
                Some(&child) => child,
                None => {
                    let child = self.terminal.len() as u32;
                    self.terminal.push(None);
                    self.edges.insert((node, tid), child);
                    child
                }
            };
        }
        let slot = &mut self.terminal[node as usize];
        match slot {
            Some(existing) => {
                if entry.preference(&self.entries[*existing as usize]) == Ordering::Less {
                    self.entries[*existing as usize] = entry;
                }
            }
            None => {
                *slot = Some(self.entries.len() as u32);
                self.entries.push(entry);
                self.patterns += 1;
            }
        }
    }

    fn token_ids(&self, norm: &[String]) -> Vec<Option<u32>> {
        norm.iter()
            .map(|t| self.vocab.get(t.as_str()).copied())
            .collect()
    }

    /// Longest match starting at `start`: `(end, entry index)`.
    fn longest_at(&self, ids: &[Option<u32>], start: usize) -> Option<(usize, u32)> {
        let mut node = 0u32;
        let mut best = None;
        for (i, tid) in ids.iter().enumerate().skip(start) {
            let Some(tid) = tid else { break };
            let Some(&child) = self.edges.get(&(node, *tid)) else {
                break;
            };
            node = child;
            if let Some(e) = self.terminal[node as usize] {
                best = Some((i + 1, e));
            }
        }
        best
    }
}

/// Matcher over the coarse KG plus an optional set of discovered entities.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    base: Arc<TokenTrie>,
    overlay: Option<Arc<TokenTrie>>,
}

impl Gazetteer {
    pub fn from_kg(kg: &KnowledgeGraph) -> Self {
        let mut trie = TokenTrie::new();
        let mut keys: Vec<(&str, &[EntityId])> = kg.surface_keys().collect();
        keys.sort_unstable_by_key(|(k, _)| *k);
        for (key, ids) in keys {
            let surface: Arc<str> = Arc::from(key);
            for id in ids {
                let etype = kg.entity(id.as_str()).expect("indexed id").etype.clone();
                trie.insert(
                    key,
                    Entry {
                        source: MatchSource::CoarseKg,
                        entity_id: id.clone(),
                        etype,
                        surface: surface.clone(),
                    },
                );
            }
        }
        Gazetteer {
            base: Arc::new(trie),
            overlay: None,
        }
    }

    /// Same coarse trie, with `entities` as the discovered overlay.
    pub fn with_discovered<'a>(
        &self,
        entities: impl IntoIterator<Item = &'a CandidateEntity>,
    ) -> Self {
        let mut trie = TokenTrie::new();
        for c in entities {
            trie.insert(
                &c.surface,
                Entry {
                    source: MatchSource::Discovered,
                    entity_id: EntityId::discovered(&c.surface),
                    etype: c.etype.clone(),
                    surface: Arc::from(c.surface.as_str()),
                },
            );
        }
        Gazetteer {
            base: Arc::clone(&self.base),
            overlay: (trie.patterns > 0).then(|| Arc::new(trie)),
        }
    }

    pub fn new<'a>(
        kg: &KnowledgeGraph,
        e_conf: impl IntoIterator<Item = &'a CandidateEntity>,
    ) -> Self {
        Self::from_kg(kg).with_discovered(e_conf)
    }

    pub fn pattern_count(&self) -> usize {
        self.base.patterns + self.overlay.as_ref().map_or(0, |o| o.patterns)
    }

    /// Leftmost-longest non-overlapping matches over `tokens`.
    pub fn find_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<MatchSpan> {
        let norm: Vec<String> = tokens.iter().map(|t| normalize_token(t.as_ref())).collect();
        let base_ids = self.base.token_ids(&norm);
        let overlay_ids = self.overlay.as_ref().map(|o| o.token_ids(&norm));

        let mut out = Vec::new();
        let mut i = 0;
        while i < norm.len() {
            let mut best: Option<(usize, &Entry)> = self
                .base
                .longest_at(&base_ids, i)
                .map(|(end, e)| (end, &self.base.entries[e as usize]));
            if let (Some(ov), Some(ids)) = (&self.overlay, &overlay_ids) {
                if let Some((end, e)) = ov.longest_at(ids, i) {
                    let cand = &ov.entries[e as usize];
                    let better = match best {
                        None => true,
                        Some((bend, bentry)) => {
                            end > bend || (end == bend && cand.preference(bentry) == Ordering::Less)
                        }
                    };
                    if better {
                        best = Some((end, cand));
                    }
                }
            }
            match best {
                Some((end, e)) => {
                    out.push(MatchSpan {
                        start: i,
                        end,
                        entity_id: e.entity_id.clone(),
                        etype: e.etype.clone(),
                        source: e.source,
                        surface: e.surface.to_string(),
                    });
                    i = end;
                }
                None => i += 1,
            }
        }
        out
    }
}

/// Finds gazetteer entities in a sentence.
pub fn entity_matching(sent: &Sentence, gazetteer: &Gazetteer) -> Vec<MatchSpan> {
    gazetteer.find_tokens(&sent.token_texts())
}
