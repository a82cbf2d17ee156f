use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::MatchSpan;
use crate::corpus::Sentence;
use crate::kg::{EntityType, RelationType};
use crate::{Error, Result};

/// One BIO tag. Rendered as `O`, `B-<type>` or `I-<type>` where spaces in
/// the type name become underscores.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BioTag {
    O,
    B(EntityType),
    I(EntityType),
}

impl BioTag {
    pub fn etype(&self) -> Option<&EntityType> {
        match self {
            BioTag::O => None,
            BioTag::B(t) | BioTag::I(t) => Some(t),
        }
    }

    /// Whether this tag may follow `prev` (`None` at sentence start).
    pub fn may_follow(&self, prev: Option<&BioTag>) -> bool {
        match self {
            BioTag::I(t) => matches!(prev, Some(BioTag::B(p)) | Some(BioTag::I(p)) if p == t),
            _ => true,
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::O => f.write_str("O"),
            BioTag::B(t) => write!(f, "B-{}", t.label_slug()),
            BioTag::I(t) => write!(f, "I-{}", t.label_slug()),
        }
    }
}

impl FromStr for BioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_type = |slug: &str| {
            if slug.is_empty() {
                Err(Error::InvalidInput(format!("BIO label {s:?} has no type")))
            } else {
                Ok(EntityType::new(slug.replace('_', " ")))
            }
        };
        match s {
            "O" => Ok(BioTag::O),
            _ if s.starts_with("B-") => Ok(BioTag::B(parse_type(&s[2..])?)),
            _ if s.starts_with("I-") => Ok(BioTag::I(parse_type(&s[2..])?)),
            _ => Err(Error::InvalidInput(format!("invalid BIO label {s:?}"))),
        }
    }
}

impl Serialize for BioTag {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BioTag {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Checks the BIO grammar: `I-t` only after `B-t` or `I-t`.
pub fn is_valid_bio(labels: &[BioTag]) -> bool {
    let mut prev = None;
    for tag in labels {
        if !tag.may_follow(prev) {
            return false;
        }
        prev = Some(tag);
    }
    true
}

/// Maximal `B (I)*` runs as `(start, end, type)`.
pub fn bio_spans(labels: &[BioTag]) -> Vec<(usize, usize, EntityType)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &EntityType)> = None;
    for (i, tag) in labels.iter().enumerate() {
        match tag {
            BioTag::I(t) if matches!(open, Some((_, ot)) if ot == t) => {}
            _ => {
                if let Some((s, t)) = open.take() {
                    out.push((s, i, t.clone()));
                }
                if let BioTag::B(t) | BioTag::I(t) = tag {
                    open = Some((i, t));
                }
            }
        }
    }
    if let Some((s, t)) = open {
        out.push((s, labels.len(), t.clone()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NerExample {
    pub sid: String,
    pub tokens: Vec<String>,
    pub labels: Vec<BioTag>,
}

impl NerExample {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.labels.len() {
            return Err(Error::InvalidInput(format!(
                "{}: {} tokens but {} labels",
                self.sid,
                self.tokens.len(),
                self.labels.len()
            )));
        }
        if !is_valid_bio(&self.labels) {
            return Err(Error::InvalidInput(format!(
                "{}: invalid BIO sequence",
                self.sid
            )));
        }
        Ok(())
    }
}

/// Labels each span's first token `B-<type>` and the rest `I-<type>`.
pub fn build_ner_sample(sent: &Sentence, spans: &[MatchSpan]) -> Result<NerExample> {
    let mut labels = vec![BioTag::O; sent.len()];
    let mut cursor = 0;
    for s in spans {
        if s.start < cursor || s.start >= s.end || s.end > sent.len() {
            return Err(Error::Precondition(format!(
                "{}: spans must be sorted, non-overlapping and in bounds (got [{}, {}))",
                sent.id, s.start, s.end
            )));
        }
        labels[s.start] = BioTag::B(s.etype.clone());
        for l in &mut labels[s.start + 1..s.end] {
            *l = BioTag::I(s.etype.clone());
        }
        cursor = s.end;
    }
    Ok(NerExample {
        sid: sent.id.clone(),
        tokens: sent.tokens.iter().map(|t| t.text.clone()).collect(),
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    NegativeScheme1,
    NegativeScheme2,
}

/// A relation-classification query: an entity pair in its sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReInput {
    pub sid: String,
    pub head: String,
    pub head_type: EntityType,
    pub tail: String,
    pub tail_type: EntityType,
    /// The rendered template.
    pub text: String,
}

impl ReInput {
    pub fn new(
        sid: impl Into<String>,
        head: &str,
        head_type: &EntityType,
        tail: &str,
        tail_type: &EntityType,
        sentence_text: &str,
    ) -> Result<Self> {
        let text = render_template(
            head,
            head_type.as_str(),
            tail,
            tail_type.as_str(),
            sentence_text,
        )?;
        Ok(ReInput {
            sid: sid.into(),
            head: head.to_string(),
            head_type: head_type.clone(),
            tail: tail.to_string(),
            tail_type: tail_type.clone(),
            text,
        })
    }

    /// Sentence part of the rendered template.
    pub fn sentence(&self) -> &str {
        self.text.splitn(3, " [SEP] ").nth(2).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReExample {
    #[serde(flatten)]
    pub input: ReInput,
    pub label: RelationType,
    pub polarity: Polarity,
}

/// `[CLS] {head} ({head_type}) [SEP] {tail} ({tail_type}) [SEP] {sentence}`
pub fn render_template(
    head: &str,
    head_type: &str,
    tail: &str,
    tail_type: &str,
    sentence_text: &str,
) -> Result<String> {
    if head.is_empty() || tail.is_empty() {
        return Err(Error::Precondition(
            "relation template needs non-empty surfaces".into(),
        ));
    }
    if sentence_text.trim().is_empty() {
        return Err(Error::Precondition(
            "relation template needs a non-empty sentence".into(),
        ));
    }
    Ok(format!(
        "[CLS] {head} ({head_type}) [SEP] {tail} ({tail_type}) [SEP] {sentence_text}"
    ))
}
