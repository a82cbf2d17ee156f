use serde::{Deserialize, Serialize};

/// A token with character (Unicode scalar) offsets into its source string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, usize, usize)", into = "(String, usize, usize)")]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl From<(String, usize, usize)> for Token {
    fn from((text, start, end): (String, usize, usize)) -> Self {
        Token { text, start, end }
    }
}

impl From<Token> for (String, usize, usize) {
    fn from(t: Token) -> Self {
        (t.text, t.start, t.end)
    }
}

/// Any non-alphanumeric, non-whitespace character is punctuation and
/// always forms a token of its own.
pub fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

pub fn is_punct_token(tok: &str) -> bool {
    tok.chars().all(is_punct)
}

/// Splits on whitespace and isolates every punctuation character.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_whitespace() || is_punct(c) {
            if !word.is_empty() {
                out.push(Token {
                    text: std::mem::take(&mut word),
                    start: word_start,
                    end: pos,
                });
            }
            if is_punct(c) {
                out.push(Token {
                    text: c.to_string(),
                    start: pos,
                    end: pos + 1,
                });
            }
        } else {
            if word.is_empty() {
                word_start = pos;
            }
            word.push(c);
        }
        pos += 1;
    }
    if !word.is_empty() {
        out.push(Token {
            text: word,
            start: word_start,
            end: pos,
        });
    }
    out
}

/// Token texts only, for callers that do not need offsets.
pub fn token_strings(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}
