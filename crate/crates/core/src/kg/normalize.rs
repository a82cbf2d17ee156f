use crate::corpus::{is_punct_token, token_strings};

/// Case-folded form of a single token.
pub fn normalize_token(token: &str) -> String {
    token.to_lowercase()
}

/// Canonical matching key for a surface form: tokenized, case-folded,
/// leading/trailing punctuation tokens removed, tokens joined by one space.
///
/// Tokenizing means internal whitespace collapses and punctuation is
/// separated, so `"CD8+T  cells"` and `"cd8 + t cells"` share a key.
pub fn normalize_surface(surface: &str) -> String {
    let toks = token_strings(surface);
    join_normalized(&toks)
}

/// Key for an already-tokenized span.
pub fn join_normalized<S: AsRef<str>>(tokens: &[S]) -> String {
    let first = tokens.iter().position(|t| !is_punct_token(t.as_ref()));
    let Some(first) = first else {
        return String::new();
    };
    let last = tokens
        .iter()
        .rposition(|t| !is_punct_token(t.as_ref()))
        .unwrap_or(first);
    let mut out = String::new();
    for (i, t) in tokens[first..=last].iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&normalize_token(t.as_ref()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_and_whitespace() {
        assert_eq!(normalize_surface("  Severe   Headache "), "severe headache");
    }

    #[test]
    fn strips_edge_punctuation_only() {
        assert_eq!(normalize_surface("(Aspirin)."), "aspirin");
        assert_eq!(normalize_surface("CD8+T cells"), "cd8 + t cells");
        assert_eq!(normalize_surface("..."), "");
    }
}
