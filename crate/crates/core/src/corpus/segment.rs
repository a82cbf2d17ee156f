/// Words ending in a period that never close a sentence (lowercased).
const ABBREVIATIONS: &[&str] = &[
    "al.", "approx.", "ca.", "cf.", "dr.", "e.g.", "eq.", "eqs.", "fig.", "figs.", "i.e.", "incl.",
    "mr.", "mrs.", "ms.", "no.", "nos.", "prof.", "ref.", "refs.", "resp.", "sec.", "st.",
    "suppl.", "tab.", "viz.", "vol.", "vs.",
];

/// Drops control characters (control whitespace becomes a space), collapses
/// whitespace runs into one space and trims both ends.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        let c = if c.is_control() {
            if c.is_whitespace() {
                ' '
            } else {
                continue;
            }
        } else {
            c
        };
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(c);
    }
    out
}

/// Rule-based segmentation of normalized text. A sentence ends at `.`, `?`
/// or `!` followed by whitespace and an uppercase letter or digit, unless
/// the word carrying the period is a known abbreviation.
///
/// Returns `(char offset, sentence)` pairs.
pub fn split_sentences(text: &str) -> Vec<(usize, &str)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0; // index into `chars`
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if matches!(c, '.' | '?' | '!')
            && i + 2 < chars.len()
            && chars[i + 1].1.is_whitespace()
            && (chars[i + 2].1.is_uppercase() || chars[i + 2].1.is_ascii_digit())
            && !(c == '.' && ends_with_abbreviation(&chars[start..=i]))
        {
            push_trimmed(text, &chars, start, i + 1, &mut out);
            start = i + 2;
            i += 2;
            continue;
        }
        i += 1;
    }
    push_trimmed(text, &chars, start, chars.len(), &mut out);
    out
}

fn push_trimmed<'a>(
    text: &'a str,
    chars: &[(usize, char)],
    mut from: usize,
    mut to: usize,
    out: &mut Vec<(usize, &'a str)>,
) {
    while from < to && chars[from].1.is_whitespace() {
        from += 1;
    }
    while to > from && chars[to - 1].1.is_whitespace() {
        to -= 1;
    }
    if from == to {
        return;
    }
    let byte_from = chars[from].0;
    let byte_to = chars.get(to).map_or(text.len(), |&(b, _)| b);
    out.push((from, &text[byte_from..byte_to]));
}

fn ends_with_abbreviation(chars: &[(usize, char)]) -> bool {
    let word: String = chars
        .iter()
        .rev()
        .take_while(|(_, c)| !c.is_whitespace())
        .map(|&(_, c)| c)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .flat_map(char::to_lowercase)
        .collect();
    ABBREVIATIONS.contains(&word.as_str())
}
