//! Query tokenizer shared by the corpus, the catalog encoder and query
//! reformulation.
//!
//! Text is lowercased and split on whitespace. `.`, `#`, `+` and `-` survive
//! inside a token (`c#`, `c++`, `java.lang`, `32-bit`, `.net`); apostrophes are
//! dropped and every other punctuation character acts as a separator. Trailing
//! `.`/`-` and leading `-` are trimmed so sentence punctuation does not leak
//! into terms.

const KEPT: [char; 4] = ['.', '#', '+', '-'];

pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut out = Vec::new();
    let mut current = String::new();
    for c in lowered.chars() {
        if c.is_whitespace() {
            flush(&mut current, &mut out);
        } else if c == '\'' || c == '\u{2019}' {
            continue;
        } else if c.is_alphanumeric() || KEPT.contains(&c) {
            current.push(c);
        } else {
            flush(&mut current, &mut out);
        }
    }
    flush(&mut current, &mut out);
    out
}

fn flush(current: &mut String, out: &mut Vec<String>) {
    if current.is_empty() {
        return;
    }
    let trimmed = current
        .trim_end_matches(['.', '-'])
        .trim_start_matches('-');
    if trimmed.chars().any(|c| c.is_alphanumeric() || c == '#' || c == '+') {
        out.push(trimmed.to_string());
    }
    current.clear();
}

/// True when `token` could have been produced by [`tokenize`]: non-empty and
/// free of whitespace.
pub fn is_valid_token(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_whitespace)
}
