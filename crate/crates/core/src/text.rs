//! Small text utilities shared by the grammars and the analysers.

use alloc::string::String;
use alloc::vec::Vec;

/// Trims, collapses internal whitespace runs to one space and lowercases.
///
/// Final answers are compared after this normalization.
pub fn normalize_answer(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out.to_lowercase()
}

pub fn answers_match(candidate: &str, expected: &str) -> bool {
    normalize_answer(candidate) == normalize_answer(expected)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Lowercased words of `text`, where a word is a maximal run of
/// alphanumerics and underscores.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !is_word_char(c))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// Case-insensitive whole-word search. `term` may itself span several words
/// ("search google" matches "Search  Google"), but a term is never matched
/// inside a longer word (`web` does not match `web_agent`).
pub fn contains_word(text: &str, term: &str) -> bool {
    let needle = words(term);
    if needle.is_empty() {
        return false;
    }
    let hay = words(text);
    hay.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Case-insensitive substring test.
pub fn contains_ci(text: &str, needle: &str) -> bool {
    text.to_lowercase().contains(&needle.to_lowercase())
}
