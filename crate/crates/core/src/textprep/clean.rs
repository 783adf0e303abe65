use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Canonical composition (NFC).
pub fn nfc_normalize(text: &str) -> String {
    text.nfc().collect()
}

/// NFC of raw bytes; invalid UTF-8 is an error.
pub fn nfc_normalize_bytes(bytes: &[u8]) -> Result<String> {
    let s = std::str::from_utf8(bytes).map_err(|e| Error::invalid(format!("invalid UTF-8: {e}")))?;
    Ok(nfc_normalize(s))
}

static LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z][A-Za-z0-9+.\-]*://\S+").expect("static regex"));

/// Default English stopword list.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "you", "your", "yours", "yourself", "yourselves",
];

pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Text pieces split into link spans and plain spans.
fn segments(text: &str) -> Vec<(bool, &str)> {
    let mut out = Vec::new();
    let mut last = 0;
    for m in LINK.find_iter(text) {
        if m.start() > last {
            out.push((false, &text[last..m.start()]));
        }
        out.push((true, m.as_str()));
        last = m.end();
    }
    if last < text.len() {
        out.push((false, &text[last..]));
    }
    out
}

/// Deletes punctuation and symbols outside links. Whitespace and letter
/// case are left alone.
pub fn strip_punctuation(text: &str) -> String {
    segments(text)
        .into_iter()
        .map(|(link, s)| {
            if link {
                s.to_string()
            } else {
                s.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect()
            }
        })
        .collect()
}

/// Full text cleaning: punctuation removal outside links, lowercasing
/// outside links, stopword removal and whitespace collapsing. Links keep
/// their original bytes.
pub fn clean_text(text: &str, stopwords: &BTreeSet<String>) -> String {
    let stripped = strip_punctuation(text);
    let mut tokens: Vec<String> = Vec::new();
    for (link, s) in segments(&stripped) {
        if link {
            tokens.push(s.to_string());
            continue;
        }
        for w in s.split_whitespace() {
            let w = w.to_lowercase();
            if !stopwords.contains(&w) {
                tokens.push(w);
            }
        }
    }
    tokens.join(" ")
}

/// Link spans found in `text`.
pub fn find_links(text: &str) -> Vec<&str> {
    LINK.find_iter(text).map(|m| m.as_str()).collect()
}
