use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const EOS: &str = "[EOS]";
pub const UNK: &str = "[UNK]";
pub const SPECIALS: [&str; 4] = [CLS, SEP, EOS, UNK];
pub const MAX_TOKENS: usize = 512;

/// Splits text into tokens. Model-specific subword tokenizers plug in here.
pub trait Tokenizer: Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Word runs and single punctuation characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegexTokenizer;

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\w+|[^\w\s]").expect("static regex"));

impl Tokenizer for RegexTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        TOKEN.find_iter(text).map(|m| m.as_str().to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BimodalSequence {
    pub tokens: Vec<String>,
    pub words_kept: usize,
    pub code_kept: usize,
    pub truncated: bool,
}

impl BimodalSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.tokens[1..1 + self.words_kept]
    }

    pub fn code(&self) -> &[String] {
        let start = 2 + self.words_kept;
        &self.tokens[start..start + self.code_kept]
    }
}

/// Splits `budget` content slots between segments of length `nw` and `nc`.
fn allocate(nw: usize, nc: usize, budget: usize) -> (usize, usize) {
    if nw + nc <= budget {
        return (nw, nc);
    }
    let mut w = budget * nw / (nw + nc);
    if nw > 0 && w == 0 {
        w = 1;
    }
    if nc > 0 && w == budget {
        w = budget - 1;
    }
    let mut c = budget - w;
    // Hand unused slots to the other segment.
    if c > nc {
        w = (w + c - nc).min(nw);
        c = nc;
    }
    if w > nw {
        c = (c + w - nw).min(nc);
        w = nw;
    }
    (w, c)
}

fn sanitize(tokens: &[String]) -> impl Iterator<Item = String> + '_ {
    tokens.iter().map(|t| if SPECIALS.contains(&t.as_str()) { UNK.to_string() } else { t.clone() })
}

/// Builds `[CLS] words [SEP] code [EOS]` within `max_len` tokens. When too
/// long, the content budget is split in proportion to the segment lengths
/// (each non-empty segment keeps at least one token) and each segment is cut
/// at its tail.
pub fn pack_sequence(words: &[String], code: &[String], max_len: usize) -> Result<BimodalSequence> {
    if words.is_empty() && code.is_empty() {
        return Err(Error::invalid("both the text and the code segment are empty"));
    }
    if max_len < 5 {
        return Err(Error::config(format!("sequence limit {max_len} leaves no room for both segments")));
    }
    let (w, c) = allocate(words.len(), code.len(), max_len - 3);
    let mut tokens = Vec::with_capacity(w + c + 3);
    tokens.push(CLS.to_string());
    tokens.extend(sanitize(&words[..w]));
    tokens.push(SEP.to_string());
    tokens.extend(sanitize(&code[..c]));
    tokens.push(EOS.to_string());
    Ok(BimodalSequence { tokens, words_kept: w, code_kept: c, truncated: w < words.len() || c < code.len() })
}

/// Token-to-id table with the special markers at ids 0 to 3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    ids: BTreeMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary { ids: SPECIALS.iter().enumerate().map(|(i, s)| (s.to_string(), i as u32)).collect() }
    }
}

impl Vocabulary {
    /// Vocabulary of all tokens in `sequences`, numbered in first-seen order.
    pub fn build<'a>(sequences: impl IntoIterator<Item = &'a BimodalSequence>) -> Self {
        let mut v = Vocabulary::default();
        for s in sequences {
            for t in &s.tokens {
                let next = v.ids.len() as u32;
                v.ids.entry(t.clone()).or_insert(next);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(3)
    }

    pub fn encode(&self, seq: &BimodalSequence) -> Vec<u32> {
        seq.tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Cochran sample size with finite population correction. `n0` is rounded
/// up before the correction is applied.
pub fn cochran_n(z: f64, p: f64, margin: f64, population: Option<u64>) -> Result<u64> {
    if !(z > 0.0 && z.is_finite()) || !(p > 0.0 && p < 1.0) || !(margin > 0.0 && margin < 1.0) {
        return Err(Error::invalid(format!("invalid sample size inputs z={z}, p={p}, e={margin}")));
    }
    let n0 = (z * z * p * (1.0 - p) / (margin * margin)).ceil();
    match population {
        None => Ok(n0 as u64),
        Some(0) => Err(Error::invalid("population size must be positive")),
        Some(n) => Ok(((n0 / (1.0 + (n0 - 1.0) / n as f64)).ceil() as u64).min(n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(n: usize, p: &str) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn short_inputs_are_kept() {
        let s = pack_sequence(&toks(3, "w"), &toks(2, "c"), MAX_TOKENS).unwrap();
        assert_eq!(s.tokens, ["[CLS]", "w0", "w1", "w2", "[SEP]", "c0", "c1", "[EOS]"]);
        assert!(!s.truncated);
        let only_code = pack_sequence(&[], &toks(2, "c"), MAX_TOKENS).unwrap();
        assert_eq!(only_code.tokens, ["[CLS]", "[SEP]", "c0", "c1", "[EOS]"]);
        assert!(pack_sequence(&[], &[], MAX_TOKENS).is_err());
    }

    #[test]
    fn proportional_truncation() {
        let s = pack_sequence(&toks(600, "w"), &toks(600, "c"), MAX_TOKENS).unwrap();
        assert_eq!((s.words_kept, s.code_kept), (254, 255));
        assert_eq!(s.len(), 512);
        assert_eq!(s.words().last().unwrap(), "w253");
        let lopsided = pack_sequence(&toks(5000, "w"), &toks(1, "c"), MAX_TOKENS).unwrap();
        assert_eq!((lopsided.words_kept, lopsided.code_kept), (508, 1));
        let slack = pack_sequence(&toks(1000, "w"), &toks(100, "c"), MAX_TOKENS).unwrap();
        assert_eq!((slack.words_kept, slack.code_kept), (462, 47));
    }

    #[test]
    fn special_markers_in_content_become_unknown() {
        let s = pack_sequence(&["[SEP]".to_string()], &["x".to_string()], MAX_TOKENS).unwrap();
        assert_eq!(s.tokens.iter().filter(|t| *t == SEP).count(), 1);
        assert_eq!(s.tokens[1], UNK);
        let v = Vocabulary::build([&s]);
        assert_eq!(v.encode(&s), vec![0, 3, 1, 4, 2]);
        assert_eq!(v.id("never"), 3);
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(RegexTokenizer.tokenize("f(x, y_1);"), ["f", "(", "x", ",", "y_1", ")", ";"]);
    }

    #[test]
    fn cochran_values() {
        assert_eq!(cochran_n(1.96, 0.5, 0.05, None).unwrap(), 385);
        assert_eq!(cochran_n(1.96, 0.5, 0.05, Some(760_809)).unwrap(), 385);
        assert_eq!(cochran_n(1.96, 0.5, 0.05, Some(100)).unwrap(), 80);
        assert_eq!(cochran_n(1.96, 0.5, 0.5, None).unwrap(), 4);
        assert_eq!(cochran_n(1.96, 0.5, 0.05, Some(10)).unwrap(), 10);
        assert!(cochran_n(1.96, 0.0, 0.05, None).is_err());
        assert!(cochran_n(1.96, 0.5, 0.05, Some(0)).is_err());
    }

    proptest! {
        #[test]
        fn packed_length_and_markers(nw in 0usize..1500, nc in 0usize..1500, max_len in 5usize..700) {
            prop_assume!(nw + nc > 0);
            let s = pack_sequence(&toks(nw, "w"), &toks(nc, "c"), max_len).unwrap();
            prop_assert!(s.len() <= max_len);
            prop_assert_eq!(s.tokens.iter().filter(|t| SPECIALS.contains(&t.as_str())).count(), 3);
            prop_assert!(nw == 0 || s.words_kept >= 1);
            prop_assert!(nc == 0 || s.code_kept >= 1);
            prop_assert_eq!(s.truncated, nw + nc > max_len - 3);
        }
    }
}
