use serde::{Deserialize, Serialize};

use super::comments::Language;
use crate::error::{Error, Result};

/// Where a language label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// A trained identification model.
    Model,
    /// The keyword scoring fallback in this module.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageGuess {
    /// `None` when the snippet matches none of the supported languages.
    pub language: Option<Language>,
    pub source: LabelSource,
}

/// Assigns a programming language to a code snippet. A trained model can be
/// plugged in through this trait; [`KeywordIdentifier`] is the built-in
/// fallback.
pub trait LanguageIdentifier: Sync {
    fn identify(&self, snippet: &str) -> Result<LanguageGuess>;
}

/// Scores each language by weighted keyword and token-pattern hits.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordIdentifier;

const CUES: &[(Language, &[(&str, u32)])] = &[
    (
        Language::Sql,
        &[
            ("select ", 3), (" from ", 2), ("where ", 2), ("insert into", 4), ("create table", 4), ("update ", 1),
            (" join ", 2), ("group by", 3), ("order by", 3), ("delete from", 4),
        ],
    ),
    (
        Language::JavaScript,
        &[
            ("function", 2), ("var ", 2), ("let ", 2), ("const ", 2), ("=>", 2), ("console.log", 4), ("document.", 4),
            ("$(", 3), ("===", 3), ("undefined", 2), ("require(", 3),
        ],
    ),
    (
        Language::Python,
        &[
            ("def ", 2), ("import ", 1), ("self", 2), ("print(", 2), ("elif ", 4), ("none", 1), ("__init__", 4),
            ("lambda ", 2), ("from ", 1), (":\n", 2),
        ],
    ),
    (
        Language::Ruby,
        &[
            ("def ", 2), ("end\n", 3), ("puts ", 4), ("require '", 3), ("do |", 4), (".each", 2), ("attr_", 4),
            ("@", 1), ("elsif ", 4), ("nil", 2), ("=begin", 4),
        ],
    ),
    (
        Language::Java,
        &[
            ("public ", 2), ("private ", 2), ("static void", 4), ("class ", 1), ("new ", 1), ("system.out", 4),
            ("string[]", 4), ("import java", 5), ("@override", 4), ("void ", 2), ("int ", 1),
        ],
    ),
];

impl LanguageIdentifier for KeywordIdentifier {
    fn identify(&self, snippet: &str) -> Result<LanguageGuess> {
        if snippet.trim().is_empty() {
            return Err(Error::invalid("cannot identify the language of an empty snippet"));
        }
        let lower = snippet.to_lowercase();
        let mut best: Option<(Language, u32)> = None;
        for (lang, cues) in CUES {
            let score: u32 = cues.iter().map(|(cue, w)| lower.matches(cue).count() as u32 * w).sum();
            if score > 0 && best.is_none_or(|(_, s)| score > s) {
                best = Some((*lang, score));
            }
        }
        Ok(LanguageGuess { language: best.map(|b| b.0), source: LabelSource::Heuristic })
    }
}

/// Keeps snippets whose identified language is one of the supported ones,
/// paired with that language.
pub fn filter_snippets<'a>(
    snippets: &'a [String],
    identifier: &dyn LanguageIdentifier,
) -> Result<Vec<(&'a str, Language)>> {
    let mut kept = Vec::new();
    for s in snippets {
        if s.trim().is_empty() {
            continue;
        }
        if let Some(lang) = identifier.identify(s)?.language {
            kept.push((s.as_str(), lang));
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recognizes_typical_snippets() {
        let id = KeywordIdentifier;
        let cases = [
            ("SELECT name FROM users WHERE id = 1 ORDER BY name", Language::Sql),
            ("const x = () => { console.log(x === undefined); }", Language::JavaScript),
            ("def f(self):\n    if x:\n        return None\n    elif y:\n        pass", Language::Python),
            ("class Foo\n  def bar\n    puts 'hi'\n  end\nend\n", Language::Ruby),
            ("public static void main(String[] args) { System.out.println(1); }", Language::Java),
        ];
        for (src, want) in cases {
            let g = id.identify(src).unwrap();
            assert_eq!(g.language, Some(want), "{src}");
            assert_eq!(g.source, LabelSource::Heuristic);
        }
    }

    #[test]
    fn empty_and_unknown() {
        assert!(KeywordIdentifier.identify("  \n").is_err());
        assert_eq!(KeywordIdentifier.identify("10 20 30").unwrap().language, None);
        let snippets = vec!["42".to_string(), "puts 'x'\nend\n".to_string(), String::new()];
        let kept = filter_snippets(&snippets, &KeywordIdentifier).unwrap();
        assert_eq!(kept, vec![("puts 'x'\nend\n", Language::Ruby)]);
    }
}
