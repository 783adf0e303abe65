use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Languages kept by the snippet filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "SQL")]
    Sql,
    JavaScript,
    Python,
    Ruby,
    Java,
}

impl Language {
    pub const STUDIED: [Language; 5] = [Language::Sql, Language::JavaScript, Language::Python, Language::Ruby, Language::Java];

    pub fn name(self) -> &'static str {
        match self {
            Language::Sql => "SQL",
            Language::JavaScript => "JavaScript",
            Language::Python => "Python",
            Language::Ruby => "Ruby",
            Language::Java => "Java",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Language::STUDIED
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown language `{s}`")))
    }
}

/// Comment syntax of one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommentRule {
    /// Markers that start a comment running to the end of the line.
    #[serde(default)]
    pub line: Vec<String>,
    /// Open/close pairs of inline block comments and docstrings.
    #[serde(default)]
    pub block: Vec<(String, String)>,
    /// Open/close markers of block comments that must stand on their own
    /// lines (possibly indented); the whole lines are removed.
    #[serde(default)]
    pub line_block: Vec<(String, String)>,
    /// Sequences copied verbatim even though they begin with a comment
    /// marker, such as string interpolation.
    #[serde(default)]
    pub guards: Vec<String>,
    /// Keep a `#!` interpreter line at the very start of the snippet.
    #[serde(default)]
    pub keep_shebang: bool,
    /// Also remove the spaces and tabs that precede a line comment.
    #[serde(default)]
    pub trim_before_line: bool,
}

/// Comment rules keyed by language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommentRuleSet(pub BTreeMap<Language, CommentRule>);

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
    v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

impl Default for CommentRuleSet {
    fn default() -> Self {
        let c_like = CommentRule {
            line: strs(&["//"]),
            block: pairs(&[("/*", "*/")]),
            line_block: vec![],
            guards: strs(&["://"]),
            keep_shebang: false,
            trim_before_line: false,
        };
        let mut m = BTreeMap::new();
        m.insert(Language::Java, c_like.clone());
        m.insert(Language::JavaScript, CommentRule { keep_shebang: true, ..c_like.clone() });
        m.insert(Language::Sql, CommentRule { line: strs(&["--"]), guards: vec![], ..c_like });
        m.insert(
            Language::Python,
            CommentRule {
                line: strs(&["#"]),
                block: pairs(&[("\"\"\"", "\"\"\""), ("'''", "'''")]),
                line_block: vec![],
                guards: vec![],
                keep_shebang: true,
                trim_before_line: true,
            },
        );
        m.insert(
            Language::Ruby,
            CommentRule {
                line: strs(&["#"]),
                block: vec![],
                line_block: pairs(&[("=begin", "=end")]),
                guards: strs(&["#{"]),
                keep_shebang: true,
                trim_before_line: true,
            },
        );
        CommentRuleSet(m)
    }
}

impl CommentRuleSet {
    pub fn from_toml(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn rule(&self, language: Language) -> Result<&CommentRule> {
        self.0.get(&language).ok_or_else(|| Error::invalid(format!("no comment rules for {language}")))
    }
}

fn line_end(code: &str, from: usize) -> usize {
    code[from..].find('\n').map_or(code.len(), |k| from + k)
}

/// If a line starting at `i` opens a line block, returns the byte offset
/// just past the line that closes it (or the end of input).
fn line_block_end(code: &str, i: usize, rule: &CommentRule) -> Option<usize> {
    let line = &code[i..line_end(code, i)];
    let trimmed = line.trim_start_matches([' ', '\t']);
    let (_, close) = rule.line_block.iter().find(|(open, _)| trimmed.starts_with(open.as_str()))?;
    let mut j = line_end(code, i);
    while j < code.len() {
        let start = j + 1;
        let end = line_end(code, start);
        if code[start..end].trim_start_matches([' ', '\t']).starts_with(close.as_str()) {
            return Some((end + 1).min(code.len()));
        }
        j = end;
    }
    Some(code.len())
}

/// Removes line comments, block comments and docstrings. Bytes outside the
/// removed regions are copied unchanged. Comment markers inside ordinary
/// string literals are not recognized as such.
pub fn strip_comments(code: &str, language: Language, rules: &CommentRuleSet) -> Result<String> {
    let rule = rules.rule(language)?;
    let mut out = String::with_capacity(code.len());
    let mut i = 0;
    if rule.keep_shebang && code.starts_with("#!") {
        let e = line_end(code, 0);
        out.push_str(&code[..e]);
        i = e;
    }
    let mut at_line_start = i == 0;
    while i < code.len() {
        if at_line_start {
            if let Some(end) = line_block_end(code, i, rule) {
                i = end;
                continue;
            }
        }
        let rest = &code[i..];
        if let Some(g) = rule.guards.iter().find(|g| rest.starts_with(g.as_str())) {
            out.push_str(g);
            i += g.len();
            at_line_start = false;
            continue;
        }
        if let Some((open, close)) = rule.block.iter().find(|(o, _)| rest.starts_with(o.as_str())) {
            let body = i + open.len();
            i = code[body..].find(close.as_str()).map_or(code.len(), |k| body + k + close.len());
            at_line_start = false;
            continue;
        }
        if rule.line.iter().any(|m| rest.starts_with(m.as_str())) {
            if rule.trim_before_line {
                let kept = out.trim_end_matches([' ', '\t']).len();
                out.truncate(kept);
            }
            i = line_end(code, i);
            continue;
        }
        let ch = rest.chars().next().expect("non-empty rest");
        out.push(ch);
        i += ch.len_utf8();
        at_line_start = ch == '\n';
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn java_line_and_block() {
        let r = CommentRuleSet::default();
        assert_eq!(strip_comments("int x = 1; // note", Language::Java, &r).unwrap(), "int x = 1; ");
        assert_eq!(strip_comments("/* a */ int y;", Language::Java, &r).unwrap(), " int y;");
        assert_eq!(
            strip_comments("String u = \"http://x.org\";", Language::Java, &r).unwrap(),
            "String u = \"http://x.org\";"
        );
    }

    #[test]
    fn python_and_sql() {
        let r = CommentRuleSet::default();
        let py = "def f():\n    \"\"\"Doc.\"\"\"\n    return 1  # one\n";
        assert_eq!(strip_comments(py, Language::Python, &r).unwrap(), "def f():\n    \n    return 1\n");
        assert_eq!(strip_comments("SELECT 1 -- c\nFROM t", Language::Sql, &r).unwrap(), "SELECT 1 \nFROM t");
    }

    #[test]
    fn rules_load_from_toml() {
        let r = CommentRuleSet::from_toml("[Java]\nline = [\"//\"]\n").unwrap();
        assert_eq!(strip_comments("a // b", Language::Java, &r).unwrap(), "a ");
        assert!(strip_comments("x", Language::Ruby, &r).is_err());
    }

    proptest! {
        #[test]
        fn bytes_outside_comments_untouched(parts in proptest::collection::vec(("[a-z =;(){}0-9\n]{0,12}", "[a-z ]{0,10}", any::<bool>()), 0..8)) {
            // Plain code interleaved with injected comments; stripping must
            // return exactly the plain code.
            let mut src = String::new();
            let mut want = String::new();
            for (plain, text, block) in &parts {
                src.push_str(plain);
                want.push_str(plain);
                if *block {
                    src.push_str(&format!("/*{text}*/"));
                } else {
                    src.push_str(&format!("//{text}\n"));
                    want.push('\n');
                }
            }
            let got = strip_comments(&src, Language::Java, &CommentRuleSet::default()).unwrap();
            prop_assert_eq!(got, want);
        }
    }
}
