//! Turning raw post markup into bimodal token sequences: HTML extraction,
//! Unicode normalization, text cleaning, language filtering, comment
//! stripping, tokenization and packing.

mod clean;
mod comments;
mod html;
mod language;
mod pack;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{
    clean_text, default_stopwords, find_links, nfc_normalize, nfc_normalize_bytes, strip_punctuation,
    DEFAULT_STOPWORDS,
};
pub use comments::{strip_comments, CommentRule, CommentRuleSet, Language};
pub use html::{extract_parts, PostDocument};
pub use language::{filter_snippets, KeywordIdentifier, LabelSource, LanguageGuess, LanguageIdentifier};
pub use pack::{
    cochran_n, pack_sequence, BimodalSequence, RegexTokenizer, Tokenizer, Vocabulary, CLS, EOS, MAX_TOKENS, SEP,
    SPECIALS, UNK,
};

/// One post after preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedPost {
    pub post_id: String,
    pub text: String,
    /// Comment-free snippets in the supported languages.
    pub code: Vec<(Language, String)>,
    pub sequence: BimodalSequence,
}

/// Configured preprocessing pipeline.
pub struct TextPipeline {
    pub rules: CommentRuleSet,
    pub stopwords: BTreeSet<String>,
    pub identifier: Box<dyn LanguageIdentifier>,
    pub tokenizer: Box<dyn Tokenizer>,
    pub max_len: usize,
}

impl Default for TextPipeline {
    fn default() -> Self {
        TextPipeline {
            rules: CommentRuleSet::default(),
            stopwords: default_stopwords(),
            identifier: Box::new(KeywordIdentifier),
            tokenizer: Box::new(RegexTokenizer),
            max_len: MAX_TOKENS,
        }
    }
}

impl TextPipeline {
    pub fn process(&self, doc: &PostDocument) -> Result<ProcessedPost> {
        let text = clean_text(&nfc_normalize(&doc.paragraphs.join("\n")), &self.stopwords);
        let snippets: Vec<String> = doc.code_blocks.iter().map(|c| nfc_normalize(c)).collect();
        let mut code = Vec::new();
        for (snippet, lang) in filter_snippets(&snippets, self.identifier.as_ref())? {
            code.push((lang, strip_comments(snippet, lang, &self.rules)?));
        }
        let words = self.tokenizer.tokenize(&text);
        let code_tokens: Vec<String> = code.iter().flat_map(|(_, c)| self.tokenizer.tokenize(c)).collect();
        let sequence = pack_sequence(&words, &code_tokens, self.max_len)
            .map_err(|e| Error::invalid(format!("post {}: {e}", doc.post_id)))?;
        Ok(ProcessedPost { post_id: doc.post_id.clone(), text, code, sequence })
    }

    /// Extracts and processes one post given its markup.
    pub fn process_html(&self, post_id: &str, html: &str) -> Result<ProcessedPost> {
        self.process(&extract_parts(post_id, html))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PUNCT_IN: &str = "The ListView in CommonControls 6 (XP or newer) supports double buffering. Fortunately, .NET wraps the newest CommonControls on the system. To enable double buffering, send the appropriate Windows message to the ListView control:\nHere are the details:\nhttp://www.codeproject.com/KB/list/listviewxp.aspx";
    const PUNCT_OUT: &str = "The ListView in CommonControls 6 XP or newer supports double buffering Fortunately NET wraps the newest CommonControls on the system To enable double buffering send the appropriate Windows message to the ListView control\nHere are the details\nhttp://www.codeproject.com/KB/list/listviewxp.aspx";

    #[test]
    fn answer_text_punctuation_fixture() {
        assert_eq!(strip_punctuation(PUNCT_IN), PUNCT_OUT);
    }

    const RUBY_IN: &str = "#!/usr/bin/env ruby\n\nclass Foo\n  =begin\n  def call(*args)\n    puts \"received call with #{args.join(' ')}\"\n  end\n  =end\n\n  def method_missing(m, *args, &block)\n    puts \"received method_missing on '#{m}(#{args.join(' ')})'\"\n  end\nend\n\nf = Foo.new\nf.call('hi') # Not a syntax error! method_missing with m of :call\nf.send :'', 'ham' # method_missing with m set to :''\nf.send nil, 'bye' # raises an error\n";
    const RUBY_OUT: &str = "#!/usr/bin/env ruby\n\nclass Foo\n\n  def method_missing(m, *args, &block)\n    puts \"received method_missing on '#{m}(#{args.join(' ')})'\"\n  end\nend\n\nf = Foo.new\nf.call('hi')\nf.send :'', 'ham'\nf.send nil, 'bye'\n";

    #[test]
    fn ruby_comment_fixture() {
        assert_eq!(strip_comments(RUBY_IN, Language::Ruby, &CommentRuleSet::default()).unwrap(), RUBY_OUT);
    }

    #[test]
    fn end_to_end_post() {
        let html = "<p>How do I <b>sum</b> a list?</p><pre><code>def total(xs):\n    # add up\n    return sum(xs)\n</code></pre>\
                    <pre><code>12345</code></pre>";
        let p = TextPipeline::default().process_html("7", html).unwrap();
        assert_eq!(p.text, "sum list");
        assert_eq!(p.code, vec![(Language::Python, "def total(xs):\n\n    return sum(xs)\n".to_string())]);
        assert_eq!(p.sequence.words(), ["sum", "list"]);
        assert_eq!(p.sequence.code()[0], "def");
        assert!(TextPipeline::default().process_html("8", "<div>nothing</div>").is_err());
    }
}
