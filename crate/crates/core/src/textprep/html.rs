use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};

/// Paragraph text and code blocks of one post body, in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostDocument {
    pub post_id: String,
    pub paragraphs: Vec<String>,
    pub code_blocks: Vec<String>,
}

/// Pulls `<p>` text and `<pre><code>` contents out of post markup. The
/// parser is lenient: malformed markup is repaired rather than rejected, and
/// entities are decoded. Everything outside those two element kinds is
/// dropped.
pub fn extract_parts(post_id: &str, html: &str) -> PostDocument {
    let doc = Html::parse_fragment(html);
    let p = Selector::parse("p").expect("static selector");
    let code = Selector::parse("pre code").expect("static selector");
    if !doc.errors.is_empty() {
        log::debug!("post {post_id}: {} markup issues repaired", doc.errors.len());
    }
    PostDocument {
        post_id: post_id.to_string(),
        paragraphs: doc.select(&p).map(|e| e.text().collect::<String>()).collect(),
        code_blocks: doc.select(&code).map(|e| e.text().collect::<String>()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paragraph_and_code() {
        let d = extract_parts("1", "<p>Hi &amp; bye</p><pre><code>x &lt; 1</code></pre><div>skip</div>");
        assert_eq!(d.paragraphs, vec!["Hi & bye"]);
        assert_eq!(d.code_blocks, vec!["x < 1"]);
    }

    #[test]
    fn no_code_and_malformed() {
        let d = extract_parts("2", "<p>one<p>two <b>bold</b>");
        assert_eq!(d.paragraphs, vec!["one", "two bold"]);
        assert!(d.code_blocks.is_empty());
        // Inline code outside <pre> is not a snippet.
        assert!(extract_parts("3", "<p>use <code>x</code></p>").code_blocks.is_empty());
    }
}
