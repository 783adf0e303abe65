//! Configuration-driven orchestration of the stages, report emission and
//! output-directory bookkeeping.

mod bench;
mod config;
mod report;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{load_ground_truth, load_scores, run_hybrid_eval, HybridReport};
use crate::textprep::{CommentRuleSet, ProcessedPost, TextPipeline};

pub use bench::{
    cell_objective, impute_table, load_data, prepare, run_benchmark, BenchmarkReport, BestCell, CellReport,
    Prepared, Preprocessing, Provenance, TargetSignificance,
};
pub use config::{DataSource, HpoConfig, HybridConfig, ImputationConfig, RqSelection, RunConfig, TextprepConfig};
pub use report::{grid_csv, human_table, read_report, summary_json, write_report, GRID_FILE, SUMMARY_FILE, TABLE_FILE};

const DONE_FILE: &str = ".complete";

/// True when `dir` holds a finished stage produced by the config with this
/// hash.
pub fn is_complete(dir: &Path, config_hash: &str) -> bool {
    std::fs::read_to_string(dir.join(DONE_FILE)).is_ok_and(|h| h.trim() == config_hash)
}

pub fn mark_complete(dir: &Path, config_hash: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(DONE_FILE), format!("{config_hash}\n"))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawPost {
    post_id: String,
    body: String,
}

/// Counts of one text preprocessing run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TextprepSummary {
    pub posts: usize,
    pub processed: usize,
    pub failed: usize,
    pub truncated: usize,
    /// Kept snippets per language.
    pub snippets_per_language: BTreeMap<String, usize>,
    /// Posts with at least one snippet, per language.
    pub posts_per_language: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TextprepOutput {
    pub records: Vec<ProcessedPost>,
    pub summary: TextprepSummary,
}

/// Processes JSON-lines posts (`post_id`, `body`). Unreadable lines and
/// posts that fail are logged and counted; the run continues.
pub fn run_textprep<R: Read>(input: R, pipeline: &TextPipeline) -> Result<TextprepOutput> {
    let mut out = TextprepOutput::default();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.summary.posts += 1;
        let post: RawPost = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("line {}: {e}", i + 1);
                out.summary.failed += 1;
                continue;
            }
        };
        match pipeline.process_html(&post.post_id, &post.body) {
            Ok(p) => {
                out.summary.processed += 1;
                if p.sequence.truncated {
                    out.summary.truncated += 1;
                }
                let mut seen = std::collections::BTreeSet::new();
                for (lang, _) in &p.code {
                    *out.summary.snippets_per_language.entry(lang.to_string()).or_default() += 1;
                    if seen.insert(*lang) {
                        *out.summary.posts_per_language.entry(lang.to_string()).or_default() += 1;
                    }
                }
                out.records.push(p);
            }
            Err(e) => {
                log::warn!("post {}: {e}", post.post_id);
                out.summary.failed += 1;
            }
        }
    }
    Ok(out)
}

/// Builds the text pipeline described by a config section.
pub fn text_pipeline(cfg: &TextprepConfig) -> Result<TextPipeline> {
    let rules = match &cfg.comment_rules {
        Some(p) => CommentRuleSet::from_toml(&std::fs::read_to_string(p)?)?,
        None => CommentRuleSet::default(),
    };
    Ok(TextPipeline { rules, max_len: cfg.max_tokens, ..TextPipeline::default() })
}

/// Reads the score and ground-truth files named in the config and compares
/// the two predictors.
pub fn run_hybrid_files(cfg: &HybridConfig) -> Result<HybridReport> {
    let read = |p: &PathBuf| -> Result<_> {
        load_scores(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))
    };
    let numeric = read(&cfg.numeric_scores)?;
    let textual = read(&cfg.textual_scores)?;
    let truth = load_ground_truth(&cfg.ground_truth)
        .map_err(|e| Error::invalid(format!("{}: {e}", cfg.ground_truth.display())))?;
    run_hybrid_eval(&numeric, &textual, &truth, cfg.threshold)
}
