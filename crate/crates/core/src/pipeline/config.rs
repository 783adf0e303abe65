use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FeatureSchema, Rq, SyntheticProfile, TargetSpec, Task};
use crate::error::{Error, Result};
use crate::eval::DUMMY_MODEL;
use crate::features::{FeTechnique, VIF_THRESHOLD};
use crate::hpo::{GaConfig, TpeConfig};
use crate::impute::{PatternRule, StrategyMap};
use crate::models::{find_model, registry, ModelSpec};

/// Which research question a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RqSelection {
    #[serde(rename = "RQ1", alias = "rq1")]
    Rq1,
    #[serde(rename = "RQ2", alias = "rq2")]
    Rq2,
    #[serde(rename = "RQ3", alias = "rq3")]
    Rq3,
    #[serde(rename = "hybrid")]
    Hybrid,
}

impl RqSelection {
    pub fn rq(self) -> Option<Rq> {
        match self {
            RqSelection::Rq1 => Some(Rq::Rq1),
            RqSelection::Rq2 => Some(Rq::Rq2),
            RqSelection::Rq3 => Some(Rq::Rq3),
            RqSelection::Hybrid => None,
        }
    }
}

impl fmt::Display for RqSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rq() {
            Some(rq) => rq.fmt(f),
            None => f.write_str("hybrid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        #[serde(default = "default_rows")]
        rows: usize,
        /// Generator seed; the run seed when absent.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        profile: SyntheticProfile,
    },
    File {
        path: PathBuf,
        #[serde(default = "default_delimiter")]
        delimiter: char,
    },
}

fn default_rows() -> usize {
    2000
}

fn default_delimiter() -> char {
    ','
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic { rows: default_rows(), seed: None, profile: SyntheticProfile::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputationConfig {
    /// Column patterns (`*` wildcards) and their strategies. When empty the
    /// standard three-group assignment is used.
    pub rules: Vec<PatternRule>,
}

impl ImputationConfig {
    pub fn strategy_map(&self, schema: &FeatureSchema) -> Result<StrategyMap> {
        if self.rules.is_empty() {
            Ok(StrategyMap::standard())
        } else {
            StrategyMap::from_patterns(schema, &self.rules)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoConfig {
    /// TPE trials per cell; 0 evaluates every cell with default parameters.
    pub tpe_trials: usize,
    /// Train/test repetitions averaged inside one objective evaluation.
    pub inner_runs: usize,
    pub tpe: TpeConfig,
    pub ga: GaConfig,
    /// Best cells per target re-optimized with the GA; 0 disables it.
    pub top_k: usize,
}

impl Default for HpoConfig {
    fn default() -> Self {
        HpoConfig { tpe_trials: 100, inner_runs: 3, tpe: TpeConfig::default(), ga: GaConfig::default(), top_k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextprepConfig {
    /// JSON lines with `post_id` and `body` (post markup).
    pub input: PathBuf,
    /// Comment rule overrides in TOML.
    #[serde(default)]
    pub comment_rules: Option<PathBuf>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
}

fn default_max_tokens() -> usize {
    crate::textprep::MAX_TOKENS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridConfig {
    pub numeric_scores: PathBuf,
    pub textual_scores: PathBuf,
    pub ground_truth: PathBuf,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

/// A complete run description, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rq: RqSelection,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub imputation: ImputationConfig,
    #[serde(default = "all_fe")]
    pub fe: Vec<FeTechnique>,
    /// Registry names; empty selects every model supporting the task.
    #[serde(default)]
    pub models: Vec<String>,
    /// Target subset; empty selects every target of the question.
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default = "yes")]
    pub baseline: bool,
    #[serde(default)]
    pub hpo: HpoConfig,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_ratio")]
    pub train_ratio: f64,
    #[serde(default = "default_vif")]
    pub vif_threshold: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub textprep: Option<TextprepConfig>,
    #[serde(default)]
    pub hybrid: Option<HybridConfig>,
}

fn all_fe() -> Vec<FeTechnique> {
    FeTechnique::ALL.to_vec()
}
fn yes() -> bool {
    true
}
fn default_runs() -> usize {
    100
}
fn default_seed() -> u64 {
    42
}
fn default_ratio() -> f64 {
    0.8
}
fn default_vif() -> f64 {
    VIF_THRESHOLD
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Reads a TOML config. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = text.parse()?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataSource::File { path, .. } = &mut cfg.data {
            rebase(base, path);
        }
        rebase(base, &mut cfg.output);
        if let Some(t) = &mut cfg.textprep {
            rebase(base, &mut t.input);
            if let Some(r) = &mut t.comment_rules {
                rebase(base, r);
            }
        }
        if let Some(h) = &mut cfg.hybrid {
            rebase(base, &mut h.numeric_scores);
            rebase(base, &mut h.textual_scores);
            rebase(base, &mut h.ground_truth);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::config("train_ratio must lie in (0, 1)"));
        }
        if !(self.vif_threshold > 1.0) {
            return Err(Error::config("vif_threshold must exceed 1"));
        }
        if self.fe.is_empty() {
            return Err(Error::config("at least one FE technique is required"));
        }
        if self.hpo.inner_runs == 0 {
            return Err(Error::config("hpo.inner_runs must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be at least 1"));
        }
        if let Some(h) = &self.hybrid {
            if !(0.0..=1.0).contains(&h.threshold) {
                return Err(Error::config("hybrid.threshold must lie in [0, 1]"));
            }
        }
        match self.rq.rq() {
            Some(_) => {
                self.model_specs()?;
                self.target_specs()?;
            }
            None if self.hybrid.is_none() => {
                return Err(Error::config("rq = \"hybrid\" needs a [hybrid] section"));
            }
            None => {}
        }
        Ok(())
    }

    pub fn task(&self) -> Option<Task> {
        self.rq.rq().map(Rq::task)
    }

    fn require_rq(&self) -> Result<Rq> {
        self.rq.rq().ok_or_else(|| Error::config("this stage needs rq = RQ1, RQ2 or RQ3"))
    }

    /// Selected models; each must exist and support the question's task.
    pub fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        let task = self.require_rq()?.task();
        if self.models.is_empty() {
            return Ok(registry().into_iter().filter(|m| m.supports(task)).collect());
        }
        self.models
            .iter()
            .filter(|m| m.as_str() != DUMMY_MODEL)
            .map(|name| {
                let spec = find_model(name)?;
                if !spec.supports(task) {
                    return Err(Error::config(format!("model `{}` does not support {task}", spec.name)));
                }
                Ok(spec)
            })
            .collect()
    }

    pub fn target_specs(&self) -> Result<Vec<TargetSpec>> {
        let all = FeatureSchema::targets(self.require_rq()?);
        if self.targets.is_empty() {
            return Ok(all);
        }
        self.targets
            .iter()
            .map(|t| {
                all.iter()
                    .find(|s| &s.name == t)
                    .cloned()
                    .ok_or_else(|| Error::config(format!("`{t}` is not a target of {}", self.rq)))
            })
            .collect()
    }

    /// SHA-256 over the canonical form of the settings that determine
    /// results. The output location and the worker count are left out.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.workers = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let c: RunConfig = "rq = \"RQ3\"".parse().unwrap();
        assert_eq!(c.runs, 100);
        assert_eq!(c.seed, 42);
        assert_eq!(c.fe.len(), 5);
        assert_eq!(c.model_specs().unwrap().len(), 12);
        assert_eq!(c.target_specs().unwrap().len(), 1);
        assert!(matches!(c.data, DataSource::Synthetic { rows: 2000, .. }));
    }

    #[test]
    fn invalid_configs() {
        let classification_only = "rq = \"RQ1\"\nmodels = [\"Logistic Regression\"]";
        assert!(matches!(classification_only.parse::<RunConfig>(), Err(Error::Config(_))));
        assert!("rq = \"RQ1\"\nmodels = [\"Nope\"]".parse::<RunConfig>().is_err());
        assert!("rq = \"RQ1\"\nfe = [\"cube\"]".parse::<RunConfig>().is_err());
        assert!("rq = \"RQ1\"\nruns = 0".parse::<RunConfig>().is_err());
        assert!("rq = \"RQ1\"\ntargets = [\"Dropout\"]".parse::<RunConfig>().is_err());
        assert!("rq = \"hybrid\"".parse::<RunConfig>().is_err());
        assert!("rq = \"RQ1\"\nbogus = 1".parse::<RunConfig>().is_err());
    }

    #[test]
    fn hash_tracks_content_only() {
        let a: RunConfig = "rq = \"RQ1\"\nruns = 5".parse().unwrap();
        let same: RunConfig = "# comment\nruns = 5\nrq = \"RQ1\"\noutput = \"elsewhere\"".parse().unwrap();
        let other: RunConfig = "rq = \"RQ1\"\nruns = 6".parse().unwrap();
        assert_eq!(a.content_hash(), same.content_hash());
        assert_ne!(a.content_hash(), other.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn nested_sections() {
        let c: RunConfig = r#"
rq = "RQ2"
targets = ["Java Avg. Security Violation Density"]
models = ["OLS", "Bagging"]
fe = ["standardise", "none"]

[data]
source = "synthetic"
rows = 300
profile = { signal_r2 = 0.5 }

[[imputation.rules]]
pattern = "*Violation Density"
strategy = { kind = "zero" }

[hpo]
tpe_trials = 4
ga = { population = 4, generations = 2, tournament = 2, crossover = 0.9, mutation = 0.1, elitism = 1, mutation_scale = 0.1 }
"#
        .parse()
        .unwrap();
        assert_eq!(c.hpo.tpe_trials, 4);
        assert_eq!(c.hpo.inner_runs, 3);
        assert_eq!(c.imputation.rules.len(), 1);
        assert_eq!(c.model_specs().unwrap().len(), 2);
    }
}
