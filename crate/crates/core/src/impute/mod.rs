//! Missing-value strategies: structural zeros, K-nearest-neighbour donors and
//! multivariate-Gaussian EM, plus the column-to-strategy map that applies them
//! in the fixed order zero, KNN, EM.

mod em;
mod knn;
mod zero;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use em::{impute_em, EmInit, EmParams, EmReport};
pub use knn::{impute_knn, impute_knn_with, neighbour_columns, DistanceMetric, KnnParams, Weighting};
pub use zero::impute_zero;

use crate::data::{violation_density_columns, FeatureSchema, UserFeatureTable, ANSWERS};
use crate::error::{Error, Result};

/// Columns imputed from similar profiles.
pub const KNN_COLUMNS: &[&str] = &[
    "Comments",
    "Edits",
    "Badges",
    "Post Readability",
    "Post Attention to Detail",
    "User Contribution Frequency",
];

/// Columns imputed jointly by EM.
pub const EM_COLUMNS: &[&str] = &[
    "Average AboutMe Polarity",
    "Comment Polarity",
    "Question Polarity",
    "Answer Polarity",
    "User Popularity Index",
];

/// Columns where a missing cell means "none".
pub const ZERO_COLUMNS: &[&str] =
    &["ProfileLength", "UpVotes", "DownVotes", "Views", "Reputation", "Questions", ANSWERS, "Code Length"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ImputationStrategy {
    Zero,
    Knn(KnnParams),
    Em(EmParams),
}

impl ImputationStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            ImputationStrategy::Zero => Ok(()),
            ImputationStrategy::Knn(p) => p.validate(),
            ImputationStrategy::Em(p) => p.validate(),
        }
    }
}

/// One `pattern -> strategy` entry of a run config. `*` in the pattern
/// matches any run of characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRule {
    pub pattern: String,
    pub strategy: ImputationStrategy,
}

fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !text.starts_with(first) || text.len() < first.len() + last.len() || !text.ends_with(last) {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(i) => rest = &rest[i + mid.len()..],
            None => return false,
        }
    }
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyMap {
    pub assignments: BTreeMap<String, ImputationStrategy>,
}

impl StrategyMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Assigns a strategy; a second assignment of the same column fails.
    pub fn assign(&mut self, column: &str, strategy: ImputationStrategy) -> Result<()> {
        strategy.validate()?;
        if self.assignments.insert(column.to_string(), strategy).is_some() {
            return Err(Error::config(format!("column `{column}` assigned twice in the strategy map")));
        }
        Ok(())
    }

    /// The per-column assignment used for the user-level dataset.
    pub fn standard() -> Self {
        let mut m = StrategyMap::new();
        let zero = ZERO_COLUMNS.iter().map(|s| s.to_string()).chain(violation_density_columns());
        for c in zero {
            m.assign(&c, ImputationStrategy::Zero).expect("distinct columns");
        }
        for c in KNN_COLUMNS {
            m.assign(c, ImputationStrategy::Knn(KnnParams::default())).expect("distinct columns");
        }
        for c in EM_COLUMNS {
            m.assign(c, ImputationStrategy::Em(EmParams::default())).expect("distinct columns");
        }
        m
    }

    /// Resolves pattern rules against a schema. Each pattern must match at
    /// least one column and no column may match two rules.
    pub fn from_patterns(schema: &FeatureSchema, rules: &[PatternRule]) -> Result<Self> {
        let mut m = StrategyMap::new();
        for rule in rules {
            let hits: Vec<&str> = schema.names().filter(|n| glob_match(&rule.pattern, n)).collect();
            if hits.is_empty() {
                return Err(Error::Schema(rule.pattern.clone()));
            }
            for h in hits {
                m.assign(h, rule.strategy)?;
            }
        }
        Ok(m)
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        for (c, s) in &self.assignments {
            schema.require(c)?;
            s.validate()?;
        }
        Ok(())
    }
}

/// Result of applying a strategy map.
#[derive(Debug, Clone)]
pub struct ImputationOutcome {
    pub table: UserFeatureTable,
    pub em_reports: Vec<EmReport>,
}

/// Applies a strategy map and returns only the table.
pub fn apply_strategy_map(table: &UserFeatureTable, map: &StrategyMap) -> Result<UserFeatureTable> {
    apply_strategy_map_with_report(table, map).map(|o| o.table)
}

/// Applies a strategy map: zero columns, then KNN columns against the
/// predictor columns that are complete after the zero stage, then one EM fit
/// per distinct parameter set. Unknown columns fail before any mutation.
pub fn apply_strategy_map_with_report(table: &UserFeatureTable, map: &StrategyMap) -> Result<ImputationOutcome> {
    map.validate(table.schema())?;
    let mut t = table.clone();
    let mut knn: Vec<(&String, &KnnParams)> = Vec::new();
    let mut em_groups: Vec<(EmParams, Vec<String>)> = Vec::new();
    for (c, s) in &map.assignments {
        match s {
            ImputationStrategy::Zero => t = impute_zero(&t, c)?,
            ImputationStrategy::Knn(p) => knn.push((c, p)),
            ImputationStrategy::Em(p) => match em_groups.iter_mut().find(|(q, _)| q == p) {
                Some((_, cols)) => cols.push(c.clone()),
                None => em_groups.push((*p, vec![c.clone()])),
            },
        }
    }
    let after_zero = t.clone();
    for (c, p) in knn {
        let features = neighbour_columns(&after_zero, c);
        t = impute_knn_with(&t, c, p, &features)?;
    }
    let mut em_reports = Vec::new();
    for (p, cols) in em_groups {
        let (next, report) = impute_em(&t, &cols, &p)?;
        t = next;
        em_reports.push(report);
    }
    Ok(ImputationOutcome { table: t, em_reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_users, SyntheticProfile};

    #[test]
    fn glob() {
        assert!(glob_match("* Violation Density", "Java Avg. Security Violation Density"));
        assert!(glob_match("Java*Density", "Java Avg. Security Violation Density"));
        assert!(!glob_match("Java*Density", "JavaDensit"));
        assert!(glob_match("Views", "Views"));
        assert!(!glob_match("View", "Views"));
        assert!(glob_match("*", ""));
    }

    #[test]
    fn standard_map_clears_mask() {
        let t = generate_synthetic_users(400, 3, &SyntheticProfile::default()).unwrap();
        let map = StrategyMap::standard();
        let out = apply_strategy_map(&t, &map).unwrap();
        for c in map.assignments.keys() {
            let i = out.schema().require(c).unwrap();
            assert!(!out.has_missing(i), "{c}");
        }
    }

    #[test]
    fn empty_map_is_identity() {
        let t = generate_synthetic_users(50, 3, &SyntheticProfile::default()).unwrap();
        assert_eq!(apply_strategy_map(&t, &StrategyMap::new()).unwrap(), t);
    }

    #[test]
    fn unknown_column_fails_first() {
        let t = generate_synthetic_users(50, 3, &SyntheticProfile::default()).unwrap();
        let mut m = StrategyMap::new();
        m.assign("Views", ImputationStrategy::Zero).unwrap();
        m.assign("Nope", ImputationStrategy::Zero).unwrap();
        assert!(matches!(apply_strategy_map(&t, &m), Err(Error::Schema(c)) if c == "Nope"));
    }

    #[test]
    fn double_assignment_rejected() {
        let schema = FeatureSchema::user_level();
        let rules = vec![
            PatternRule { pattern: "* Violation Density".into(), strategy: ImputationStrategy::Zero },
            PatternRule { pattern: "Java *".into(), strategy: ImputationStrategy::Zero },
        ];
        assert!(StrategyMap::from_patterns(&schema, &rules).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let src = r#"
            pattern = "Comments"
            strategy = { kind = "knn", k = 3 }
        "#;
        let rule: PatternRule = toml::from_str(src).unwrap();
        match rule.strategy {
            ImputationStrategy::Knn(p) => {
                assert_eq!(p.k, 3);
                assert_eq!(p.weighting, Weighting::InverseDistance);
            }
            other => panic!("{other:?}"),
        }
    }
}
