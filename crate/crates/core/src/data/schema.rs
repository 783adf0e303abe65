use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning task of a target column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Regression => f.write_str("regression"),
            Task::Classification => f.write_str("classification"),
        }
    }
}

/// Research question a target belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rq {
    #[serde(rename = "RQ1", alias = "rq1")]
    Rq1,
    #[serde(rename = "RQ2", alias = "rq2")]
    Rq2,
    #[serde(rename = "RQ3", alias = "rq3")]
    Rq3,
}

impl Rq {
    pub const ALL: [Rq; 3] = [Rq::Rq1, Rq::Rq2, Rq::Rq3];

    pub fn task(self) -> Task {
        match self {
            Rq::Rq1 | Rq::Rq2 => Task::Regression,
            Rq::Rq3 => Task::Classification,
        }
    }
}

impl fmt::Display for Rq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rq::Rq1 => f.write_str("RQ1"),
            Rq::Rq2 => f.write_str("RQ2"),
            Rq::Rq3 => f.write_str("RQ3"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Predictor,
    Target,
    ExcludedComposite,
}

/// One column of the user-level dataset.
///
/// `task_targets` lists the research questions the column takes part in: as a
/// predictor for `Predictor` columns (and for targets reused as predictors
/// downstream), and as the label for `Target` columns via [`TargetSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
    #[serde(default)]
    pub task_targets: BTreeSet<Rq>,
}

impl ColumnSpec {
    pub fn new(name: &str, role: ColumnRole, rqs: &[Rq]) -> Self {
        ColumnSpec {
            name: name.to_string(),
            role,
            task_targets: rqs.iter().copied().collect(),
        }
    }
}

/// A prediction target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub task: Task,
    pub rq: Rq,
}

/// Ordered, uniquely named column list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>")]
pub struct FeatureSchema {
    columns: Vec<ColumnSpec>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<ColumnSpec>> for FeatureSchema {
    type Error = Error;

    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self> {
        FeatureSchema::new(columns)
    }
}

impl From<FeatureSchema> for Vec<ColumnSpec> {
    fn from(s: FeatureSchema) -> Self {
        s.columns
    }
}

pub const LANGUAGES: [&str; 5] = ["SQL", "JavaScript", "Python", "Ruby", "Java"];
pub const QUALITY_DIMENSIONS: [&str; 4] = ["Reliability", "Readability", "Performance", "Security"];

pub const ANSWERS: &str = "Answers";
pub const DROPOUT: &str = "Dropout";
pub const GENDER: &str = "Gender";
pub const USER_DEVELOPMENT_INDEX: &str = "User Development Index";
pub const USER_MANAGEMENT_INDEX: &str = "User Management Index";

/// The twenty predictors shared by every research question.
pub const BASE_PREDICTORS: [&str; 20] = [
    "Post Attention to Detail",
    "Post Readability",
    "Badges",
    "User Contribution Frequency",
    "Reputation",
    "YearlyDurationUsage",
    "User Profile Completion Rate",
    "Questions",
    "Comments",
    "Edits",
    "Average AboutMe Polarity",
    "ProfileLength",
    "Views",
    "UpVotes",
    "User Popularity Index",
    "Comment Polarity",
    "Answer Polarity",
    "Question Polarity",
    "Code Length",
    "DownVotes",
];

/// Name of a per-language violation-density column.
pub fn violation_density(language: &str, dimension: &str) -> String {
    format!("{language} Avg. {dimension} Violation Density")
}

/// All twenty violation-density columns, language-major.
pub fn violation_density_columns() -> Vec<String> {
    LANGUAGES
        .iter()
        .flat_map(|l| QUALITY_DIMENSIONS.iter().map(move |d| violation_density(l, d)))
        .collect()
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("{} (duplicate)", c.name)));
            }
        }
        Ok(FeatureSchema { columns, index })
    }

    /// The full user-level schema: activity counts, semantic post scores,
    /// the two composite indices, the twenty violation densities and the
    /// dropout label.
    pub fn user_level() -> Self {
        use ColumnRole::*;
        let all = [Rq::Rq1, Rq::Rq2, Rq::Rq3];
        let mut cols = vec![ColumnSpec::new(GENDER, Predictor, &[])];
        cols.extend(BASE_PREDICTORS.iter().map(|n| ColumnSpec::new(n, Predictor, &all)));
        cols.push(ColumnSpec::new("User Disengagement Rate", Predictor, &[]));
        cols.push(ColumnSpec::new(USER_DEVELOPMENT_INDEX, ExcludedComposite, &[]));
        cols.push(ColumnSpec::new(USER_MANAGEMENT_INDEX, ExcludedComposite, &[]));
        // Answers is the RQ1 label and a predictor for RQ2/RQ3.
        cols.push(ColumnSpec::new(ANSWERS, Target, &[Rq::Rq1, Rq::Rq2, Rq::Rq3]));
        for name in violation_density_columns() {
            cols.push(ColumnSpec::new(&name, Target, &[Rq::Rq2, Rq::Rq3]));
        }
        cols.push(ColumnSpec::new(DROPOUT, Target, &[Rq::Rq3]));
        FeatureSchema::new(cols).expect("built-in schema has unique names")
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::Schema(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.index_of(name).map(|i| &self.columns[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    /// Target specifications for a research question: one for RQ1, twenty
    /// for RQ2, one for RQ3.
    pub fn targets(rq: Rq) -> Vec<TargetSpec> {
        let names: Vec<String> = match rq {
            Rq::Rq1 => vec![ANSWERS.to_string()],
            Rq::Rq2 => violation_density_columns(),
            Rq::Rq3 => vec![DROPOUT.to_string()],
        };
        names
            .into_iter()
            .map(|name| TargetSpec { name, task: rq.task(), rq })
            .collect()
    }

    /// Predictor columns for a research question, in schema order.
    ///
    /// Targets of earlier questions feed later ones: RQ2 adds `Answers`, RQ3
    /// additionally adds the violation densities.
    pub fn predictors(&self, rq: Rq) -> Vec<String> {
        let own_targets: BTreeSet<String> = Self::targets(rq).into_iter().map(|t| t.name).collect();
        self.columns
            .iter()
            .filter(|c| c.role != ColumnRole::ExcludedComposite)
            .filter(|c| c.task_targets.contains(&rq))
            .filter(|c| !own_targets.contains(&c.name))
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn composites(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.role == ColumnRole::ExcludedComposite)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Every target must name a column of the schema.
    pub fn validate_targets(&self, targets: &[TargetSpec]) -> Result<()> {
        for t in targets {
            self.require(&t.name)?;
        }
        Ok(())
    }

    /// Sub-schema with the named columns, in the given order.
    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureSchema> {
        let cols = names
            .iter()
            .map(|n| {
                self.column(n.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::Schema(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureSchema::new(cols)
    }

    /// Schema without the named columns.
    pub fn without(&self, drop: &BTreeSet<String>) -> FeatureSchema {
        let cols = self.columns.iter().filter(|c| !drop.contains(&c.name)).cloned().collect();
        FeatureSchema::new(cols).expect("subset of a valid schema")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_counts_per_rq() {
        assert_eq!(FeatureSchema::targets(Rq::Rq1).len(), 1);
        assert_eq!(FeatureSchema::targets(Rq::Rq2).len(), 20);
        let rq3 = FeatureSchema::targets(Rq::Rq3);
        assert_eq!(rq3.len(), 1);
        assert_eq!(rq3[0].task, Task::Classification);
    }

    #[test]
    fn predictor_sets_grow_across_rqs() {
        let s = FeatureSchema::user_level();
        assert_eq!(s.predictors(Rq::Rq1).len(), 20);
        assert_eq!(s.predictors(Rq::Rq2).len(), 21);
        assert_eq!(s.predictors(Rq::Rq3).len(), 41);
        assert!(!s.predictors(Rq::Rq1).contains(&ANSWERS.to_string()));
        assert!(s.predictors(Rq::Rq2).contains(&ANSWERS.to_string()));
    }

    #[test]
    fn composites_are_flagged() {
        let s = FeatureSchema::user_level();
        assert_eq!(s.composites(), vec![USER_DEVELOPMENT_INDEX, USER_MANAGEMENT_INDEX]);
        for rq in Rq::ALL {
            s.validate_targets(&FeatureSchema::targets(rq)).unwrap();
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let c = ColumnSpec::new("a", ColumnRole::Predictor, &[]);
        assert!(FeatureSchema::new(vec![c.clone(), c]).is_err());
    }

    #[test]
    fn unknown_target_rejected() {
        let s = FeatureSchema::user_level();
        let t = TargetSpec { name: "Nope".into(), task: Task::Regression, rq: Rq::Rq1 };
        assert!(matches!(s.validate_targets(&[t]), Err(Error::Schema(n)) if n == "Nope"));
    }
}
