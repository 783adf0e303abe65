//! The closed registry of 21 learners, their search spaces, the dummy and
//! frozen-network baselines, and a versioned JSON export of fitted models.

mod ensemble;
mod knn;
mod linear;
mod matrix;
pub mod nn;
mod space;
mod svm;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::hpo::{Assignment, SearchSpace};

pub use matrix::Rows;
pub use nn::{Activation, NNArchitecture, Network, Optimizer};
pub use space::search_space;

/// Version tag written into exported model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Linear,
    Bayesian,
    OutlierRobust,
    SupportVector,
    Tree,
    Ensemble,
    Neighbours,
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Ols,
    ElasticNet,
    LassoLars,
    BayesianRidge,
    Ard,
    Huber,
    TheilSen,
    EpsilonSvr,
    NuSvr,
    LogisticRegression,
    RidgeClassifier,
    CSvm,
    Sgd,
    LinearSvm,
    DecisionTree,
    RandomForest,
    AdaBoost,
    Bagging,
    Xgb,
    Knn,
    NeuralNetwork,
}

impl ModelKind {
    pub const ALL: [ModelKind; 21] = [
        ModelKind::Ols,
        ModelKind::ElasticNet,
        ModelKind::LassoLars,
        ModelKind::BayesianRidge,
        ModelKind::Ard,
        ModelKind::Huber,
        ModelKind::TheilSen,
        ModelKind::EpsilonSvr,
        ModelKind::NuSvr,
        ModelKind::LogisticRegression,
        ModelKind::RidgeClassifier,
        ModelKind::CSvm,
        ModelKind::Sgd,
        ModelKind::LinearSvm,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::AdaBoost,
        ModelKind::Bagging,
        ModelKind::Xgb,
        ModelKind::Knn,
        ModelKind::NeuralNetwork,
    ];

    /// Registry name, as used in configs and reports.
    pub fn name(self) -> &'static str {
        use ModelKind::*;
        match self {
            Ols => "OLS",
            ElasticNet => "ElasticNet",
            LassoLars => "LassoLARS",
            BayesianRidge => "Bayesian",
            Ard => "ARD",
            Huber => "Huber",
            TheilSen => "Theil-Sen",
            EpsilonSvr => "Epsilon SVM",
            NuSvr => "Nu SVM",
            LogisticRegression => "Logistic Regression",
            RidgeClassifier => "Ridge Classifier",
            CSvm => "C-SVM",
            Sgd => "SGD",
            LinearSvm => "Linear SVM",
            DecisionTree => "Decision Tree",
            RandomForest => "Random Forest",
            AdaBoost => "AdaBoost",
            Bagging => "Bagging",
            Xgb => "Extreme Gradient Boosting",
            Knn => "K-Nearest Neighbours",
            NeuralNetwork => "Neural Network",
        }
    }

    pub fn family(self) -> Family {
        use ModelKind::*;
        match self {
            Ols | ElasticNet | LassoLars | LogisticRegression | RidgeClassifier | Sgd => Family::Linear,
            BayesianRidge | Ard => Family::Bayesian,
            Huber | TheilSen => Family::OutlierRobust,
            EpsilonSvr | NuSvr | CSvm | LinearSvm => Family::SupportVector,
            DecisionTree => Family::Tree,
            RandomForest | AdaBoost | Bagging | Xgb => Family::Ensemble,
            Knn => Family::Neighbours,
            NeuralNetwork => Family::Deep,
        }
    }

    pub fn supports(self, task: Task) -> bool {
        use ModelKind::*;
        match self {
            Ols | ElasticNet | LassoLars | BayesianRidge | Ard | Huber | TheilSen | EpsilonSvr | NuSvr => {
                task == Task::Regression
            }
            LogisticRegression | RidgeClassifier | CSvm => task == Task::Classification,
            _ => true,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown model `{s}`")))
    }
}

/// Registry entry of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub family: Family,
    pub tasks: Vec<Task>,
    pub search_space: SearchSpace,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            name: kind.name().to_string(),
            kind,
            family: kind.family(),
            tasks: [Task::Regression, Task::Classification].into_iter().filter(|t| kind.supports(*t)).collect(),
            search_space: search_space(kind),
        }
    }

    pub fn supports(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }

    /// Library-style defaults: an empty assignment, so each learner falls
    /// back to its built-in defaults.
    pub fn default_params(&self) -> Assignment {
        Assignment::new()
    }
}

/// All 21 learners in a fixed order.
pub fn registry() -> Vec<ModelSpec> {
    ModelKind::ALL.into_iter().map(ModelSpec::new).collect()
}

/// Registry entry by name (case-insensitive).
pub fn find_model(name: &str) -> Result<ModelSpec> {
    Ok(ModelSpec::new(name.parse()?))
}

/// Output of [`FittedModel::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Regression estimates, or 0/1 labels for classification.
    pub values: Vec<f64>,
    /// Probability-like score of class 1 (classification only).
    pub scores: Option<Vec<f64>>,
}

/// Fitted parameters of any learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "kebab-case")]
pub(crate) enum Learner {
    Constant { value: f64 },
    Linear(linear::LinearModel),
    Kernel(svm::KernelModel),
    Trees(ensemble::TreeEnsemble),
    Knn(knn::KnnModel),
    Network(nn::TrainedNetwork),
}

impl Learner {
    /// Regression estimates or class-1 scores.
    fn raw(&self, x: &Rows) -> Vec<f64> {
        match self {
            Learner::Constant { value } => vec![*value; x.n],
            Learner::Linear(m) => m.predict(x),
            Learner::Kernel(m) => m.predict(x),
            Learner::Trees(m) => m.predict(x),
            Learner::Knn(m) => m.predict(x),
            Learner::Network(m) => m.predict(x),
        }
    }
}

/// A trained model. Immutable after fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub model: String,
    pub task: Task,
    pub n_features: usize,
    pub n_train: usize,
    pub seed: u64,
    pub params: Assignment,
    pub(crate) learner: Learner,
}

impl FittedModel {
    fn new(model: &str, task: Task, x: &Rows, seed: u64, params: &Assignment, learner: Learner) -> Self {
        FittedModel {
            format_version: MODEL_FORMAT_VERSION,
            model: model.to_string(),
            task,
            n_features: x.p,
            n_train: x.n,
            seed,
            params: params.clone(),
            learner,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Prediction> {
        self.predict_rows(&Rows::from_dmatrix(x))
    }

    pub fn predict_rows(&self, x: &Rows) -> Result<Prediction> {
        if x.p != self.n_features {
            return Err(Error::invalid(format!(
                "model `{}` was fitted on {} features, got {}",
                self.model, self.n_features, x.p
            )));
        }
        let raw = self.learner.raw(x);
        Ok(match self.task {
            Task::Regression => Prediction { values: raw, scores: None },
            Task::Classification => {
                let scores: Vec<f64> = raw.into_iter().map(|s| s.clamp(0.0, 1.0)).collect();
                let values = scores.iter().map(|&s| if s >= 0.5 { 1.0 } else { 0.0 }).collect();
                Prediction { values, scores: Some(scores) }
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FittedModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "model file format {} is not supported (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_xy(x: &Rows, y: &[f64], task: Task) -> Result<()> {
    if x.n != y.len() {
        return Err(Error::invalid(format!("{} rows but {} targets", x.n, y.len())));
    }
    if x.n == 0 {
        return Err(Error::invalid("cannot fit on zero rows"));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design matrix contains missing or non-finite values"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("target contains missing or non-finite values"));
    }
    if task == Task::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("classification targets must be 0/1 labels"));
    }
    Ok(())
}

/// Fits `spec` with `params` layered over its defaults.
pub fn fit(
    spec: &ModelSpec,
    params: &Assignment,
    x: &DMatrix<f64>,
    y: &[f64],
    task: Task,
    seed: u64,
) -> Result<FittedModel> {
    fit_rows(spec, params, &Rows::from_dmatrix(x), y, task, seed)
}

pub fn fit_rows(
    spec: &ModelSpec,
    params: &Assignment,
    x: &Rows,
    y: &[f64],
    task: Task,
    seed: u64,
) -> Result<FittedModel> {
    if !spec.supports(task) {
        return Err(Error::config(format!("model `{}` does not support {task}", spec.name)));
    }
    spec.search_space.validate_partial(params)?;
    check_xy(x, y, task)?;
    use ModelKind::*;
    let p = params;
    let learner = match spec.kind {
        Ols => Learner::Linear(linear::ols(x, y)),
        ElasticNet => Learner::Linear(linear::elastic_net(x, y, p)),
        LassoLars => Learner::Linear(linear::lasso_lars(x, y, p)),
        BayesianRidge => Learner::Linear(linear::bayesian_ridge(x, y, p)),
        Ard => Learner::Linear(linear::ard(x, y, p)),
        Huber => Learner::Linear(linear::huber(x, y, p)),
        TheilSen => Learner::Linear(linear::theil_sen(x, y, p, seed)?),
        LogisticRegression => Learner::Linear(linear::logistic(x, y, p)),
        RidgeClassifier => Learner::Linear(linear::ridge_classifier(x, y, p)),
        Sgd => Learner::Linear(linear::sgd(x, y, p, task, seed)?),
        LinearSvm => Learner::Linear(linear::linear_svm(x, y, p, task)),
        EpsilonSvr => Learner::Kernel(svm::epsilon_svr(x, y, p, spec.name.as_str())?),
        NuSvr => Learner::Kernel(svm::nu_svr(x, y, p, spec.name.as_str())?),
        CSvm => Learner::Kernel(svm::c_svc(x, y, p, spec.name.as_str())?),
        DecisionTree => Learner::Trees(ensemble::decision_tree(x, y, p, task, seed)),
        RandomForest => Learner::Trees(ensemble::random_forest(x, y, p, task, seed)),
        Bagging => Learner::Trees(ensemble::bagging(x, y, p, task, seed)),
        AdaBoost => Learner::Trees(ensemble::adaboost(x, y, p, task, seed)),
        Xgb => Learner::Trees(ensemble::xgboost(x, y, p, task, seed)),
        Knn => Learner::Knn(knn::fit(x, y, p, task)),
        NeuralNetwork => Learner::Network(nn::fit_network(x, y, p, task, seed)?),
    };
    Ok(FittedModel::new(&spec.name, task, x, seed, params, learner))
}

/// No-learning baseline: the training mean for regression, the modal label
/// (ties to 0) for classification.
pub fn fit_dummy(task: Task, y_train: &[f64], n_features: usize) -> Result<FittedModel> {
    if y_train.is_empty() {
        return Err(Error::invalid("dummy baseline needs at least one target value"));
    }
    let value = match task {
        Task::Regression => y_train.iter().sum::<f64>() / y_train.len() as f64,
        Task::Classification => {
            let ones = y_train.iter().filter(|&&v| v == 1.0).count();
            if ones * 2 > y_train.len() {
                1.0
            } else {
                0.0
            }
        }
    };
    let x = Rows { n: y_train.len(), p: n_features, data: Vec::new() };
    Ok(FittedModel::new("Shallow Baseline", task, &x, 0, &Assignment::new(), Learner::Constant { value }))
}

/// Untrained network of the given architecture with seeded random weights.
pub fn frozen_network_baseline(arch: &NNArchitecture, task: Task, n_features: usize, seed: u64) -> Result<FittedModel> {
    let net = nn::TrainedNetwork::frozen(arch, task, n_features, seed)?;
    let x = Rows { n: 0, p: n_features, data: Vec::new() };
    Ok(FittedModel::new("Neural Network Baseline", task, &x, seed, &Assignment::new(), Learner::Network(net)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_counts() {
        let r = registry();
        assert_eq!(r.len(), 21);
        let reg = r.iter().filter(|m| m.supports(Task::Regression)).count();
        let cls = r.iter().filter(|m| m.supports(Task::Classification)).count();
        let both = r.iter().filter(|m| m.tasks.len() == 2).count();
        assert_eq!((reg, cls, both), (18, 12, 9));
        assert_eq!(r.iter().filter(|m| m.tasks == [Task::Regression]).count(), 9);
        assert_eq!(r.iter().filter(|m| m.tasks == [Task::Classification]).count(), 3);
        let mut names: Vec<&str> = r.iter().map(|m| m.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 21);
    }

    #[test]
    fn names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("Lasso".parse::<ModelKind>().is_err());
    }

    #[test]
    fn published_hyperparameter_labels_present() {
        let expect: &[(&str, &[&str])] = &[
            ("Bagging", &["Total estimators", "Max. sampling rate", "Max. feature inclusion ratio", "Bootstrap aggregation", "Feature bootstrapping", "No. of weaker estimators", "Max. sampling proportion", "Max. features used", "Out-of-bag computation"]),
            ("Extreme Gradient Boosting", &["Base learner", "Max. tree depth", "Max. sampling proportion", "Learning rate", "No. of weaker estimators", "L1 regularisation strength", "L2 regularisation strength"]),
            ("SGD", &["Regularisation strength", "L1 penalty ratio", "Maximum no. of epochs", "Initial learning rate"]),
            ("K-Nearest Neighbours", &["No. of neighbours", "Weight function", "Neighbour traversal", "Maximum leaf size", "Distance metric"]),
            ("Bayesian", &["Maximum no. of epochs", "Noise variance prior (shape)", "Noise variance prior (scale)", "Regularisation prior (shape)", "Regularisation prior (scale)", "Log marginal likelihood computation"]),
            ("AdaBoost", &["No. of weaker estimators", "Learning rate"]),
            ("Epsilon SVM", &["Kernel function", "Regularisation strength", "Epsilon insensitivity", "Maximum no. of epochs", "Degrees", "Independent term"]),
            ("Huber", &["Outlier sensitivity", "Maximum no. of epochs", "L2 regularisation strength"]),
            ("Random Forest", &["No. of weaker estimators", "Max. tree depth", "Min. samples split", "Min. samples per leaf", "Min. sum of weights per leaf", "Max. features per split", "Max. sampling proportion", "Out-of-bag computation"]),
            ("ElasticNet", &["Regularisation strength", "Mixing ratio between L1 and L2"]),
        ];
        for (model, labels) in expect {
            let spec = find_model(model).unwrap();
            for l in *labels {
                assert!(spec.search_space.by_label(l).is_some(), "{model}: {l}");
            }
        }
    }

    #[test]
    fn applicability_rejected_before_fit() {
        let spec = find_model("OLS").unwrap();
        let x = DMatrix::from_element(3, 1, 1.0);
        let e = fit(&spec, &Assignment::new(), &x, &[0.0, 1.0, 0.0], Task::Classification, 0).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn dummy_baselines() {
        let d = fit_dummy(Task::Regression, &[1.0, 2.0, 3.0], 2).unwrap();
        let p = d.predict(&DMatrix::from_element(4, 2, 9.0)).unwrap();
        assert_eq!(p.values, vec![2.0; 4]);
        let c = fit_dummy(Task::Classification, &[0.0, 0.0, 1.0], 1).unwrap();
        let p = c.predict(&DMatrix::from_element(3, 1, 0.0)).unwrap();
        assert_eq!(p.values, vec![0.0; 3]);
    }

    #[test]
    fn ols_exact_line_and_export() {
        let x = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit(&find_model("OLS").unwrap(), &Assignment::new(), &x, &y, Task::Regression, 42).unwrap();
        match &m.learner {
            Learner::Linear(l) => {
                assert!((l.coef[0] - 2.0).abs() < 1e-8);
                assert!((l.intercept - 1.0).abs() < 1e-8);
            }
            other => panic!("{other:?}"),
        }
        let p = m.predict(&x).unwrap();
        for (a, b) in p.values.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8);
        }
        let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.predict(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn unsupported_format_version_rejected() {
        let m = fit_dummy(Task::Regression, &[1.0], 1).unwrap();
        let s = m.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":99");
        assert!(FittedModel::from_json(&s).is_err());
    }
}
