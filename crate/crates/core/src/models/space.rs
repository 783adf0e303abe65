use super::ModelKind;
use crate::hpo::{Domain, SearchSpace};

fn cont(lo: f64, hi: f64) -> Domain {
    Domain::Continuous { lo, hi }
}

fn logc(lo: f64, hi: f64) -> Domain {
    Domain::LogContinuous { lo, hi }
}

fn int(lo: i64, hi: i64) -> Domain {
    Domain::Integer { lo, hi }
}

fn logi(lo: i64, hi: i64) -> Domain {
    Domain::LogInteger { lo, hi }
}

fn cat(options: &[&str]) -> Domain {
    Domain::Categorical { options: options.iter().map(|s| s.to_string()).collect() }
}

const EPOCHS: &str = "Maximum no. of epochs";
const ESTIMATORS: &str = "No. of weaker estimators";

fn kernel_params(s: SearchSpace) -> SearchSpace {
    s.with("kernel", &["Kernel function"], cat(&["rbf", "poly", "linear", "sigmoid"]))
        .with("max_iter", &[EPOCHS], logi(10, 2000))
        .with("degree", &["Degrees"], int(1, 5))
        .with("coef0", &["Independent term"], cont(0.0, 16.0))
}

fn bayesian(s: SearchSpace) -> SearchSpace {
    s.with("max_iter", &[EPOCHS], logi(10, 2000))
        .with("alpha_1", &["Noise variance prior (shape)"], logc(1e-8, 20.0))
        .with("alpha_2", &["Noise variance prior (scale)"], logc(1e-8, 20.0))
        .with("lambda_1", &["Regularisation prior (shape)"], logc(1e-8, 20.0))
        .with("lambda_2", &["Regularisation prior (scale)"], logc(1e-8, 20.0))
        .with("compute_score", &["Log marginal likelihood computation"], Domain::Boolean)
}

fn tree_shape(s: SearchSpace) -> SearchSpace {
    s.with("max_depth", &["Max. tree depth"], int(1, 20))
        .with("min_samples_split", &["Min. samples split"], cont(0.0005, 0.8))
        .with("min_samples_leaf", &["Min. samples per leaf"], cont(0.0005, 0.2))
        .with("min_weight_fraction_leaf", &["Min. sum of weights per leaf"], cont(0.0, 0.31))
        .with("max_features", &["Max. features per split"], cont(0.05, 1.0))
}

/// Tunable hyperparameters of a model. Ranges span roughly twice the widest
/// optimum reported for the parameter.
pub fn search_space(kind: ModelKind) -> SearchSpace {
    let s = SearchSpace::new();
    use ModelKind::*;
    match kind {
        Ols => s,
        ElasticNet => s
            .with("alpha", &["Regularisation strength"], logc(1e-4, 8.0))
            .with("l1_ratio", &["Mixing ratio between L1 and L2"], cont(0.0, 1.0))
            .with("max_iter", &[EPOCHS], logi(10, 2000)),
        LassoLars => s
            .with("alpha", &["Regularisation strength"], logc(1e-5, 8.0))
            .with("max_iter", &[EPOCHS], logi(10, 1000)),
        BayesianRidge | Ard => bayesian(s),
        Huber => s
            .with("epsilon", &["Outlier sensitivity"], cont(1.0, 30.0))
            .with("max_iter", &[EPOCHS], logi(10, 2000))
            .with("alpha", &["L2 regularisation strength"], logc(1e-6, 13.0)),
        TheilSen => s
            .with("max_subpopulation", &["Max. subpopulation"], logi(100, 20000))
            .with("max_iter", &[EPOCHS], logi(10, 1000)),
        EpsilonSvr => kernel_params(
            s.with("C", &["Regularisation strength"], logc(1e-3, 7.0))
                .with("epsilon", &["Epsilon insensitivity"], logc(1e-3, 2.0)),
        ),
        NuSvr => kernel_params(
            s.with("C", &["Regularisation strength"], logc(1e-3, 7.0)).with("nu", &["Nu"], cont(0.01, 1.0)),
        ),
        CSvm => kernel_params(s.with("C", &["Regularisation strength"], logc(1e-3, 100.0))),
        LogisticRegression => s
            .with("C", &["Regularisation strength"], logc(1e-3, 100.0))
            .with("max_iter", &[EPOCHS], logi(10, 1000)),
        RidgeClassifier => s.with("alpha", &["Regularisation strength"], logc(1e-3, 100.0)),
        Sgd => s
            .with("alpha", &["Regularisation strength"], logc(1e-6, 120.0))
            .with("l1_ratio", &["L1 penalty ratio"], cont(0.0, 1.0))
            .with("max_iter", &[EPOCHS], logi(5, 2000))
            .with("eta0", &["Initial learning rate"], logc(1e-4, 7.0)),
        LinearSvm => s
            .with("C", &["Regularisation strength"], logc(1e-3, 100.0))
            .with("epsilon", &["Epsilon insensitivity"], cont(0.0, 2.0))
            .with("max_iter", &[EPOCHS], logi(10, 2000)),
        DecisionTree => tree_shape(s),
        RandomForest => tree_shape(s.with("n_estimators", &[ESTIMATORS], logi(1, 2400)))
            .with("max_samples", &["Max. sampling proportion"], cont(0.01, 1.0))
            .with("oob_score", &["Out-of-bag computation"], Domain::Boolean),
        Bagging => s
            .with("n_estimators", &[ESTIMATORS, "Total estimators"], logi(1, 2400))
            .with("max_samples", &["Max. sampling proportion", "Max. sampling rate"], cont(0.001, 1.0))
            .with("max_features", &["Max. features used", "Max. feature inclusion ratio"], cont(0.05, 1.0))
            .with("bootstrap", &["Bootstrap aggregation"], Domain::Boolean)
            .with("bootstrap_features", &["Feature bootstrapping"], Domain::Boolean)
            .with("oob_score", &["Out-of-bag computation"], Domain::Boolean),
        AdaBoost => s
            .with("n_estimators", &[ESTIMATORS], logi(1, 2400))
            .with("learning_rate", &["Learning rate"], logc(1e-3, 2.0)),
        Xgb => s
            .with("booster", &["Base learner"], cat(&["gbtree", "gblinear"]))
            .with("max_depth", &["Max. tree depth"], int(1, 20))
            .with("subsample", &["Max. sampling proportion"], cont(0.05, 1.0))
            .with("learning_rate", &["Learning rate"], logc(1e-3, 1.0))
            .with("n_estimators", &[ESTIMATORS], logi(1, 2400))
            .with("reg_alpha", &["L1 regularisation strength"], cont(0.0, 2.0))
            .with("reg_lambda", &["L2 regularisation strength"], cont(0.0, 180.0)),
        Knn => s
            .with("n_neighbors", &["No. of neighbours"], logi(1, 200))
            .with("weights", &["Weight function"], cat(&["uniform", "distance"]))
            .with("algorithm", &["Neighbour traversal"], cat(&["auto", "ball_tree", "kd_tree", "brute"]))
            .with("leaf_size", &["Maximum leaf size"], int(1, 60))
            .with("metric", &["Distance metric"], cat(&["minkowski", "euclidean", "manhattan"])),
        NeuralNetwork => s
            .with("architecture", &["Architecture"], cat(&["4", "1", "2", "3"]))
            .with("learning_rate", &["Learning rate"], logc(1e-4, 1e-1))
            .with("epochs", &[EPOCHS], logi(5, 500))
            .with("batch_size", &["Batch size"], logi(8, 256)),
    }
}
