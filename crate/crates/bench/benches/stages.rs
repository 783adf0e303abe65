use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qabench_bench::{answers_problem, post_html, users};
use qabench_core::data::Task;
use qabench_core::features::compute_vif;
use qabench_core::hpo::{ga_optimize, tpe_optimize, Assignment, Domain, GaConfig, ParamValue, SearchSpace};
use qabench_core::impute::{apply_strategy_map, StrategyMap};
use qabench_core::models::{find_model, fit};
use qabench_core::textprep::{pack_sequence, TextPipeline, MAX_TOKENS};

const PREDICTORS: [&str; 8] = [
    "Comments", "Questions", "Edits", "Views", "UpVotes", "DownVotes", "YearlyDurationUsage", "Code Length",
];

fn sphere_space() -> SearchSpace {
    (0..5).fold(SearchSpace::new(), |s, i| s.with(&format!("x{i}"), &[], Domain::Continuous { lo: -5.0, hi: 5.0 }))
}

fn sphere(a: &Assignment) -> qabench_core::Result<f64> {
    Ok(a.0.values().filter_map(ParamValue::as_f64).map(|v| v * v).sum())
}

fn imputation(c: &mut Criterion) {
    let t = users(1000);
    let map = StrategyMap::standard();
    c.bench_function("impute_standard_map_1000_rows", |b| b.iter(|| apply_strategy_map(black_box(&t), &map).unwrap()));
}

fn features(c: &mut Criterion) {
    let (x, _) = answers_problem(5000, &PREDICTORS);
    c.bench_function("vif_5000x8", |b| b.iter(|| compute_vif(black_box(&x), &PREDICTORS, 5.0).unwrap()));
}

fn models(c: &mut Criterion) {
    let (x, y) = answers_problem(2000, &PREDICTORS);
    let mut g = c.benchmark_group("fit_2000x8");
    g.sample_size(10);
    for name in ["OLS", "Random Forest", "Extreme Gradient Boosting", "K-Nearest Neighbours"] {
        let spec = find_model(name).unwrap();
        g.bench_function(name, |b| b.iter(|| fit(&spec, &Assignment::new(), &x, &y, Task::Regression, 1).unwrap()));
    }
    g.finish();
}

fn hpo(c: &mut Criterion) {
    let space = sphere_space();
    let mut g = c.benchmark_group("sphere_5d");
    g.sample_size(10);
    g.bench_function("tpe_100_trials", |b| b.iter(|| tpe_optimize(sphere, &space, 100, 1).unwrap()));
    g.bench_function("ga_20x25", |b| b.iter(|| ga_optimize(sphere, &space, &GaConfig::default(), 1).unwrap()));
    g.finish();
}

fn text(c: &mut Criterion) {
    let pipeline = TextPipeline::default();
    let html = post_html(40);
    c.bench_function("process_post_40_paragraphs", |b| b.iter(|| pipeline.process_html("1", black_box(&html)).unwrap()));
    let words: Vec<String> = (0..2000).map(|i| format!("w{i}")).collect();
    let code: Vec<String> = (0..800).map(|i| format!("c{i}")).collect();
    c.bench_function("pack_2000_800", |b| b.iter(|| pack_sequence(black_box(&words), &code, MAX_TOKENS).unwrap()));
}

criterion_group!(benches, imputation, features, models, hpo, text);
criterion_main!(benches);
