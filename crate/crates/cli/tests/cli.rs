use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
rq = "RQ3"
models = ["Logistic Regression", "Decision Tree"]
fe = ["standardise"]
runs = 3
output = "out"

[data]
source = "synthetic"
rows = 200

[hpo]
tpe_trials = 2
inner_runs = 1
top_k = 1
ga = { population = 3, generations = 2, tournament = 2, crossover = 0.9, mutation = 0.1, elitism = 1, mutation_scale = 0.1 }

[textprep]
input = "posts.jsonl"

[hybrid]
numeric_scores = "numeric.csv"
textual_scores = "textual.csv"
ground_truth = "truth.csv"
"#;

fn qabench(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qabench"))
        .args(args)
        .current_dir(dir)
        .env_remove("QABENCH_WORKERS")
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL).unwrap();
    std::fs::write(
        dir.path().join("posts.jsonl"),
        "{\"post_id\": \"1\", \"body\": \"<p>Why?</p><pre><code>puts 'a' # c\\nend\\n</code></pre>\"}\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("numeric.csv"), "user_id,probability\na,0.9\nb,0.2\nc,0.7\n").unwrap();
    std::fs::write(dir.path().join("textual.csv"), "user_id,probability\na,0.8\nb,0.6\nc,0.1\n").unwrap();
    std::fs::write(dir.path().join("truth.csv"), "user_id,dropout\na,0\nb,1\nc,0\n").unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bench_then_report_and_rerun_is_noop() {
    let dir = setup();
    let o = qabench(&["bench", "--config", "run.toml", "--workers", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let bench = dir.path().join("out/bench");
    for f in ["grid.csv", "summary.json", "table.txt", "run_meta.json"] {
        assert!(bench.join(f).exists(), "{f}");
    }
    let summary = std::fs::read(bench.join("summary.json")).unwrap();

    let again = qabench(&["bench", "--config", "run.toml"], dir.path());
    assert!(again.status.success());
    assert!(stdout(&again).contains("up to date"), "{}", stdout(&again));

    let forced = qabench(&["bench", "--config", "run.toml", "--force"], dir.path());
    assert!(forced.status.success());
    assert!(!stdout(&forced).contains("up to date"));
    assert_eq!(std::fs::read(bench.join("summary.json")).unwrap(), summary);

    let report = qabench(&["report", "--config", "run.toml"], dir.path());
    assert!(report.status.success(), "{}", stderr(&report));
    assert!(stdout(&report).contains("Logistic Regression"));

    let hpo = qabench(&["hpo-validate", "--config", "run.toml"], dir.path());
    assert!(hpo.status.success(), "{}", stderr(&hpo));
    assert!(dir.path().join("out/hpo-validate/agreement.json").exists());
}

#[test]
fn seed_override_changes_results() {
    let dir = setup();
    let a = qabench(&["features", "--config", "run.toml", "--out", "a"], dir.path());
    let b = qabench(&["features", "--config", "run.toml", "--out", "b", "--seed", "7"], dir.path());
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    let fa = std::fs::read(dir.path().join("a/features/features.csv")).unwrap();
    let fb = std::fs::read(dir.path().join("b/features/features.csv")).unwrap();
    assert_ne!(fa, fb);
    assert!(dir.path().join("a/features/vif.json").exists());
}

#[test]
fn impute_textprep_and_hybrid_stages() {
    let dir = setup();
    let o = qabench(&["impute", "--config", "run.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("out/impute/imputed.csv").exists());

    let t = qabench(&["textprep", "--config", "run.toml"], dir.path());
    assert!(t.status.success(), "{}", stderr(&t));
    let summary = std::fs::read_to_string(dir.path().join("out/textprep/summary.json")).unwrap();
    assert!(summary.contains("\"Ruby\": 1"), "{summary}");

    let h = qabench(&["hybrid-eval", "--config", "run.toml"], dir.path());
    assert!(h.status.success(), "{}", stderr(&h));
    assert!(stdout(&h).contains("disagreements: 2"), "{}", stdout(&h));
}

#[test]
fn failures_are_stage_tagged() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.toml"), "rq = \"RQ1\"\nmodels = [\"Logistic Regression\"]\n").unwrap();
    let o = qabench(&["bench", "--config", "bad.toml"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error [config]"), "{}", stderr(&o));

    let missing = qabench(&["report", "--config", "run.toml"], dir.path());
    assert!(!missing.status.success());
    assert!(stderr(&missing).contains("error [report]"), "{}", stderr(&missing));

    std::fs::write(dir.path().join("truth.csv"), "user_id,dropout\na,0\nb,1\n").unwrap();
    let h = qabench(&["hybrid-eval", "--config", "run.toml"], dir.path());
    assert!(!h.status.success());
    assert!(stderr(&h).contains("error [hybrid-eval]") && stderr(&h).contains("\"c\""), "{}", stderr(&h));

    let none = qabench(&["bench"], dir.path());
    assert!(!none.status.success());
}
