use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use qabench_core::error::{Error, Result};
use qabench_core::eval::{rank_cells, CellResult};
use qabench_core::hpo::refine_top_k;
use qabench_core::pipeline::{
    cell_objective, grid_csv, human_table, impute_table, is_complete, load_data, mark_complete, prepare,
    read_report, run_benchmark, run_hybrid_files, run_textprep, text_pipeline, write_report, RunConfig,
};
use qabench_core::rng::derive_seed_str;

#[derive(Parser)]
#[command(name = "qabench", version, about = "Benchmark pipeline for community Q&A user data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "QABENCH_WORKERS")]
    workers: Option<usize>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Recompute even when the output directory holds a finished run.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Impute missing values with the configured strategy map.
    Impute(Common),
    /// Impute, drop composites and prune predictors by VIF.
    Features(Common),
    /// Run the full model grid and write the reports.
    Bench(Common),
    /// Re-optimize the best benchmark cells with the GA and check agreement.
    HpoValidate(Common),
    /// Preprocess post markup into packed text/code sequences.
    Textprep(Common),
    /// Compare numeric and textual dropout predictions.
    HybridEval(Common),
    /// Re-render the human table and grid from a finished benchmark.
    Report(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Impute(c) => ("impute", c),
            Command::Features(c) => ("features", c),
            Command::Bench(c) => ("bench", c),
            Command::HpoValidate(c) => ("hpo-validate", c),
            Command::Textprep(c) => ("textprep", c),
            Command::HybridEval(c) => ("hybrid-eval", c),
            Command::Report(c) => ("report", c),
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn stage_impute(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let raw = load_data(cfg)?;
    let (table, em) = impute_table(cfg, &raw)?;
    table.save(dir.join("imputed.csv"), b',')?;
    write_json(&dir.join("em_reports.json"), &em)
}

fn stage_features(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let p = prepare(cfg)?;
    p.table.save(dir.join("features.csv"), b',')?;
    write_json(
        &dir.join("vif.json"),
        &serde_json::json!({ "predictors": p.predictors, "removed": p.vif_removed, "report": p.vif }),
    )
}

fn stage_hpo_validate(cfg: &RunConfig, out: &Path, dir: &Path) -> Result<()> {
    let bench = read_report(&out.join("bench"))
        .map_err(|e| Error::invalid(format!("no benchmark results in {} ({e}); run `bench` first", out.display())))?;
    let prepared = prepare(cfg)?;
    let x = prepared.design()?;
    let task = bench.task;
    let mut outcomes = Vec::new();
    let targets: std::collections::BTreeSet<String> =
        bench.cells.iter().map(|c| c.result.cell.target.clone()).collect();
    let y: std::collections::BTreeMap<String, Vec<f64>> = targets
        .iter()
        .map(|t| Ok((t.clone(), prepared.table.column_values(t)?.to_vec())))
        .collect::<Result<_>>()?;
    for t in &targets {
        let cells: Vec<CellResult> =
            bench.cells.iter().filter(|c| &c.result.cell.target == t).map(|c| c.result.clone()).collect();
        if rank_cells(&cells, task).is_empty() {
            log::warn!("{t}: every cell is N/A, nothing to validate");
            continue;
        }
        let factory = |cell: &_| cell_objective(cfg, &x, &y, task, cell);
        let k = cfg.hpo.top_k.max(1);
        outcomes.extend(refine_top_k(&cells, k, factory, &cfg.hpo.ga, derive_seed_str(cfg.seed, "ga"))?);
    }
    let passed = outcomes.iter().filter(|o| o.report.pass).count();
    println!("{passed} of {} refined cells agree within tolerance", outcomes.len());
    write_json(&dir.join("agreement.json"), &outcomes)
}

fn stage_textprep(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let tp = cfg.textprep.as_ref().ok_or_else(|| Error::config("missing [textprep] section"))?;
    let pipeline = text_pipeline(tp)?;
    let input = std::fs::File::open(&tp.input)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", tp.input.display())))?;
    let out = run_textprep(input, &pipeline)?;
    let mut lines = Vec::new();
    for r in &out.records {
        lines.extend(serde_json::to_vec(r)?);
        lines.push(b'\n');
    }
    std::fs::write(dir.join("records.jsonl"), lines)?;
    write_json(&dir.join("summary.json"), &out.summary)?;
    println!("{} posts, {} processed, {} failed", out.summary.posts, out.summary.processed, out.summary.failed);
    Ok(())
}

fn stage_hybrid(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let h = cfg.hybrid.as_ref().ok_or_else(|| Error::config("missing [hybrid] section"))?;
    let report = run_hybrid_files(h)?;
    write_json(&dir.join("report.json"), &report)?;
    let text = report.render();
    std::fs::write(dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn stage_report(out: &Path, dir: &Path) -> Result<()> {
    let report = read_report(&out.join("bench"))
        .map_err(|e| Error::invalid(format!("no benchmark results in {} ({e}); run `bench` first", out.display())))?;
    let table = human_table(&report);
    std::fs::write(dir.join("table.txt"), &table)?;
    std::fs::write(dir.join("grid.csv"), grid_csv(&report)?)?;
    print!("{table}");
    Ok(())
}

fn tag(stage: &str) -> impl Fn(Error) -> (String, Error) + '_ {
    move |e| (stage.to_string(), e)
}

fn run(command: &Command) -> std::result::Result<(), (String, Error)> {
    let (stage, common) = command.parts();
    let mut cfg = RunConfig::load(&common.config).map_err(tag("config"))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    let workers = common.workers.or(cfg.workers);
    if workers == Some(0) {
        return Err(("config".into(), Error::config("--workers must be at least 1")));
    }
    if let Some(n) = workers {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let hash = cfg.content_hash();
    let dir = cfg.output.join(stage);
    if !common.force && is_complete(&dir, &hash) {
        println!("{stage}: {} is up to date (use --force to recompute)", dir.display());
        return Ok(());
    }
    std::fs::create_dir_all(&dir).map_err(|e| (stage.to_string(), e.into()))?;
    let started = unix_now();
    let result = match command {
        Command::Impute(_) => stage_impute(&cfg, &dir),
        Command::Features(_) => stage_features(&cfg, &dir),
        Command::Bench(_) => run_benchmark(&cfg).and_then(|r| {
            write_report(&r, &dir)?;
            print!("{}", human_table(&r));
            Ok(())
        }),
        Command::HpoValidate(_) => stage_hpo_validate(&cfg, &cfg.output, &dir),
        Command::Textprep(_) => stage_textprep(&cfg, &dir),
        Command::HybridEval(_) => stage_hybrid(&cfg, &dir),
        Command::Report(_) => stage_report(&cfg.output, &dir),
    };
    result.map_err(tag(stage))?;
    let meta = serde_json::json!({
        "stage": stage,
        "config_hash": hash,
        "seed": cfg.seed,
        "workers": workers,
        "started_unix": started,
        "finished_unix": unix_now(),
    });
    write_json(&dir.join("run_meta.json"), &meta).map_err(tag(stage))?;
    mark_complete(&dir, &hash).map_err(tag(stage))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            eprintln!("error [{stage}]: {e}");
            ExitCode::FAILURE
        }
    }
}
