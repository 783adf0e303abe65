use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::bench::BenchmarkReport;
use crate::data::Task;
use crate::error::Result;
use crate::eval::{format_number, MetricSet};

pub const GRID_FILE: &str = "grid.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLE_FILE: &str = "table.txt";

/// One row per plan cell and baseline with mean, std and median of every
/// metric. Values are written in shortest round-trip form.
pub fn grid_csv(report: &BenchmarkReport) -> Result<Vec<u8>> {
    let metrics = MetricSet::names(report.task);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["fe".to_string(), "model".into(), "target".into(), "status".into()];
    for m in metrics {
        for s in ["mean", "std", "median"] {
            header.push(format!("{m}_{s}"));
        }
    }
    header.extend(["failed_runs".to_string(), "params".into(), "error".into()]);
    w.write_record(&header)?;
    let rows = report
        .cells
        .iter()
        .map(|c| (&c.result, c.error.as_deref()))
        .chain(report.baselines.iter().map(|b| (b, None)));
    for (r, error) in rows {
        let mut rec = vec![r.cell.fe.to_string(), r.cell.model.clone(), r.cell.target.clone()];
        rec.push(if r.is_na() { "N/A" } else { "ok" }.into());
        for m in metrics {
            match r.metrics.get(*m) {
                Some(d) => rec.extend([d.mean.to_string(), d.std.to_string(), d.median.to_string()]),
                None => rec.extend(["".to_string(), "".into(), "".into()]),
            }
        }
        rec.push(r.failures.len().to_string());
        rec.push(serde_json::to_string(&r.params)?);
        rec.push(error.unwrap_or("").to_string());
        w.write_record(&rec)?;
    }
    Ok(w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?)
}

pub fn summary_json(report: &BenchmarkReport) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(report)?;
    v.push(b'\n');
    Ok(v)
}

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    if n >= width {
        s.to_string()
    } else {
        format!("{s}{}", " ".repeat(width - n))
    }
}

/// Model by FE table of "mean ± std (median)" cells per target and metric.
pub fn human_table(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({}) config {}", report.rq, report.task, &report.provenance.config_hash[..12]);
    let _ = writeln!(out, "runs {} seed {}", report.provenance.runs, report.provenance.seed);
    let fes: Vec<String> = report
        .cells
        .iter()
        .map(|c| c.result.cell.fe.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let targets: Vec<&str> =
        report.cells.iter().map(|c| c.result.cell.target.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let metrics: &[&str] = match report.task {
        Task::Regression => &["r2", "rmse"],
        Task::Classification => &["f1", "accuracy"],
    };
    for target in targets {
        for metric in metrics {
            let _ = writeln!(out, "\n{target}: {metric}");
            let mut models: Vec<&str> = report
                .cells
                .iter()
                .filter(|c| c.result.cell.target == target)
                .map(|c| c.result.cell.model.as_str())
                .collect();
            models.sort_unstable();
            models.dedup();
            let width = models.iter().map(|m| m.chars().count()).max().unwrap_or(5).max(18) + 2;
            let col = 28;
            let mut line = pad("model", width);
            for fe in &fes {
                line.push_str(&pad(fe, col));
            }
            let _ = writeln!(out, "{}", line.trim_end());
            for m in &models {
                let mut line = pad(m, width);
                for fe in &fes {
                    let cell = report.cells.iter().find(|c| {
                        c.result.cell.target == target && c.result.cell.model == *m && c.result.cell.fe.name() == fe
                    });
                    let text = cell
                        .and_then(|c| c.result.metrics.get(*metric))
                        .map_or_else(|| "N/A".to_string(), |d| d.summary().text);
                    line.push_str(&pad(&text, col));
                }
                let _ = writeln!(out, "{}", line.trim_end());
            }
            if let Some(b) = report.baselines.iter().find(|b| b.cell.target == target) {
                let text = b.metrics.get(*metric).map_or_else(|| "N/A".to_string(), |d| d.summary().text);
                let _ = writeln!(out, "{}{}", pad(&b.cell.model, width), text);
            }
        }
    }
    if !report.best.is_empty() {
        let _ = writeln!(out, "\nbest cells");
        for b in &report.best {
            let params = serde_json::to_string(&b.params).unwrap_or_default();
            let _ = writeln!(out, "{}: {} / {} {} = {} params {}", b.target, b.cell.fe, b.cell.model, b.primary_metric, b.summary, params);
        }
    }
    if !report.refinements.is_empty() {
        let _ = writeln!(out, "\nGA agreement (tolerance {}%)", format_number(crate::hpo::TOLERANCE_PERCENT));
        for r in &report.refinements {
            let verdict = if r.report.pass { "pass" } else { "fail" };
            let _ = writeln!(out, "{} / {} / {}: {verdict}", r.cell.fe, r.cell.model, r.cell.target);
            for (name, p) in &r.report.per_param {
                let diff = p.diff_percent.map_or_else(|| "categorical".to_string(), |d| format!("{}%", format_number(d)));
                let _ = writeln!(out, "  {name}: bo {} ga {} diff {diff}", p.bo, p.ga);
            }
        }
    }
    for s in &report.significance {
        match &s.report {
            Some(r) => {
                let flagged = r.posthoc.iter().filter(|p| p.significant).count();
                let _ = writeln!(
                    out,
                    "\n{}: Kruskal-Wallis H = {} p = {:.3e}; {flagged} of {} pairs differ at alpha {}",
                    s.target,
                    format_number(r.h),
                    r.p,
                    r.posthoc.len(),
                    r.alpha
                );
            }
            None => {
                let _ = writeln!(out, "\n{}: no significance test ({})", s.target, s.note.as_deref().unwrap_or(""));
            }
        }
    }
    out
}

/// Writes the grid, the JSON summary and the human table into `dir`.
pub fn write_report(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(GRID_FILE), grid_csv(report)?)?;
    std::fs::write(dir.join(SUMMARY_FILE), summary_json(report)?)?;
    std::fs::write(dir.join(TABLE_FILE), human_table(report))?;
    Ok(())
}

pub fn read_report(dir: &Path) -> Result<BenchmarkReport> {
    let text = std::fs::read_to_string(dir.join(SUMMARY_FILE))?;
    Ok(serde_json::from_str(&text)?)
}
