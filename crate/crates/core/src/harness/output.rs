use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::plot::render_svg;
use crate::harness::run::TrialResult;

pub const RESULTS_HEADER: [&str; 7] = ["experiment", "grid_value", "trial", "method", "mse", "eps_ci", "seed"];
pub const SUMMARY_HEADER: [&str; 6] = ["experiment", "grid_value", "method", "mean", "stderr", "n"];

/// Mean and standard error over trials for one (grid value, method) cell.
/// Non-finite trials are excluded from `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub grid_value: f64,
    pub method: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn summarize(result: &TrialResult) -> Vec<SummaryRow> {
    let grid = result.config.grid();
    let methods = result.method_names();
    let mut rows = Vec::with_capacity(grid.len() * methods.len());
    for (g, &gv) in grid.iter().enumerate() {
        for m in &methods {
            let vals: Vec<f64> = result
                .records
                .iter()
                .filter(|r| r.grid_index == g && &r.method == m && r.mse.is_finite())
                .map(|r| r.mse)
                .collect();
            let n = vals.len();
            let mean = if n == 0 { f64::NAN } else { vals.iter().sum::<f64>() / n as f64 };
            let stderr = if n < 2 {
                0.0
            } else {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            };
            rows.push(SummaryRow {
                grid_value: gv,
                method: m.clone(),
                mean,
                stderr,
                n,
            });
        }
    }
    rows
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
    pub plot: Option<PathBuf>,
}

pub fn write_outputs(result: &TrialResult, dir: &Path, plot: bool) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let exp = result.config.experiment.name();

    let results = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&results)?;
    w.write_record(RESULTS_HEADER)?;
    for r in &result.records {
        w.write_record([
            exp.to_string(),
            r.grid_value.to_string(),
            r.trial.to_string(),
            r.method.clone(),
            format!("{:e}", r.mse),
            format!("{:e}", r.eps_ci),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;

    let rows = summarize(result);
    let summary = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &rows {
        w.write_record([
            exp.to_string(),
            r.grid_value.to_string(),
            r.method.clone(),
            format!("{:e}", r.mean),
            format!("{:e}", r.stderr),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;

    let config = dir.join("config.txt");
    fs::write(&config, result.config.to_kv_string())?;

    let plot = if plot {
        let p = dir.join("plot.svg");
        fs::write(&p, render_svg(result.config.experiment, &rows))?;
        Some(p)
    } else {
        None
    };
    Ok(OutputFiles {
        results,
        summary,
        config,
        plot,
    })
}
