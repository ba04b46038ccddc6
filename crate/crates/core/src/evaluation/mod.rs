//! Truth matching, error metrics, Monte Carlo sweeps and reporting.

pub mod complexity;
pub mod config;
pub mod metrics;
pub mod sweep;
pub mod svg;

use std::fs;

pub use complexity::{check_ordering, complexity_report, search_space, SearchSpace};
pub use config::SweepConfig;
pub use metrics::{channel_nmse, match_estimates, parameter_nmse, EvalRange, Matching, Metrics};
pub use sweep::{run_sweep, SweepResult, TrialRecord};

use crate::Result;

/// Writes the CSV, per-trial records and SVG plots requested by the config.
pub fn write_outputs(cfg: &SweepConfig, result: &SweepResult) -> Result<()> {
    if let Some(path) = &cfg.output.csv {
        ensure_parent(path)?;
        fs::write(path, sweep::format_summary_csv(result))?;
    }
    if let Some(path) = &cfg.output.records {
        ensure_parent(path)?;
        fs::write(path, sweep::format_records_csv(result))?;
    }
    if let Some(dir) = &cfg.output.svg_dir {
        fs::create_dir_all(dir)?;
        for metric in sweep::metric_names() {
            let svg = svg::plot_metric(result, &cfg.estimation.methods, metric);
            fs::write(dir.join(format!("{metric}.svg")), svg)?;
        }
    }
    Ok(())
}

fn ensure_parent(path: &std::path::Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p)?;
        }
    }
    Ok(())
}
