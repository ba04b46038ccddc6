//! Monte Carlo sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{sample_clusters, synthesize_snapshots, ClusterSpec, Scatterer, Synthesis};
use crate::evaluation::config::{DistanceUnit, SceneSection, SweepConfig, SweepVariable};
use crate::evaluation::metrics::{evaluate, EvalRange, Metrics};
use crate::geometry::ArrayGeometry;
use crate::recovery::{Estimators, MethodTag};
use crate::Result;

/// Seed of trial `trial`, independent of the sweep point so that every point
/// sees the same random draws (common random numbers).
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

fn sub_seed(seed: u64, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng.next_u64()
}

/// Draws cluster centers uniformly on a cap around broadside, then the
/// scatterers of every cluster.
pub fn sample_scene(scene: &SceneSection, seed: u64) -> Result<Vec<Scatterer>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cos_cap = scene.max_center_angle_deg.to_radians().cos();
    let specs: Vec<ClusterSpec> = (0..scene.clusters)
        .map(|_| {
            let w: f64 = rng.random_range(cos_cap..=1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - w * w).max(0.0).sqrt();
            let mut spec = ClusterSpec::at_distance(
                [s * phi.cos(), s * phi.sin(), w],
                scene.concentration,
                scene.scatterers_per_cluster,
                scene.distance,
            );
            spec.distance_jitter = scene.distance_jitter;
            spec
        })
        .collect();
    sample_clusters(&specs, rng.next_u64())
}

/// One method applied to one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: usize,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub method: MethodTag,
    pub metrics: Metrics,
    pub search_space_size: usize,
    pub estimates: usize,
    pub wall_ms: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub method: MethodTag,
    pub metric: &'static str,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub sweep_var: String,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Scene, channel settings and truth for one sweep point and trial.
pub struct TrialSetup {
    pub scatterers: Vec<Scatterer>,
    pub synthesis: Synthesis,
}

/// Applies the sweep value and draws the trial's scene and snapshots.
pub fn setup_trial(cfg: &SweepConfig, geom: &ArrayGeometry, value: f64, seed: u64) -> Result<TrialSetup> {
    let mut scene = cfg.scene.clone();
    let mut snr = cfg.channel.snr_db;
    let mut snapshots = cfg.channel.snapshots;
    match cfg.sweep.variable {
        SweepVariable::Concentration => scene.concentration = value,
        SweepVariable::Distance => {
            let b = geom.region_boundaries()?;
            scene.distance = match cfg.sweep.distance_unit {
                DistanceUnit::Meters => value,
                DistanceUnit::Fresnel => value * b.fresnel_distance,
                DistanceUnit::Rayleigh => value * b.rayleigh_distance,
            };
        }
        SweepVariable::Snr => snr = value,
        SweepVariable::Snapshots => snapshots = value as usize,
    }
    let scatterers = sample_scene(&scene, sub_seed(seed, 1))?;
    let synthesis = synthesize_snapshots(geom, &scatterers, snapshots, snr, cfg.channel.model, sub_seed(seed, 2))?;
    Ok(TrialSetup { scatterers, synthesis })
}

/// Runs every method on every trial of every sweep point.
///
/// Trials run in parallel; records come back in `(point, trial, method)`
/// order regardless of scheduling, so the summary is deterministic.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let geom = cfg.geometry.build()?;
    let est = Estimators::new(geom.clone(), cfg.estimation.settings.clone())?;
    for &m in &cfg.estimation.methods {
        match m {
            MethodTag::AdOmp | MethodTag::AdMusic => drop(est.ad_dictionary()?),
            MethodTag::PdOmp | MethodTag::PdMusic => drop(est.pd_dictionary()?),
            _ => {}
        }
    }
    let range = EvalRange { r_min: est.resolved().r_min, r_max: est.resolved().r_max };
    let paths = cfg.paths();
    let jobs: Vec<(usize, usize)> =
        (0..cfg.sweep.values.len()).flat_map(|p| (0..cfg.sweep.trials).map(move |t| (p, t))).collect();

    let per_job: Vec<Result<Vec<TrialRecord>>> = jobs
        .par_iter()
        .map(|&(point, trial)| {
            let value = cfg.sweep.values[point];
            let seed = trial_seed(cfg.master_seed, trial);
            let setup = setup_trial(cfg, &geom, value, seed)?;
            let obs = &setup.synthesis.observation;
            cfg.estimation
                .methods
                .iter()
                .map(|&method| {
                    let start = Instant::now();
                    let out = est.run(method, obs, paths)?;
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    let (_, metrics) =
                        evaluate(&geom, &setup.scatterers, &out.entries, &obs.snapshots, &setup.synthesis.clean, range);
                    Ok(TrialRecord {
                        point,
                        value,
                        trial,
                        seed,
                        method,
                        metrics,
                        search_space_size: out.search_space_size,
                        estimates: out.entries.len(),
                        wall_ms,
                        flags: out.flags,
                    })
                })
                .collect()
        })
        .collect();
    let mut records = Vec::with_capacity(jobs.len() * cfg.estimation.methods.len());
    for r in per_job {
        records.extend(r?);
    }
    let summary = summarize(cfg, &records);
    Ok(SweepResult { sweep_var: cfg.sweep_label(), records, summary })
}

/// Metric names in output order.
pub fn metric_names() -> Vec<&'static str> {
    let mut v = Metrics::NAMES.to_vec();
    v.push("search_space_size");
    v
}

fn metric_value(r: &TrialRecord, metric: &str) -> f64 {
    match Metrics::NAMES.iter().position(|m| *m == metric) {
        Some(i) => r.metrics.values()[i],
        None => r.search_space_size as f64,
    }
}

/// Mean and standard error of every metric per `(point, method)`.
pub fn summarize(cfg: &SweepConfig, records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (point, &value) in cfg.sweep.values.iter().enumerate() {
        for &method in &cfg.estimation.methods {
            let sel: Vec<&TrialRecord> = records.iter().filter(|r| r.point == point && r.method == method).collect();
            for metric in metric_names() {
                let xs: Vec<f64> = sel.iter().map(|r| metric_value(r, metric)).collect();
                let (mean, stderr) = mean_stderr(&xs);
                rows.push(SummaryRow { value, method, metric, mean, stderr, trials: xs.len() });
            }
        }
    }
    rows
}

/// Sample mean and standard error (zero for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub const CSV_HEADER: &str = "sweep_var,value,method,metric,mean,stderr,trials";

/// Aggregated results; contains no timing, so it is reproducible byte for byte.
pub fn format_summary_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &result.summary {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", result.sweep_var, r.value, r.method, r.metric, r.mean, r.stderr, r.trials);
    }
    out
}

/// One row per trial and method, including wall time.
pub fn format_records_csv(result: &SweepResult) -> String {
    let mut out = String::from("sweep_var,value,trial,seed,method,");
    out.push_str(&metric_names().join(","));
    out.push_str(",estimates,wall_ms,flags\n");
    for r in &result.records {
        let _ = write!(out, "{},{},{},{},{}", result.sweep_var, r.value, r.trial, r.seed, r.method);
        for m in metric_names() {
            let _ = write!(out, ",{}", metric_value(r, m));
        }
        let flags = r.flags.iter().chain(&r.metrics.flags).cloned().collect::<Vec<_>>().join("; ");
        let _ = writeln!(out, ",{},{:.3},\"{}\"", r.estimates, r.wall_ms, flags.replace('"', "'"));
    }
    out
}

/// Looks up the mean of `metric` for `method` at every sweep point.
pub fn series(result: &SweepResult, method: MethodTag, metric: &str) -> Vec<(f64, f64)> {
    result
        .summary
        .iter()
        .filter(|r| r.method == method && r.metric == metric)
        .map(|r| (r.value, r.mean))
        .collect()
}
