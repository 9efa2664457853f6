//! Experiment runner: parses a JSON config, sweeps its parameter grid on a
//! fixed-size thread pool and writes `results.csv`, `summary.json` and a
//! `timing.json` sidecar atomically.

pub mod config;
pub mod experiments;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use projlab_core::curve::Curve;
use rayon::prelude::*;
use serde_json::{json, Value};

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::{ComboResult, RunCache};

/// Exit status for a run whose thresholds failed.
pub const EXIT_THRESHOLD: u8 = 2;
/// Exit status for invalid input or runtime errors.
pub const EXIT_ERROR: u8 = 1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub dump_field: bool,
}

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub threads: usize,
    pub results: Vec<ComboResult>,
    pub wall_ms: Vec<f64>,
    pub total_ms: f64,
}

impl RunOutput {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|r| r.pass())
    }

    pub fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(experiments::header(self.config.experiment))?;
        for r in &self.results {
            for row in &r.rows {
                w.write_record(row)?;
            }
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
    }

    pub fn summary(&self) -> Value {
        let results: Vec<Value> = self
            .results
            .iter()
            .map(|r| {
                let params: serde_json::Map<String, Value> = r
                    .combo
                    .values
                    .iter()
                    .map(|(p, v)| (p.key().to_string(), json!(v)))
                    .collect();
                json!({
                    "index": r.combo.index,
                    "params": params,
                    "metrics": r.metrics,
                    "checks": r.checks,
                    "pass": r.pass(),
                })
            })
            .collect();
        json!({
            "tool": "projlab",
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": self.config.experiment.name(),
            "config_hash": self.config.hash(),
            "config": self.config,
            "threads": self.threads,
            "thresholds": self.config.thresholds,
            "results": results,
            "pass": self.pass(),
        })
    }

    pub fn timing(&self) -> Value {
        json!({
            "total_ms": self.total_ms,
            "combos": self.wall_ms.iter().enumerate()
                .map(|(i, ms)| json!({"index": i, "wall_ms": ms}))
                .collect::<Vec<_>>(),
        })
    }
}

/// Thread budget: flag or environment first, then the config, then 1.
pub fn thread_budget(opts: &RunOptions, cfg: &ExperimentConfig) -> usize {
    opts.threads.or(cfg.threads).unwrap_or(1).max(1)
}

/// Parses and runs a configuration without writing anything.
pub fn execute(text: &str, opts: &RunOptions) -> Result<RunOutput> {
    let mut cfg = ExperimentConfig::parse(text)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let curve = Curve::from_spec(&cfg.curve).context("curve")?;
    let threads = thread_budget(opts, &cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("thread pool")?;
    let combos = cfg.combos();
    let cache = RunCache::default();
    let start = Instant::now();
    let timed: Vec<(ComboResult, f64)> = pool.install(|| {
        combos
            .par_iter()
            .map(|c| {
                let t = Instant::now();
                let r = experiments::run_combo(&cfg, &curve, c, opts.dump_field, &cache)?;
                Ok((r, t.elapsed().as_secs_f64() * 1e3))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let (results, wall_ms) = timed.into_iter().unzip();
    Ok(RunOutput {
        config: cfg,
        threads,
        results,
        wall_ms,
        total_ms,
    })
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name))
        .map_err(|e| anyhow::anyhow!("writing {name}: {}", e.error))?;
    Ok(())
}

/// Writes every output of a finished run into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = out.csv()?;
    let mut summary = serde_json::to_vec_pretty(&out.summary())?;
    summary.push(b'\n');
    let mut timing = serde_json::to_vec_pretty(&out.timing())?;
    timing.push(b'\n');
    for r in &out.results {
        if let Some(f) = &r.field {
            let stem = format!("field_{:03}", r.combo.index);
            write_atomic(dir, &format!("{stem}.bin"), &f.bytes)?;
            let side = serde_json::to_vec_pretty(&json!({"N": f.n, "h": f.h, "dtype": "complex64-le"}))?;
            write_atomic(dir, &format!("{stem}.json"), &side)?;
        }
    }
    write_atomic(dir, "results.csv", &csv)?;
    write_atomic(dir, "summary.json", &summary)?;
    write_atomic(dir, "timing.json", &timing)?;
    Ok(())
}

/// Runs a config file end to end; returns the process exit status.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<u8> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let out = execute(&text, opts)?;
    let dir = opts
        .out
        .clone()
        .or_else(|| out.config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("projlab-out"));
    write_outputs(&out, &dir)?;
    Ok(if out.pass() { 0 } else { EXIT_THRESHOLD })
}

/// Text printed by --list-experiments.
pub fn list_experiments() -> String {
    let mut s = String::new();
    for e in Experiment::ALL {
        let params: Vec<&str> = e.params().iter().map(|p| p.key()).collect();
        let (lo, hi) = e.level_range();
        s.push_str(&format!("{}\n", e.name()));
        s.push_str(&format!("  parameters: {}\n", params.join(", ")));
        if e == Experiment::Decoupling {
            s.push_str(&format!("  R range: 2^{lo}..2^{hi}\n"));
        } else {
            s.push_str(&format!("  delta range: 2^-{hi}..2^-{lo}\n"));
        }
        s.push_str(&format!("  columns: {}\n", experiments::header(e).join(",")));
        s.push_str(&format!("  {}\n", experiments::describe(e)));
    }
    s
}
