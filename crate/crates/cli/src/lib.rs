//! Configuration-driven experiments on top of `noon-core`: crossing scans,
//! coupling grids, Rabi oscillations, decoherence sweeps, NOON schedules and
//! path-sum reports, written as CSV tables plus a key=value manifest.

pub mod config;
pub mod experiments;
pub mod output;
pub mod parallel;
pub mod units;

use std::fs;
use std::path::{Path, PathBuf};

use config::{ConfigError, RunConfig};
use output::Manifest;
use parallel::Pool;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("computation: {0}")]
    Core(#[from] noon_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("environment: {0}")]
    Env(String),
}

impl RunError {
    /// Configuration problems exit with 2, everything else with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Env(_) => 2,
            _ => 1,
        }
    }

    /// Fields of the machine-readable error record.
    pub fn record(&self) -> Vec<(&'static str, String)> {
        let mut r = match self {
            RunError::Config(e) => {
                let mut r = vec![("error", "config".to_string())];
                r.extend(e.record());
                r
            }
            RunError::Core(_) => vec![("error", "computation".to_string())],
            RunError::Io { .. } => vec![("error", "io".to_string())],
            RunError::Env(_) => vec![("error", "environment".to_string())],
        };
        r.push(("message", self.to_string()));
        r
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

/// Paths written by a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub tables: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Runs a configuration and writes `<name>.csv`, `<name>_<table>.csv` and
/// `<name>.manifest` into the output directory. A relative `output_dir` is
/// resolved against `base`.
pub fn execute(cfg: &RunConfig, base: &Path, pool: &Pool) -> Result<RunOutput, RunError> {
    let dir = base.join(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
    let started = std::time::Instant::now();
    let outcome = experiments::run(cfg, pool)?;
    let wall = started.elapsed().as_secs_f64();
    let mut manifest = Manifest::default();
    manifest.push("tool", concat!("noon ", env!("CARGO_PKG_VERSION")));
    manifest.extend(cfg.describe());
    manifest.push("threads", pool.threads().to_string());
    manifest.push("csv.significant_digits", output::SIG_DIGITS.to_string());
    let mut tables = Vec::new();
    for (suffix, table) in &outcome.tables {
        let file = if suffix.is_empty() {
            format!("{}.csv", cfg.name)
        } else {
            format!("{}_{suffix}.csv", cfg.name)
        };
        let path = dir.join(&file);
        table
            .write(&path)
            .map_err(io_err(format!("writing {}", path.display())))?;
        let key = if suffix.is_empty() {
            "table".to_string()
        } else {
            format!("table.{suffix}")
        };
        manifest.push(format!("{key}.file"), file);
        manifest.push(format!("{key}.rows"), table.rows.len().to_string());
        tables.push(path);
    }
    manifest.extend(outcome.summary.iter().map(|(k, v)| (format!("result.{k}"), v.clone())));
    manifest.push("wall_time_s", format!("{wall:.3}"));
    let path = dir.join(format!("{}.manifest", cfg.name));
    manifest
        .write(&path)
        .map_err(io_err(format!("writing {}", path.display())))?;
    Ok(RunOutput { tables, manifest: path })
}
