//! Batch experiment runner: configuration, seeding and artifact emission.
//!
//! Every experiment writes deterministic CSV/JSON bodies into its output
//! directory plus a `manifest.json` carrying versions, the master seed and
//! timings. Re-running a configuration reproduces the bodies byte for byte.

mod config;
mod pipeline;
mod runs;
pub mod sources;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{ExperimentConfig, OUT_ENV};
pub use pipeline::{sard_pipeline, PipelineOptions, PipelineReport, PipelineRow};

use crate::error::{Error, Result};

/// The runnable experiments, one per CLI subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KupkaVerify,
    SeriesMap,
    EndpointPoly,
    CritScan,
    EntropyDim,
    Variations,
    Width,
    Surjectivity,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::KupkaVerify,
        Experiment::SeriesMap,
        Experiment::EndpointPoly,
        Experiment::CritScan,
        Experiment::EntropyDim,
        Experiment::Variations,
        Experiment::Width,
        Experiment::Surjectivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::KupkaVerify => "kupka-verify",
            Experiment::SeriesMap => "series-map",
            Experiment::EndpointPoly => "endpoint-poly",
            Experiment::CritScan => "crit-scan",
            Experiment::EntropyDim => "entropy-dim",
            Experiment::Variations => "variations",
            Experiment::Width => "width",
            Experiment::Surjectivity => "surjectivity",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment {name:?}")))
    }
}

/// A property verified by a run; any failure turns the exit code to 2.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    /// Artifact file names relative to `out_dir`, manifest last.
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub summary: Value,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

/// Exit code of a run that failed before producing results: 1 for
/// configuration and input errors, 2 for numerical failures of the property
/// being tested (non-convergence, exhausted searches, infeasible budgets).
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } | Error::SearchExhausted { .. } | Error::BudgetInfeasible(_) | Error::BlockNorm { .. } => 2,
        _ => 1,
    }
}

/// Collects artifacts of one run.
pub(crate) struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub(crate) fn write(&mut self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub(crate) fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, &body)
    }
}

/// Result of one experiment body before the manifest is written.
pub(crate) struct Report {
    pub checks: Vec<Check>,
    pub summary: Value,
}

/// Runs `experiment` with the effective configuration `cfg` and writes its
/// artifacts plus `manifest.json`.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out_dir = cfg.out_dir(experiment);
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let mut art = Artifacts::create(&out_dir)?;
    let report = match experiment {
        Experiment::KupkaVerify => runs::kupka_verify(cfg, &mut art)?,
        Experiment::SeriesMap => runs::series_map(cfg, &mut art)?,
        Experiment::EndpointPoly => runs::endpoint_poly(cfg, &mut art)?,
        Experiment::CritScan => runs::crit_scan(cfg, &mut art)?,
        Experiment::EntropyDim => runs::entropy_dim(cfg, &mut art)?,
        Experiment::Variations => runs::variations(cfg, &mut art)?,
        Experiment::Width => runs::width(cfg, &mut art)?,
        Experiment::Surjectivity => runs::surjectivity(cfg, &mut art)?,
    };
    let wall = started.elapsed().as_secs_f64();
    let mut config = serde_json::to_value(cfg)?;
    if let Value::Object(map) = &mut config {
        map.retain(|_, v| !v.is_null());
    }
    let manifest = json!({
        "experiment": experiment.name(),
        "versions": {
            "sardlab": env!("CARGO_PKG_VERSION"),
            "artifact_format": 1,
        },
        "seed": cfg.seed(),
        "threads": rayon::current_num_threads(),
        "started_unix": started_unix,
        "wall_time_s": wall,
        "config": config,
        "files": art.files,
        "checks": report.checks,
        "summary": report.summary,
    });
    art.write_json("manifest.json", &manifest)?;
    Ok(RunOutcome { experiment, out_dir, files: art.files, checks: report.checks, summary: report.summary })
}
