use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Experiment;
use crate::critical::LambdaThreshold;
use crate::error::{parse_json, Error, Result};
use crate::rational::{parse_q, to_f64, Q};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SARDLAB_OUT";

const DEFAULT_OUT: &str = "sardlab-out";

/// Parameters of a run. Every field is optional: a JSON file supplies a base
/// configuration, command-line flags override it field by field, and each
/// experiment fills the remaining gaps with its own defaults.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment name (file only; the subcommand sets it on the command line).
    #[arg(skip)]
    pub experiment: Option<String>,
    /// Master seed; every random quantity derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: $SARDLAB_OUT/<experiment> or ./sardlab-out/<experiment>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the parallel parts.
    #[arg(long)]
    pub threads: Option<usize>,

    /// Carnot group: heisenberg, engel, free(k,s) or a JSON group file.
    #[arg(long)]
    pub group: Option<String>,
    /// Control basis: poly_degree(d), piecewise_const(l), piecewise_poly(l,d),
    /// piecewise_legendre(l,d) or a JSON basis file.
    #[arg(long)]
    pub basis: Option<String>,

    /// Map family: kupka, product, rankzero, series, band or endpoint.
    #[arg(long)]
    pub family: Option<String>,
    /// JSON polynomial map file `{"nvars": n, "components": [[[[α…], "p/q"], …], …]}`.
    #[arg(long)]
    pub map_file: Option<PathBuf>,
    /// Degree parameter of the Kupka polynomial ψ.
    #[arg(long)]
    pub d: Option<usize>,
    /// Decay base q, decimal or p/q.
    #[arg(long)]
    #[serde(deserialize_with = "number_or_string")]
    pub q: Option<String>,
    /// Truncation depth N.
    #[arg(long, visible_alias = "N")]
    pub depth: Option<usize>,
    /// Codomain dimension m (product, rankzero and series families).
    #[arg(long)]
    pub m: Option<usize>,

    /// Point-cloud source: segment, disk, cantor(depth), segment-x-cantor(depth),
    /// kupka-values, kupka-grid, ellipsoid, analytic or csv:<path>.
    #[arg(long)]
    pub source: Option<String>,
    /// Points drawn for sampled clouds.
    #[arg(long)]
    pub points: Option<usize>,

    /// Scan budget (sampled points per scan).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Monte Carlo samples (Crofton pairs, sup-grid points).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random controls compared against RK4.
    #[arg(long)]
    pub controls: Option<usize>,
    /// RK4 step count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Random targets handed to the surjectivity solver.
    #[arg(long)]
    pub targets: Option<usize>,
    /// Degree budget of the surjectivity certificate.
    #[arg(long)]
    pub degree_budget: Option<usize>,

    /// Domain radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Domain center, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub center: Option<Vec<f64>>,
    /// Scan sampler: sobol, grid or mc.
    #[arg(long)]
    pub sampler: Option<String>,
    /// Scan domain: ball or cube.
    #[arg(long)]
    pub domain: Option<String>,
    /// Rank ν of Crit_ν.
    #[arg(long)]
    pub nu: Option<usize>,
    /// Almost-critical thresholds Λ, comma separated (one value is broadcast).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Option<Vec<f64>>,
    /// Threshold ladder rungs, each a comma-separated Λ (repeat the flag).
    #[arg(long)]
    pub lambda_ladder: Option<Vec<String>>,

    /// ε ladder, comma separated (geometric).
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Width indices n, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Variation indices i, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub indices: Option<Vec<usize>>,
    /// Ellipsoid semi-axes, comma separated (non-increasing).
    #[arg(long, value_delimiter = ',')]
    pub axes: Option<Vec<f64>>,
    /// Channels k of analytic controls.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Pieces ℓ of analytic controls.
    #[arg(long)]
    pub pieces: Option<usize>,
    /// Convergence radius r > 1 of analytic controls.
    #[arg(long)]
    pub analytic_radius: Option<f64>,
    /// Fiber half-width δ of the variation estimator.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Approximation constant c in n_ε = ⌈log_q(c/ε)⌉.
    #[arg(long)]
    pub c: Option<f64>,
    /// Relative tolerance of the property checks.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Emit an RK4 convergence study.
    #[arg(long)]
    pub convergence: Option<bool>,
}

impl ExperimentConfig {
    /// Reads a JSON configuration; syntax errors carry their line and column.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        parse_json(&text).map_err(|e| anchor(path, e))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlay(&self, flags: &ExperimentConfig) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        let top = serde_json::to_value(flags)?;
        if let (Value::Object(b), Value::Object(t)) = (&mut base, top) {
            for (k, v) in t {
                if !v.is_null() {
                    b.insert(k, v);
                }
            }
        }
        Ok(serde_json::from_value(base)?)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn out_dir(&self, experiment: Experiment) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        root.join(experiment.name())
    }

    pub fn q_exact(&self, default: &str) -> Result<Q> {
        parse_q(self.q.as_deref().unwrap_or(default))
    }

    pub fn q_f64(&self, default: &str) -> Result<f64> {
        self.q_exact(default).map(|v| to_f64(&v))
    }

    /// Parsed threshold ladder.
    pub fn ladder(&self) -> Result<Option<Vec<LambdaThreshold>>> {
        let Some(rungs) = &self.lambda_ladder else { return Ok(None) };
        rungs
            .iter()
            .map(|r| {
                let vals = r
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad threshold {v:?} in {r:?}"))))
                    .collect::<Result<Vec<f64>>>()?;
                LambdaThreshold::new(vals)
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Range and shape checks shared by every experiment.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if let Some(t) = self.threads {
            if t == 0 {
                return bad("threads must be at least 1".into());
            }
        }
        if let Some(q) = &self.q {
            let v = parse_q(q)?;
            if to_f64(&v) <= 0.0 {
                return bad(format!("q must be positive, got {q}"));
            }
        }
        for (name, v) in [("radius", self.radius), ("delta", self.delta), ("c", self.c), ("tolerance", self.tolerance)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return bad(format!("{name} must be positive and finite, got {v}"));
                }
            }
        }
        if let Some(r) = self.analytic_radius {
            if !(r > 1.0) || !r.is_finite() {
                return bad(format!("analytic radius must exceed 1, got {r}"));
            }
        }
        if let Some(eps) = &self.eps {
            if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
                return bad("ε ladder values must be positive".into());
            }
            crate::entropy::check_geometric(eps, 2)?;
        }
        if let Some(l) = &self.lambda {
            if l.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return bad("thresholds must be non-negative".into());
            }
        }
        if let Some(axes) = &self.axes {
            if axes.iter().any(|a| !(*a >= 0.0)) || axes.windows(2).any(|w| w[1] > w[0]) {
                return bad("semi-axes must be non-negative and non-increasing".into());
            }
        }
        for (name, v) in [
            ("points", self.points),
            ("budget", self.budget),
            ("samples", self.samples),
            ("controls", self.controls),
            ("steps", self.steps),
            ("depth", self.depth),
            ("m", self.m),
            ("channels", self.channels),
            ("pieces", self.pieces),
        ] {
            if v == Some(0) {
                return bad(format!("{name} must be at least 1"));
            }
        }
        self.ladder()?;
        Ok(())
    }
}

/// Accepts `"q": 1.1` as well as `"q": "11/10"`.
fn number_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    match Option::<Value>::deserialize(d)? {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(other) => Err(serde::de::Error::custom(format!("q must be a number or a string, got {other}"))),
    }
}

/// Prefixes a parse error with the file it came from.
pub(crate) fn anchor(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, column, msg } => Error::Parse { line, column, msg: format!("{}: {msg}", path.display()) },
        other => Error::InvalidArgument(format!("{}: {other}", path.display())),
    }
}
