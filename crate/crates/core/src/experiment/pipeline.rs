//! Composite Sard experiment on a series map: for each `ε` the truncation
//! depth is `n_ε = ⌈log_q(c/ε)⌉`, the almost-critical set of `f_{n_ε}` at
//! thresholds `Λ + ε` is scanned on `B(r)`, and its image is covered by
//! `ε`-balls.

use serde::Serialize;

use crate::critical::{scan_almost_critical, LambdaThreshold, ScanConfig};
use crate::entropy::{epsilon_entropy, variation_estimate, PointCloud, VariationOptions};
use crate::error::{Error, Result};
use crate::linalg::{fit_half_width, linear_fit};
use crate::sampling::derive_seed;
use crate::series::SeriesMap;

#[derive(Clone, Debug, Serialize)]
pub struct PipelineOptions {
    /// Approximation constant `c` of `‖f − f_n‖ ≤ c q^{−n}`.
    pub c: f64,
    pub radius: f64,
    pub budget: usize,
    pub nu: usize,
    /// `Λ_1..Λ_ν`; entries past `ν` are zero.
    pub lambda: Vec<f64>,
    /// Crofton pairs per variation estimate; 0 skips the variation check.
    pub variation_samples: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { c: 1.0, radius: 1.0, budget: 1 << 14, nu: 0, lambda: Vec::new(), variation_samples: 2000, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineRow {
    pub eps: f64,
    pub n_eps: usize,
    /// Set when `n_ε` exceeded the materialized depth and was capped.
    pub capped: bool,
    pub sampled: usize,
    pub flagged: usize,
    pub upper: usize,
    pub lower: usize,
    /// `V_0..V_m` of the almost-critical image; empty when skipped.
    pub variations: Vec<f64>,
    /// `M(ε) / Σ_i V_i ε^{−i}`.
    pub variation_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub rows: Vec<PipelineRow>,
    /// Slope of `ln M(ε)` against `ln(1/(2ε))`.
    pub dimension: Option<f64>,
    pub half_width: Option<f64>,
    /// Smallest `C(m)` with `M(ε) ≤ C(m) Σ_i V_i ε^{−i}` on every row.
    pub variation_constant: Option<f64>,
}

impl PipelineReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,n_eps,capped,sampled,flagged,upper,lower,variations,variation_ratio\n");
        for r in &self.rows {
            let vars: Vec<String> = r.variations.iter().map(|v| format!("{v:e}")).collect();
            let ratio = r.variation_ratio.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!(
                "{:e},{},{},{},{},{},{},{},{}\n",
                r.eps,
                r.n_eps,
                r.capped,
                r.sampled,
                r.flagged,
                r.upper,
                r.lower,
                vars.join(";"),
                ratio
            ));
        }
        s
    }
}

/// `⌈log_q(c/ε)⌉`, at least 1.
pub fn depth_for(eps: f64, c: f64, q: f64) -> usize {
    // absorb rounding when c/ε is an exact power of q
    ((c / eps).ln() / q.ln() - 1e-9).ceil().max(1.0) as usize
}

pub fn sard_pipeline(series: &SeriesMap, ladder: &[f64], opts: &PipelineOptions) -> Result<PipelineReport> {
    if ladder.is_empty() {
        return Err(Error::Empty("ε ladder"));
    }
    if ladder.iter().any(|e| !(*e > 0.0)) || !(opts.c > 0.0) {
        return Err(Error::InvalidArgument("ε and c must be positive".into()));
    }
    let spec = series.spec();
    let m = spec.m;
    if opts.nu >= m {
        return Err(Error::InvalidArgument(format!("ν = {} must be below m = {m}", opts.nu)));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for (rung, &eps) in ladder.iter().enumerate() {
        let wanted = depth_for(eps, opts.c, spec.q).max(m);
        let n = wanted.min(series.depth());
        let f = series.truncation(n)?.compile();
        let lambda: Vec<f64> = (0..m).map(|h| if h < opts.nu { opts.lambda.get(h).copied().unwrap_or(0.0) } else { 0.0 } + eps).collect();
        let mut cfg = ScanConfig::new(opts.radius, opts.budget, opts.nu, LambdaThreshold::new(lambda)?);
        cfg.seed = derive_seed(opts.seed, rung as u64);
        let report = scan_almost_critical(&f, &cfg)?;
        let images = report.almost_critical_images();
        let mut row = PipelineRow {
            eps,
            n_eps: n,
            capped: wanted > n,
            sampled: report.summary.sampled,
            flagged: images.len(),
            upper: 0,
            lower: 0,
            variations: Vec::new(),
            variation_ratio: None,
        };
        if !images.is_empty() {
            let cloud = PointCloud::new(m, images, format!("almost-critical values, n = {n}"))?;
            let count = epsilon_entropy(&cloud, eps)?;
            row.upper = count.upper;
            row.lower = count.lower;
            if opts.variation_samples > 0 && cloud.len() > 1 {
                let vopts = VariationOptions {
                    samples: opts.variation_samples,
                    seed: derive_seed(opts.seed, 1 << 20 | rung as u64),
                    max_index: m,
                    ..VariationOptions::default()
                };
                let vars = (0..=m)
                    .map(|i| variation_estimate(&cloud, i, &vopts).map(|v| v.value.max(0.0)))
                    .collect::<Result<Vec<f64>>>()?;
                let weighted: f64 = vars.iter().enumerate().map(|(i, v)| v * eps.powi(-(i as i32))).sum();
                if weighted > 0.0 {
                    row.variation_ratio = Some(count.upper as f64 / weighted);
                }
                row.variations = vars;
            }
        }
        rows.push(row);
    }
    let used: Vec<&PipelineRow> = rows.iter().filter(|r| r.upper > 0).collect();
    let (dimension, half_width) = if used.len() >= 3 {
        let x: Vec<f64> = used.iter().map(|r| (1.0 / (2.0 * r.eps)).ln()).collect();
        let y: Vec<f64> = used.iter().map(|r| (r.upper as f64).ln()).collect();
        let (slope, _, se) = linear_fit(&x, &y);
        (Some(slope), Some(fit_half_width(se, x.len())))
    } else {
        (None, None)
    };
    let variation_constant = rows.iter().filter_map(|r| r.variation_ratio).reduce(f64::max);
    Ok(PipelineReport { rows, dimension, half_width, variation_constant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_rule() {
        // c / ε = 64 = 4^3
        assert_eq!(depth_for(1.0 / 64.0, 1.0, 4.0), 3);
        assert_eq!(depth_for(1.0 / 65.0, 1.0, 4.0), 4);
        assert_eq!(depth_for(2.0, 1.0, 4.0), 1);
    }
}
