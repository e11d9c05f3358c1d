//! Singular values of differentials, critical and almost-critical points.
//!
//! For `f: ℝ^n → ℝ^m` the spectrum of `D_x f` is `σ_1 ≥ … ≥ σ_m`, padded
//! with zeros when `m > n`. A point is `ν`-critical when `σ_{ν+1}` vanishes
//! (up to a rank tolerance) and `Λ`-almost-critical when `σ_i ≤ Λ_i` for all
//! `i`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_centers, single_linkage};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, ensure_finite, min_norm_solve, norm, op_norm, singular_values_rows};
use crate::poly::{CompiledMap, MultiPoly, PolyMap};
use crate::sampling::{derive_seed, rng, sobol, sobol_ball_point, uniform_ball, Rng64};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    /// `σ_i`, 1-based.
    pub fn sigma(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// Spectrum of an `m × n` matrix with exactly `m` values.
pub fn singular_values(m: &DMatrix<f64>) -> Result<SingularSpectrum> {
    ensure_finite(m)?;
    if m.nrows() > m.ncols() {
        log::debug!("{}x{} matrix has more rows than columns; trailing singular values are zero", m.nrows(), m.ncols());
    }
    Ok(SingularSpectrum { values: singular_values_rows(m) })
}

/// `(max_k |σ_k(M₁) − σ_k(M₂)|, ‖M₁ − M₂‖_op)`.
pub fn weyl_gap(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<(f64, f64)> {
    if m1.shape() != m2.shape() {
        return Err(Error::InvalidArgument(format!("shape mismatch {:?} vs {:?}", m1.shape(), m2.shape())));
    }
    let s1 = singular_values(m1)?;
    let s2 = singular_values(m2)?;
    let gap = s1.values.iter().zip(&s2.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((gap, op_norm(&(m1 - m2))))
}

/// Thresholds `Λ = (Λ_1, …, Λ_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaThreshold {
    values: Vec<f64>,
}

impl LambdaThreshold {
    /// Strictly positive thresholds.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("thresholds must be positive and finite: {values:?}")));
        }
        Ok(Self { values })
    }

    /// Non-negative thresholds; zeros express exact rank conditions.
    pub fn relaxed(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("thresholds must be non-negative: {values:?}")));
        }
        Ok(Self { values })
    }

    pub fn uniform(m: usize, v: f64) -> Result<Self> {
        Self::new(vec![v; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Λ + ε`, componentwise.
    pub fn inflate(&self, eps: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + eps).collect() }
    }

    pub fn admits(&self, spec: &SingularSpectrum) -> bool {
        spec.values.iter().zip(&self.values).all(|(s, l)| s <= l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTol {
    Absolute(f64),
    /// Multiple of `σ_1`.
    Relative(f64),
}

impl Default for RankTol {
    fn default() -> Self {
        RankTol::Relative(1e-9)
    }
}

impl RankTol {
    pub fn threshold(&self, spec: &SingularSpectrum) -> f64 {
        match *self {
            RankTol::Absolute(t) => t,
            RankTol::Relative(t) => t * spec.largest(),
        }
    }

    fn validate(&self) -> Result<()> {
        let t = match *self {
            RankTol::Absolute(t) | RankTol::Relative(t) => t,
        };
        if t >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("rank tolerance must be non-negative, got {t}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CritFlags {
    pub critical: bool,
    pub almost_critical: bool,
}

/// Flags from a precomputed spectrum; `nu < m` is required.
pub fn classify_spectrum(spec: &SingularSpectrum, nu: usize, lambda: &LambdaThreshold, tol: RankTol) -> Result<CritFlags> {
    let m = spec.values.len();
    if nu >= m {
        return Err(Error::InvalidArgument(format!("rank bound ν = {nu} must be below m = {m}")));
    }
    check_dim(m, lambda.values.len())?;
    tol.validate()?;
    Ok(CritFlags {
        critical: spec.values[nu] <= tol.threshold(spec),
        almost_critical: lambda.admits(spec),
    })
}

pub fn classify_point(
    f: &CompiledMap,
    x: &[f64],
    nu: usize,
    lambda: &LambdaThreshold,
    tol: RankTol,
) -> Result<(SingularSpectrum, CritFlags)> {
    check_dim(f.nvars(), x.len())?;
    let spec = singular_values(&f.jacobian(x))?;
    let flags = classify_spectrum(&spec, nu, lambda, tol)?;
    Ok((spec, flags))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Grid,
    Sobol,
    #[serde(alias = "monte_carlo")]
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Ball,
    Cube,
}

/// Which sampled points the report keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keep {
    All,
    Flagged,
}

#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub radius: f64,
    pub center: Option<Vec<f64>>,
    pub domain: Domain,
    pub sampler: Sampler,
    pub budget: usize,
    pub nu: usize,
    pub lambda: LambdaThreshold,
    pub tol: RankTol,
    pub seed: u64,
    pub keep: Keep,
    pub keep_jacobians: bool,
    /// Linkage radius for cluster centers of the almost-critical points;
    /// defaults to four sample spacings.
    pub cluster_radius: Option<f64>,
}

impl ScanConfig {
    pub fn new(radius: f64, budget: usize, nu: usize, lambda: LambdaThreshold) -> Self {
        Self {
            radius,
            center: None,
            domain: Domain::Ball,
            sampler: Sampler::Sobol,
            budget,
            nu,
            lambda,
            tol: RankTol::default(),
            seed: 0,
            keep: Keep::Flagged,
            keep_jacobians: false,
            cluster_radius: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRecord {
    pub x: Vec<f64>,
    pub sigma: Vec<f64>,
    pub crit_nu: bool,
    pub almost_crit: bool,
    pub fx: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jacobian: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanSummary {
    pub sampled: usize,
    pub critical: usize,
    pub almost_critical: usize,
    pub cluster_radius: f64,
    pub cluster_centers: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CritScanReport {
    pub records: Vec<ScanRecord>,
    pub summary: ScanSummary,
}

impl CritScanReport {
    pub fn almost_critical_points(&self) -> Vec<Vec<f64>> {
        self.records.iter().filter(|r| r.almost_crit).map(|r| r.x.clone()).collect()
    }

    pub fn almost_critical_images(&self) -> Vec<Vec<f64>> {
        self.records.iter().filter(|r| r.almost_crit).map(|r| r.fx.clone()).collect()
    }

    pub fn critical_images(&self) -> Vec<Vec<f64>> {
        self.records.iter().filter(|r| r.crit_nu).map(|r| r.fx.clone()).collect()
    }
}

const CHUNK: usize = 4096;

fn grid_axis(budget: usize, n: usize) -> usize {
    let mut g = (budget as f64).powf(1.0 / n as f64).floor() as usize;
    while (g + 1).checked_pow(n as u32).is_some_and(|v| v <= budget) {
        g += 1;
    }
    while g > 1 && g.checked_pow(n as u32).is_none_or(|v| v > budget) {
        g -= 1;
    }
    g.max(1)
}

/// Sample point `i` of the scan in the unit ball or cube centered at 0;
/// `None` for grid nodes outside the ball.
fn unit_sample(cfg: &ScanConfig, n: usize, g: usize, i: usize, mc: &mut Option<(usize, Rng64)>) -> Option<Vec<f64>> {
    let ball = cfg.domain == Domain::Ball;
    match cfg.sampler {
        Sampler::Grid => {
            let mut idx = i;
            let u: Vec<f64> = (0..n)
                .map(|_| {
                    let c = idx % g;
                    idx /= g;
                    if g == 1 {
                        0.0
                    } else {
                        -1.0 + 2.0 * c as f64 / (g - 1) as f64
                    }
                })
                .collect();
            (!ball || norm(&u) <= 1.0 + 1e-12).then_some(u)
        }
        Sampler::Sobol if ball => Some(sobol_ball_point(i, n, 1.0, cfg.seed as u32)),
        Sampler::Sobol => Some((0..n).map(|d| 2.0 * sobol(i, d, cfg.seed as u32) - 1.0).collect()),
        Sampler::Mc => {
            let chunk = i / CHUNK;
            if mc.as_ref().is_none_or(|(c, _)| *c != chunk) {
                *mc = Some((chunk, rng(derive_seed(cfg.seed, chunk as u64))));
            }
            let r = &mut mc.as_mut().expect("generator set above").1;
            if ball {
                Some(uniform_ball(r, n, 1.0))
            } else {
                Some((0..n).map(|_| r.gen_range(-1.0..=1.0)).collect())
            }
        }
    }
}

/// Samples the domain, classifies every point, and summarizes the
/// almost-critical set.
pub fn scan_almost_critical(f: &CompiledMap, cfg: &ScanConfig) -> Result<CritScanReport> {
    if cfg.budget == 0 {
        return Err(Error::InvalidArgument("scan budget must be at least 1".into()));
    }
    if !(cfg.radius > 0.0) {
        return Err(Error::InvalidArgument(format!("scan radius must be positive, got {}", cfg.radius)));
    }
    let n = f.nvars();
    let m = f.ncomps();
    if cfg.sampler == Sampler::Grid && n > 4 {
        return Err(Error::InvalidArgument(format!("grid sampling is limited to dimension 4, got {n}")));
    }
    if cfg.nu >= m {
        return Err(Error::InvalidArgument(format!("rank bound ν = {} must be below m = {m}", cfg.nu)));
    }
    check_dim(m, cfg.lambda.values.len())?;
    cfg.tol.validate()?;
    let center = cfg.center.clone().unwrap_or_else(|| vec![0.0; n]);
    check_dim(n, center.len())?;
    let g = grid_axis(cfg.budget, n);
    let total = if cfg.sampler == Sampler::Grid { g.pow(n as u32) } else { cfg.budget };
    let chunks: Vec<usize> = (0..total.div_ceil(CHUNK)).collect();
    let per_chunk: Vec<(usize, usize, usize, Vec<ScanRecord>)> = chunks
        .par_iter()
        .map(|&c| {
            let mut mc = None;
            let mut recs = Vec::new();
            let (mut sampled, mut crit, mut almost) = (0, 0, 0);
            for i in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let Some(u) = unit_sample(cfg, n, g, i, &mut mc) else {
                    continue;
                };
                let x: Vec<f64> = u.iter().zip(&center).map(|(a, c)| c + cfg.radius * a).collect();
                sampled += 1;
                let jac = f.jacobian(&x);
                let spec = SingularSpectrum { values: singular_values_rows(&jac) };
                let crit_nu = spec.values[cfg.nu] <= cfg.tol.threshold(&spec);
                let almost_crit = cfg.lambda.admits(&spec);
                crit += crit_nu as usize;
                almost += almost_crit as usize;
                if cfg.keep == Keep::All || crit_nu || almost_crit {
                    recs.push(ScanRecord {
                        fx: f.eval(&x),
                        x,
                        sigma: spec.values,
                        crit_nu,
                        almost_crit,
                        jacobian: cfg.keep_jacobians.then(|| jac.transpose().iter().copied().collect()),
                    });
                }
            }
            (sampled, crit, almost, recs)
        })
        .collect();
    let mut records = Vec::new();
    let (mut sampled, mut critical, mut almost_critical) = (0, 0, 0);
    for (s, c, a, r) in per_chunk {
        sampled += s;
        critical += c;
        almost_critical += a;
        records.extend(r);
    }
    let spacing = 2.0 * cfg.radius / (total as f64).powf(1.0 / n as f64);
    let cluster_radius = cfg.cluster_radius.unwrap_or(4.0 * spacing);
    let flagged: Vec<Vec<f64>> = records.iter().filter(|r| r.almost_crit).map(|r| r.x.clone()).collect();
    let labels = single_linkage(&flagged, cluster_radius);
    let mut cluster_centers = cluster_centers(&flagged, &labels);
    cluster_centers.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(CritScanReport {
        records,
        summary: ScanSummary { sampled, critical, almost_critical, cluster_radius, cluster_centers },
    })
}

/// Gauss–Newton on `D_x f = 0` from `x0`: moves an almost-critical sample
/// onto a nearby rank-zero critical point. `None` when the iteration does not
/// reach `‖D_x f‖_F ≤ tol`.
pub fn polish_rank_zero(f: &PolyMap<f64>, x0: &[f64], tol: f64, max_iter: usize) -> Result<Option<Vec<f64>>> {
    check_dim(f.nvars(), x0.len())?;
    let n = f.nvars();
    let grads: Vec<MultiPoly<f64>> = f.jacobian().into_iter().flatten().collect();
    let system = PolyMap::new(n, grads)?.compile();
    let mut x = x0.to_vec();
    for _ in 0..=max_iter {
        let r = DVector::from_vec(system.eval(&x));
        if r.norm() <= tol {
            return Ok(Some(x));
        }
        let Some(step) = min_norm_solve(&system.jacobian(&x), &(-r)) else {
            return Ok(None);
        };
        for (xi, s) in x.iter_mut().zip(step.iter()) {
            *xi += s;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Symmetric Hausdorff distance between finite sets; infinite when exactly
/// one side is empty.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// `sup_{x ∈ a} dist(x, b)`.
pub fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}
