//! Kolmogorov `n`-widths: exact values for coordinate ellipsoids, upper and
//! lower estimates for finite clouds, the analytic-control bound, and decay
//! rate fits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use crate::endpoint::Control;
use crate::error::{Error, Result};
use crate::linalg::{fit_half_width, linear_fit};
use crate::rational;
use crate::sampling::{derive_seed, haar_frame, rng};

pub const DEFAULT_RESTARTS: usize = 16;
pub const DEFAULT_AMBIENT_DIM: usize = 40;
const DEFAULT_ITERATIONS: usize = 100;
/// Largest `n + 1` for which the cross-polytope inradius is computed by
/// enumerating sign vectors.
const MAX_SIGN_ENUM: usize = 16;

/// Width of the coordinate ellipsoid with semi-axes `axes` (non-increasing):
/// the `(n+1)`-th axis. With `finite` the ellipsoid lives in `ℝ^{axes.len()}`
/// and widths vanish from `n = axes.len()` on; otherwise the axes are a
/// prefix of an infinite sequence and asking beyond it is an error.
pub fn width_ellipsoid(axes: &[f64], n: usize, finite: bool) -> Result<f64> {
    validate_axes(axes)?;
    match axes.get(n) {
        Some(a) => Ok(*a),
        None if finite => Ok(0.0),
        None => Err(Error::InvalidArgument(format!("index {n} beyond the {} stored axes", axes.len()))),
    }
}

fn validate_axes(axes: &[f64]) -> Result<()> {
    if axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument("semi-axes must be positive and finite".into()));
    }
    if axes.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("semi-axes must be non-increasing".into()));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct WidthOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Coordinates beyond this index are dropped and bounded separately.
    pub ambient_dim: usize,
    /// Whether to compute the cross-polytope lower bound.
    pub lower: bool,
}

impl Default for WidthOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            ambient_dim: DEFAULT_AMBIENT_DIM,
            lower: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CloudWidth {
    /// Worst-case distance of the cloud to `frame`.
    pub upper: f64,
    /// Orthonormal `D × n` frame achieving `upper` (on the kept coordinates).
    pub frame: DMatrix<f64>,
    pub method: &'static str,
}

/// Upper bound on the `n`-width of a finite cloud: the best worst-case
/// distance over PCA and `restarts` random starts, each refined by Lawson
/// reweighting of the weighted PCA subproblem.
pub fn width_cloud_upper(cloud: &[Vec<f64>], n: usize, opts: &WidthOptions) -> Result<CloudWidth> {
    let dim = check_cloud(cloud)?;
    let kept = dim.min(opts.ambient_dim.max(1));
    let dropped_sq = cloud.iter().map(|p| p[kept..].iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
    if n >= dim {
        return Ok(CloudWidth { upper: 0.0, frame: DMatrix::identity(kept, kept), method: "exact" });
    }
    let x = DMatrix::from_fn(cloud.len(), kept, |i, j| cloud[i][j]);
    if n == 0 {
        let m = cloud.iter().map(|p| crate::linalg::norm(p)).fold(0.0, f64::max);
        return Ok(CloudWidth { upper: m, frame: DMatrix::zeros(kept, 0), method: "exact" });
    }
    if n >= kept {
        return Ok(CloudWidth { upper: dropped_sq.sqrt(), frame: DMatrix::identity(kept, kept), method: "truncated" });
    }
    let uniform = vec![1.0 / cloud.len() as f64; cloud.len()];
    let (pca_best, pca_frame) = lawson(&x, uniform, n, opts.iterations);
    let restarts: Vec<(f64, DMatrix<f64>)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut g = rng(derive_seed(opts.seed, r as u64 + 1));
            let v0 = haar_frame(&mut g, kept, n);
            let d = residual_sq(&x, &v0);
            let jitter: Vec<f64> = d.iter().map(|v| v + 1e-12 * g.gen::<f64>()).collect();
            lawson(&x, normalized(jitter), n, opts.iterations)
        })
        .collect();
    let (mut best, mut frame, mut method) = (pca_best, pca_frame, "pca");
    for (b, f) in restarts {
        if b < best {
            best = b;
            frame = f;
            method = "restart";
        }
    }
    Ok(CloudWidth { upper: (best * best + dropped_sq).sqrt(), frame, method })
}

fn check_cloud(cloud: &[Vec<f64>]) -> Result<usize> {
    let first = cloud.first().ok_or(Error::Empty("point cloud"))?;
    let dim = first.len();
    for p in cloud {
        crate::error::check_dim(dim, p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(dim)
}

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.into_iter().map(|v| v / s).collect()
    } else {
        let n = w.len() as f64;
        vec![1.0 / n; w.len()]
    }
}

/// Squared distances of the rows of `x` to the span of the orthonormal `frame`.
fn residual_sq(x: &DMatrix<f64>, frame: &DMatrix<f64>) -> Vec<f64> {
    let r = x - (x * frame) * frame.transpose();
    r.row_iter().map(|row| row.norm_squared()).collect()
}

/// Top-`n` eigenvectors of `Xᵀ diag(w) X`.
fn weighted_pca(x: &DMatrix<f64>, w: &[f64], n: usize) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (mut row, wi) in xw.row_iter_mut().zip(w) {
        row *= wi.sqrt();
    }
    let m = xw.transpose() * &xw;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(x.ncols(), n, |i, j| eig.eigenvectors[(i, order[j])])
}

/// Lawson iteration for `min_V max_i dist(x_i, V)`: weighted PCA, then
/// `w_i ← w_i · dist_i`. Returns the best worst-case distance seen.
fn lawson(x: &DMatrix<f64>, mut w: Vec<f64>, n: usize, iterations: usize) -> (f64, DMatrix<f64>) {
    let mut best = f64::INFINITY;
    let mut best_frame = DMatrix::zeros(x.ncols(), n);
    for _ in 0..iterations.max(1) {
        let v = weighted_pca(x, &w, n);
        let d2 = residual_sq(x, &v);
        let worst = d2.iter().copied().fold(0.0, f64::max).sqrt();
        if worst < best {
            best = worst;
            best_frame = v;
        }
        let next: Vec<f64> = w.iter().zip(&d2).map(|(wi, di)| wi * di.sqrt()).collect();
        if next.iter().sum::<f64>() <= 0.0 {
            break;
        }
        w = normalized(next);
    }
    (best, best_frame)
}

/// Lower bound on the `n`-width of a cloud: the inradius of the largest
/// cross-polytope `conv{±x_0, …, ±x_n}` found by pivoted selection, since
/// widths are unchanged by taking balanced convex hulls and an
/// `(n+1)`-dimensional ball of radius `ρ` has `n`-width `ρ`.
pub fn width_cloud_lower(cloud: &[Vec<f64>], n: usize, seed: u64) -> Result<f64> {
    let dim = check_cloud(cloud)?;
    if n >= dim || n + 1 > cloud.len() {
        return Ok(0.0);
    }
    let mut g = rng(seed);
    let mut starts = vec![None];
    for _ in 0..8.min(cloud.len()) {
        starts.push(Some(g.gen_range(0..cloud.len())));
    }
    let mut best: f64 = 0.0;
    for s in starts {
        if let Some(idx) = pivoted_selection(cloud, n + 1, s) {
            best = best.max(cross_polytope_inradius(cloud, &idx));
        }
    }
    Ok(best)
}

fn pivoted_selection(cloud: &[Vec<f64>], count: usize, first: Option<usize>) -> Option<Vec<usize>> {
    let mut resid: Vec<DVector<f64>> = cloud.iter().map(|p| DVector::from_column_slice(p)).collect();
    let scale = resid.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut chosen = Vec::with_capacity(count);
    for step in 0..count {
        let pick = match (step, first) {
            (0, Some(i)) => i,
            _ => (0..resid.len()).max_by(|&a, &b| resid[a].norm().total_cmp(&resid[b].norm()))?,
        };
        let r = resid[pick].clone();
        let rn = r.norm();
        if rn <= 1e-12 * scale {
            return None;
        }
        let u = r / rn;
        for v in resid.iter_mut() {
            let c = u.dot(v);
            *v -= &u * c;
        }
        chosen.push(pick);
    }
    Some(chosen)
}

fn cross_polytope_inradius(cloud: &[Vec<f64>], idx: &[usize]) -> f64 {
    let k = idx.len();
    let v = DMatrix::from_fn(cloud[0].len(), k, |i, j| cloud[idx[j]][i]);
    let svd = v.svd(false, true);
    let s = &svd.singular_values;
    let smin = s.min();
    if smin <= 0.0 {
        return 0.0;
    }
    let wt = svd.v_t.expect("requested V^T");
    // facet normals are (V^+)^T ε with ‖(V^+)^T ε‖ = ‖S^{-1} Wᵀ ε‖
    let max_norm = if k <= MAX_SIGN_ENUM {
        let mut best: f64 = 0.0;
        for mask in 0..(1usize << (k - 1)) {
            let eps = DVector::from_fn(k, |j, _| if j > 0 && (mask >> (j - 1)) & 1 == 1 { -1.0 } else { 1.0 });
            let y = &wt * eps;
            let n2: f64 = y.iter().zip(s.iter()).map(|(a, b)| (a / b) * (a / b)).sum();
            best = best.max(n2.sqrt());
        }
        best
    } else {
        (k as f64).sqrt() / smin
    };
    1.0 / max_norm
}

#[derive(Clone, Debug, Serialize)]
pub struct WidthRow {
    pub n: usize,
    pub upper: f64,
    pub lower: Option<f64>,
    pub method: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct WidthReport {
    pub rows: Vec<WidthRow>,
}

impl WidthReport {
    /// Sorts by `n` and makes both columns monotone: widths are
    /// non-increasing, so an upper bound at `n` also bounds every later index
    /// and a lower bound at `n` also bounds every earlier one.
    pub fn from_rows(mut rows: Vec<WidthRow>) -> Self {
        rows.sort_by_key(|r| r.n);
        for i in 1..rows.len() {
            if rows[i].upper > rows[i - 1].upper {
                rows[i].upper = rows[i - 1].upper;
                rows[i].method = format!("{}+monotone", rows[i - 1].method);
            }
        }
        for i in (0..rows.len().saturating_sub(1)).rev() {
            if let (Some(a), Some(b)) = (rows[i].lower, rows[i + 1].lower) {
                rows[i].lower = Some(a.max(b));
            }
        }
        Self { rows }
    }

    pub fn uppers(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.upper).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,upper,lower,method\n");
        for r in &self.rows {
            let lower = r.lower.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!("{},{:e},{},{}\n", r.n, r.upper, lower, r.method));
        }
        s
    }
}

/// Widths of a cloud at each requested index. `tail_sq` bounds the squared
/// norm of coordinates of the underlying set that the cloud does not carry;
/// it is added in quadrature.
pub fn width_report_cloud(cloud: &[Vec<f64>], ns: &[usize], opts: &WidthOptions, tail_sq: f64) -> Result<WidthReport> {
    if !(tail_sq >= 0.0) {
        return Err(Error::InvalidArgument(format!("tail must be non-negative, got {tail_sq}")));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let up = width_cloud_upper(cloud, n, opts)?;
        let lower = if opts.lower { Some(width_cloud_lower(cloud, n, derive_seed(opts.seed, 1 << 32 | n as u64))?) } else { None };
        let upper = (up.upper * up.upper + tail_sq).sqrt();
        rows.push(WidthRow { n, upper, lower, method: up.method.to_string() });
    }
    Ok(WidthReport::from_rows(rows))
}

pub fn width_report_ellipsoid(axes: &[f64], ns: &[usize], finite: bool) -> Result<WidthReport> {
    let rows = ns
        .iter()
        .map(|&n| {
            let w = width_ellipsoid(axes, n, finite)?;
            Ok(WidthRow { n, upper: w, lower: Some(w), method: "exact".into() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WidthReport::from_rows(rows))
}

/// `√(kℓ) / ln r · r^{−⌊n/(kℓ)⌋}`, the width bound for the unit ball of
/// `ℓ`-piece analytic controls with radius of convergence above `r`.
pub fn width_analytic_bound(k: usize, l: usize, r: f64, n: usize) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::InvalidArgument(format!("radius must exceed 1, got {r}")));
    }
    if k == 0 || l == 0 {
        return Err(Error::InvalidArgument("rank and piece count must be positive".into()));
    }
    let kl = (k * l) as f64;
    Ok(kl.sqrt() / r.ln() * r.powi(-((n / (k * l)) as i32)))
}

/// Cloud of `L²(I, ℝ^k)` coordinates of analytic controls in the unit ball.
///
/// On each piece `I_a` (midpoint `c`, length `1/ℓ`) channel `j` is
/// `Σ_{h<depth} b_{jh} (t − c)^h` with `Σ_{j,h} |b_{jh}| ρ^h ≤ 1`,
/// `ρ = r + 1/(2ℓ)`; since `𝒟(r, I_a)` lies in the disk of radius `ρ`
/// around `c`, such controls have norm at most 1. Half of the samples sit on
/// vertices of that constraint set. Coordinates are orthonormal shifted
/// Legendre coefficients ordered by piece, channel, degree.
pub fn analytic_ball_cloud(k: usize, l: usize, r: f64, depth: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(r > 0.0) || k == 0 || l == 0 || depth == 0 {
        return Err(Error::InvalidArgument("need r > 0 and positive k, ℓ, depth".into()));
    }
    let rho = r + 0.5 / l as f64;
    let block = k * depth;
    let mut g = rng(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut coords = Vec::with_capacity(l * block);
        for _ in 0..l {
            let mut w = vec![0.0; block];
            if i % 2 == 0 {
                w[g.gen_range(0..block)] = 1.0;
            } else {
                let e: Vec<f64> = (0..block).map(|_| -g.gen::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
                let s: f64 = e.iter().sum();
                let radius = g.gen::<f64>();
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi = radius * ei / s;
                }
            }
            for ch in 0..k {
                // coefficients in τ = 2ℓ (t − c) ∈ [−1, 1]
                let tau: Vec<f64> = (0..depth)
                    .map(|h| {
                        let sign = if g.gen::<bool>() { 1.0 } else { -1.0 };
                        sign * w[ch * depth + h] * rho.powi(-(h as i32)) * (2.0 * l as f64).powi(-(h as i32))
                    })
                    .collect();
                let leg = monomial_to_legendre(&tau);
                coords.extend(leg.iter().enumerate().map(|(j, a)| a / ((l * (2 * j + 1)) as f64).sqrt()));
            }
        }
        out.push(coords);
    }
    Ok(out)
}

/// Legendre coefficients of `Σ_h c_h τ^h`.
pub fn monomial_to_legendre(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    // `pow` holds τ^h in the Legendre basis; τ P_j = ((j+1) P_{j+1} + j P_{j−1}) / (2j+1)
    let mut pow = vec![0.0; n];
    if n == 0 {
        return out;
    }
    pow[0] = 1.0;
    for (h, ch) in c.iter().enumerate() {
        if h > 0 {
            let mut next = vec![0.0; n];
            for j in 0..h {
                let a = pow[j];
                if a == 0.0 {
                    continue;
                }
                let jf = j as f64;
                next[j + 1] += a * (jf + 1.0) / (2.0 * jf + 1.0);
                if j > 0 {
                    next[j - 1] += a * jf / (2.0 * jf + 1.0);
                }
            }
            pow = next;
        }
        for (o, p) in out.iter_mut().zip(&pow) {
            *o += ch * p;
        }
    }
    out
}

/// An analytic control given by Taylor coefficients at `t = 0`, holomorphic
/// on `𝒟(r, I)` with `sup ‖u‖ ≤ sup_bound` there.
#[derive(Clone, Debug)]
pub struct AnalyticControl {
    pub taylor: Vec<Vec<f64>>,
    pub radius: f64,
    pub sup_bound: f64,
}

#[derive(Clone, Debug)]
pub struct TaylorProjection {
    pub control: Control,
    /// `M √k r^{−N} / ln r`.
    pub bound: f64,
    /// `M √k r^{−N} · r / (r − 1)`: the Cauchy-estimate geometric tail summed exactly.
    pub geometric_bound: f64,
}

/// Truncation of the Taylor series to degree `n − 1` with its tail bounds.
pub fn taylor_project(u: &AnalyticControl, n: usize) -> Result<TaylorProjection> {
    let r = u.radius;
    if !(r > 1.0) {
        return Err(Error::InvalidArgument(format!("radius must exceed 1, got {r}")));
    }
    if n == 0 || u.taylor.is_empty() {
        return Err(Error::InvalidArgument("need a positive truncation and at least one channel".into()));
    }
    let comps = u
        .taylor
        .iter()
        .map(|c| c.iter().take(n).map(|v| rational::from_f64(*v)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let k = u.taylor.len() as f64;
    let base = u.sup_bound * k.sqrt() * r.powi(-(n as i32));
    Ok(TaylorProjection { control: Control::polynomial(comps), bound: base / r.ln(), geometric_bound: base * r / (r - 1.0) })
}

#[derive(Clone, Debug, Serialize)]
pub struct OmegaRate {
    /// `exp(slope)` of `ln Ω_n` against `n`.
    pub rate: f64,
    /// Half-width of the 95% interval for `rate`.
    pub half_width: f64,
    pub slope: f64,
    pub used: Vec<usize>,
}

/// Log-linear fit of the upper column. The first two and the last entry are
/// dropped as transient and floor effects when at least three remain.
pub fn omega_rate(report: &WidthReport) -> Result<OmegaRate> {
    let pts: Vec<(usize, f64)> = report.rows.iter().filter(|r| r.upper > 0.0 && r.upper.is_finite()).map(|r| (r.n, r.upper)).collect();
    if pts.len() < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 positive entries, got {}", pts.len())));
    }
    let regime = if pts.len() >= 6 { &pts[2..pts.len() - 1] } else { &pts[..] };
    let x: Vec<f64> = regime.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = regime.iter().map(|p| p.1.ln()).collect();
    let (slope, _, se) = linear_fit(&x, &y);
    let hw = fit_half_width(se, regime.len());
    let rate = slope.exp();
    Ok(OmegaRate {
        rate,
        half_width: ((slope + hw).exp() - (slope - hw).exp()) / 2.0,
        slope,
        used: regime.iter().map(|p| p.0).collect(),
    })
}

/// Sets whose widths the lab can report.
#[derive(Clone, Debug)]
pub enum CompactSetModel {
    Ellipsoid { axes: Vec<f64>, finite: bool },
    Cloud { points: Vec<Vec<f64>>, tail_sq: f64 },
    AnalyticClass { k: usize, pieces: usize, r: f64, depth: usize, samples: usize },
}

impl CompactSetModel {
    pub fn report(&self, ns: &[usize], opts: &WidthOptions) -> Result<WidthReport> {
        match self {
            CompactSetModel::Ellipsoid { axes, finite } => width_report_ellipsoid(axes, ns, *finite),
            CompactSetModel::Cloud { points, tail_sq } => width_report_cloud(points, ns, opts, *tail_sq),
            CompactSetModel::AnalyticClass { k, pieces, r, depth, samples } => {
                let cloud = analytic_ball_cloud(*k, *pieces, *r, *depth, *samples, opts.seed)?;
                width_report_cloud(&cloud, ns, opts, 0.0)
            }
        }
    }
}
