//! ε-entropy and entropy dimension of point clouds, and Monte Carlo
//! Cauchy–Crofton estimates of Vitushkin variations.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::cluster::{count_components, count_components_of};
use crate::critical::{scan_almost_critical, CritScanReport, LambdaThreshold, ScanConfig, ScanRecord};
use crate::error::{Error, Result};
use crate::linalg::{dist2, fit_half_width, linear_fit};
use crate::poly::PolyMap;
use crate::sampling::{derive_seed, haar_frame, rng};

/// Fibers with fewer sample points than this count as sparse.
pub const SPARSE_FIBER_POINTS: usize = 5;
/// Share of sparse fibers above which an estimate is flagged.
pub const SPARSE_FIBER_SHARE: f64 = 0.9;
/// Default fiber half-width in units of the median nearest-neighbour distance.
pub const DEFAULT_DELTA_FACTOR: f64 = 3.0;

/// Nearest-neighbour queries used to estimate the median spacing.
const SPACING_QUERIES: usize = 1000;

#[derive(Clone, Debug, Serialize)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
    meta: String,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, meta: impl Into<String>) -> Result<Self> {
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("cloud has a non-finite coordinate".into()));
            }
        }
        Ok(Self { dim, points, meta: meta.into() })
    }

    /// Infers the dimension from the first point.
    pub fn from_points(points: Vec<Vec<f64>>, meta: impl Into<String>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::Empty("point cloud"))?;
        Self::new(dim, points, meta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn meta(&self) -> &str {
        &self.meta
    }

    /// Median distance to the nearest other point, over an evenly strided
    /// subset of at most 1000 query points. `None` with fewer than two points.
    pub fn median_spacing(&self) -> Option<f64> {
        let n = self.points.len();
        if n < 2 {
            return None;
        }
        let stride = n.div_ceil(SPACING_QUERIES);
        let mut d: Vec<f64> = (0..n)
            .step_by(stride)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&i| {
                let p = &self.points[i];
                self.points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| dist2(p, q))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }
}

fn check_nonempty(cloud: &PointCloud) -> Result<()> {
    if cloud.is_empty() {
        Err(Error::Empty("point cloud"))
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoveringCount {
    pub eps: f64,
    /// Balls in an explicit ε-covering.
    pub upper: usize,
    /// Points of an explicit 2ε-separated set.
    pub lower: usize,
}

/// Farthest-point insertion radii: entry `k ≥ 1` is the distance from the
/// `k`-th chosen point to the earlier ones, entry 0 is infinite. Stops once
/// every point is within `stop` of a chosen one.
fn farthest_point_radii(points: &[Vec<f64>], stop: f64) -> Vec<f64> {
    let mut min_d: Vec<f64> = points.par_iter().map(|p| dist2(p, &points[0])).collect();
    let mut radii = vec![f64::INFINITY];
    let stop2 = stop * stop;
    loop {
        let (far, d) = min_d
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if d <= stop2 {
            return radii;
        }
        radii.push(d.sqrt());
        let c = points[far].clone();
        min_d.par_iter_mut().zip(points.par_iter()).for_each(|(m, p)| {
            let v = dist2(p, &c);
            if v < *m {
                *m = v;
            }
        });
    }
}

/// Minimal covering of a set of reals by closed intervals of length `2ε`.
fn interval_cover(sorted: &[f64], eps: f64) -> usize {
    let mut count = 1;
    let mut start = sorted[0];
    for &x in &sorted[1..] {
        if x > start + 2.0 * eps {
            count += 1;
            start = x;
        }
    }
    count
}

/// Covering counts for every radius of `ladder`.
///
/// In one dimension both counts equal the exact minimal covering number of
/// the cloud. Otherwise a single farthest-point pass serves all radii: its
/// first points with insertion radius above `ε` form an ε-net (upper), those
/// above `2ε` are pairwise more than `2ε` apart (lower). A closed ε-ball holds
/// at most one point of such a set, and the two counts differ by at most the
/// ε-packing number of a `2ε`-ball, at most `5^dim`.
pub fn covering_counts(cloud: &PointCloud, ladder: &[f64]) -> Result<Vec<CoveringCount>> {
    check_nonempty(cloud)?;
    if ladder.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument("covering radii must be positive".into()));
    }
    if cloud.dim() == 1 {
        let mut xs: Vec<f64> = cloud.points().iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        return Ok(ladder
            .iter()
            .map(|&eps| {
                let c = interval_cover(&xs, eps);
                CoveringCount { eps, upper: c, lower: c }
            })
            .collect());
    }
    let stop = ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let radii = farthest_point_radii(cloud.points(), stop);
    Ok(ladder
        .iter()
        .map(|&eps| CoveringCount {
            eps,
            upper: radii.iter().filter(|r| **r > eps).count(),
            lower: radii.iter().filter(|r| **r > 2.0 * eps).count(),
        })
        .collect())
}

/// Upper and lower bounds on `M(ε, S)`.
pub fn epsilon_entropy(cloud: &PointCloud, eps: f64) -> Result<CoveringCount> {
    Ok(covering_counts(cloud, &[eps])?[0])
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringReport {
    pub meta: String,
    pub rows: Vec<CoveringCount>,
    /// Slope of `ln M` against `ln(1/ε)` on the upper counts.
    pub dimension: f64,
    pub half_width: f64,
    /// The same slope on the lower counts.
    pub lower_dimension: f64,
}

impl CoveringReport {
    pub fn to_csv(&self) -> String {
        let header = serde_json::json!({
            "meta": self.meta,
            "dimension": self.dimension,
            "half_width": self.half_width,
            "lower_dimension": self.lower_dimension,
        });
        let mut s = format!("# {header}\neps,upper,lower\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{},{}\n", r.eps, r.upper, r.lower));
        }
        s
    }
}

/// Checks that `ladder` has at least five positive radii in a common ratio.
pub fn check_geometric(ladder: &[f64], min_len: usize) -> Result<()> {
    if ladder.len() < min_len {
        return Err(Error::InvalidArgument(format!("ladder needs at least {min_len} values, got {}", ladder.len())));
    }
    if ladder.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidArgument("ladder values must be positive".into()));
    }
    let ratio = ladder[1] / ladder[0];
    if (ratio - 1.0).abs() < 1e-9 {
        return Err(Error::InvalidArgument("ladder values must be distinct".into()));
    }
    for w in ladder.windows(2) {
        if ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument("ladder is not geometric".into()));
        }
    }
    Ok(())
}

/// Log-log regression of the covering counts over a geometric ladder.
pub fn entropy_dimension(cloud: &PointCloud, ladder: &[f64]) -> Result<CoveringReport> {
    check_geometric(ladder, 5)?;
    let rows = covering_counts(cloud, ladder)?;
    let x: Vec<f64> = ladder.iter().map(|e| -e.ln()).collect();
    let up: Vec<f64> = rows.iter().map(|r| (r.upper as f64).ln()).collect();
    let lo: Vec<f64> = rows.iter().map(|r| (r.lower.max(1) as f64).ln()).collect();
    let (dimension, _, se) = linear_fit(&x, &up);
    let (lower_dimension, _, _) = linear_fit(&x, &lo);
    Ok(CoveringReport {
        meta: cloud.meta().to_string(),
        rows,
        dimension,
        half_width: fit_half_width(se, x.len()),
        lower_dimension,
    })
}

/// `c(n, i) = Γ(1/2) Γ((n+1)/2) / (Γ((i+1)/2) Γ((n−i+1)/2))`.
pub fn crofton_constant(n: usize, i: usize) -> Result<f64> {
    if i > n {
        return Err(Error::InvalidArgument(format!("index {i} exceeds dimension {n}")));
    }
    let h = |v: usize| ln_gamma((v as f64 + 1.0) / 2.0);
    Ok((ln_gamma(0.5) + h(n) - h(i) - h(n - i)).exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationOptions {
    /// Total number of (plane, point) pairs.
    pub samples: usize,
    /// Points drawn on each random plane.
    pub per_plane: usize,
    /// Fiber half-width; defaults to three median nearest-neighbour distances.
    pub delta: Option<f64>,
    pub seed: u64,
    pub max_index: usize,
    /// Combine the estimates at `δ` and `2δ` to cancel the part linear in `δ`.
    pub richardson: bool,
}

impl Default for VariationOptions {
    fn default() -> Self {
        Self { samples: 100_000, per_plane: 4, delta: None, seed: 0, max_index: 3, richardson: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationEstimate {
    pub index: usize,
    pub value: f64,
    /// Monte Carlo standard error of `value`.
    pub stderr: f64,
    /// Largest gap between the `(δ, 2δ)` extrapolation and the ones that
    /// also absorb a `δ²` remainder (from `(2δ, 4δ)`) or a `1/δ` sampling
    /// deficit (from `δ, 2δ, 4δ`); zero without extrapolation.
    pub systematic: f64,
    /// Estimate at fiber half-width `δ` before any correction.
    pub raw: f64,
    pub raw_stderr: f64,
    pub samples: usize,
    pub constant: f64,
    pub delta: f64,
    /// Share of non-empty fibers with fewer than [`SPARSE_FIBER_POINTS`] points.
    pub sparse_share: f64,
    /// Set when `sparse_share` exceeds [`SPARSE_FIBER_SHARE`].
    pub sparse: bool,
}

impl VariationEstimate {
    fn zero(index: usize, constant: f64) -> Self {
        Self {
            index,
            value: 0.0,
            stderr: 0.0,
            systematic: 0.0,
            raw: 0.0,
            raw_stderr: 0.0,
            samples: 0,
            constant,
            delta: 0.0,
            sparse_share: 0.0,
            sparse: false,
        }
    }

    /// Statistical and extrapolation errors in quadrature.
    pub fn uncertainty(&self) -> f64 {
        self.stderr.hypot(self.systematic)
    }

    pub fn csv_header() -> &'static str {
        "index,value,stderr,systematic,raw,raw_stderr,samples,constant,delta,sparse_share,sparse"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:.6},{}",
            self.index,
            self.value,
            self.stderr,
            self.systematic,
            self.raw,
            self.raw_stderr,
            self.samples,
            self.constant,
            self.delta,
            self.sparse_share,
            self.sparse
        )
    }
}

/// Box-volume-weighted mean fiber component counts on one plane at
/// half-widths `δ`, `2δ`, `4δ`.
struct PlaneTally {
    counts: [f64; 3],
    fibers: usize,
    sparse: usize,
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `V_i(A) = c(n,i) ∫_{G_i} ∫_Z b₀(A ∩ π_Z⁻¹(x)) dx dγ(Z)` by Monte Carlo.
///
/// Planes are Haar-random; on each, points are uniform in the projected
/// bounding box widened by `4δ`. The fiber over `x` is approximated by the
/// cloud points whose projection lies within `δ` of `x`, and `b₀` by their
/// single-linkage components at radius `2δ`. The thickening inflates the
/// count by a term linear in `δ`, which the extrapolation `2·V(δ) − V(2δ)`
/// removes. A finite sample also leaves holes in the thickening, a deficit
/// of order `spacing²/δ`, and curved or bounded sets add `δ²` terms; the
/// spread of the alternative extrapolations is reported as `systematic`.
pub fn variation_estimate(cloud: &PointCloud, i: usize, opts: &VariationOptions) -> Result<VariationEstimate> {
    check_nonempty(cloud)?;
    let n = cloud.dim();
    if i > n || i > opts.max_index {
        return Err(Error::InvalidArgument(format!("index {i} outside 0..={}", n.min(opts.max_index))));
    }
    if opts.samples < 100 || opts.per_plane == 0 {
        return Err(Error::InvalidArgument("at least 100 samples and one point per plane required".into()));
    }
    let delta = match opts.delta {
        Some(d) if d > 0.0 => d,
        Some(d) => return Err(Error::InvalidArgument(format!("fiber half-width must be positive, got {d}"))),
        None => cloud.median_spacing().map_or(1.0, |s| DEFAULT_DELTA_FACTOR * s),
    };
    let constant = crofton_constant(n, i)?;
    if i == 0 {
        let b0 = count_components(cloud.points(), 2.0 * delta) as f64;
        let sparse = cloud.len() < SPARSE_FIBER_POINTS;
        return Ok(VariationEstimate {
            value: b0,
            raw: b0,
            samples: 1,
            delta,
            sparse_share: if sparse { 1.0 } else { 0.0 },
            sparse,
            ..VariationEstimate::zero(0, constant)
        });
    }

    let planes = opts.samples.div_ceil(opts.per_plane);
    let tallies: Vec<PlaneTally> = (0..planes)
        .into_par_iter()
        .map(|k| plane_tally(cloud, i, delta, opts.per_plane, derive_seed(opts.seed, k as u64)))
        .collect();

    let series = |f: &dyn Fn(&[f64; 3]) -> f64| -> Vec<f64> { tallies.iter().map(|t| constant * f(&t.counts)).collect() };
    let (raw, raw_stderr) = mean_and_stderr(&series(&|c| c[0]));
    let (value, stderr, systematic) = if opts.richardson {
        let (fine, se) = mean_and_stderr(&series(&|c| 2.0 * c[0] - c[1]));
        // the same data under a δ² or a 1/δ remainder
        let (coarse, _) = mean_and_stderr(&series(&|c| 2.0 * c[1] - c[2]));
        let (inverse, _) = mean_and_stderr(&series(&|c| -2.0 * c[0] + 5.0 * c[1] - 2.0 * c[2]));
        (fine, se, (fine - coarse).abs().max((fine - inverse).abs()))
    } else {
        (raw, raw_stderr, 0.0)
    };
    let fibers: usize = tallies.iter().map(|t| t.fibers).sum();
    let sparse_fibers: usize = tallies.iter().map(|t| t.sparse).sum();
    let sparse_share = if fibers == 0 { 0.0 } else { sparse_fibers as f64 / fibers as f64 };
    let sparse = sparse_share > SPARSE_FIBER_SHARE;
    if sparse {
        log::info!(
            "variation V_{i}: {:.0}% of fibers hold fewer than {SPARSE_FIBER_POINTS} points at δ = {delta:e}",
            100.0 * sparse_share
        );
    }
    Ok(VariationEstimate {
        index: i,
        value,
        stderr,
        systematic,
        raw,
        raw_stderr,
        samples: planes * opts.per_plane,
        constant,
        delta,
        sparse_share,
        sparse,
    })
}

fn plane_tally(cloud: &PointCloud, i: usize, delta: f64, per_plane: usize, seed: u64) -> PlaneTally {
    let n = cloud.dim();
    let mut g = rng(seed);
    let frame = haar_frame(&mut g, n, i);
    let cols: Vec<Vec<f64>> = (0..i).map(|c| frame.column(c).iter().copied().collect()).collect();
    let mut proj = vec![0.0; cloud.len() * i];
    for (y, p) in proj.chunks_mut(i).zip(cloud.points()) {
        for (v, col) in y.iter_mut().zip(&cols) {
            *v = col.iter().zip(p).map(|(a, b)| a * b).sum();
        }
    }
    let mut lo = vec![f64::INFINITY; i];
    let mut hi = vec![f64::NEG_INFINITY; i];
    for y in proj.chunks(i) {
        for c in 0..i {
            lo[c] = lo[c].min(y[c]);
            hi[c] = hi[c].max(y[c]);
        }
    }
    let pad = 4.0 * delta;
    let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a + 2.0 * pad).product();
    // bucket the projections by their first coordinate in slabs of width 4δ
    let slabs = (((hi[0] - lo[0]) / pad).floor() as usize + 1).min(cloud.len());
    let slab = |v: f64| (((v - lo[0]) / pad).floor().max(0.0) as usize).min(slabs - 1);
    let mut start = vec![0usize; slabs + 1];
    for y in proj.chunks(i) {
        start[slab(y[0]) + 1] += 1;
    }
    for b in 0..slabs {
        start[b + 1] += start[b];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; cloud.len()];
    for (k, y) in proj.chunks(i).enumerate() {
        let b = slab(y[0]);
        order[fill[b]] = k;
        fill[b] += 1;
    }

    let widths = [delta, 2.0 * delta, 4.0 * delta];
    let sq = widths.map(|w| w * w);
    let mut tally = PlaneTally { counts: [0.0; 3], fibers: 0, sparse: 0 };
    let mut fiber: [Vec<usize>; 3] = Default::default();
    let mut x = vec![0.0; i];
    for _ in 0..per_plane {
        for c in 0..i {
            x[c] = g.gen_range(lo[c] - pad..=hi[c] + pad);
        }
        fiber.iter_mut().for_each(Vec::clear);
        let (b0, b1) = (slab(x[0] - pad), slab(x[0] + pad));
        for &k in &order[start[b0]..start[b1 + 1]] {
            let s = dist2(&proj[k * i..(k + 1) * i], &x);
            for (f, w2) in fiber.iter_mut().zip(&sq) {
                if s <= *w2 {
                    f.push(k);
                }
            }
        }
        for f in fiber.iter_mut() {
            f.sort_unstable();
        }
        if !fiber[0].is_empty() {
            tally.fibers += 1;
            if fiber[0].len() < SPARSE_FIBER_POINTS {
                tally.sparse += 1;
            }
        }
        for ((count, f), w) in tally.counts.iter_mut().zip(&fiber).zip(&widths) {
            if !f.is_empty() {
                *count += count_components_of(cloud.points(), f, 2.0 * w) as f64;
            }
        }
    }
    for c in tally.counts.iter_mut() {
        *c *= volume / per_plane as f64;
    }
    tally
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub lambda: Vec<f64>,
    /// Sampled points flagged almost-critical.
    pub points: usize,
    /// One estimate per requested index; zeros when no point was flagged.
    pub estimates: Vec<VariationEstimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub index: usize,
    /// Slope of `ln V_i` against the log of the ladder's common ratio power.
    pub step_exponent: Option<f64>,
    /// Slope of `ln V_i` against `ln(Λ_1 ⋯ Λ_i)` when that product varies.
    pub product_exponent: Option<f64>,
    /// Log-space residuals of the step fit, per used row.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationScaling {
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<ScalingFit>,
    /// Rows with an empty almost-critical sample.
    pub empty_rows: usize,
}

#[derive(Clone, Debug)]
pub struct ScalingOptions {
    pub budget: usize,
    pub indices: Vec<usize>,
    pub variation: VariationOptions,
    pub seed: u64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self { budget: 1 << 16, indices: vec![0, 1], variation: VariationOptions::default(), seed: 0 }
    }
}

/// Ladder parameter per rung: consecutive thresholds must differ by one
/// common factor on every coordinate that changes.
fn ladder_steps(ladder: &[LambdaThreshold]) -> Result<Vec<f64>> {
    let mut ratio: Option<f64> = None;
    let mut steps = vec![0.0];
    for w in ladder.windows(2) {
        let (a, b) = (w[0].values(), w[1].values());
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        for (x, y) in a.iter().zip(b) {
            let r = y / x;
            if (r - 1.0).abs() < 1e-12 {
                continue;
            }
            match ratio {
                None => ratio = Some(r),
                Some(q) if (r / q - 1.0).abs() <= 1e-6 => {}
                Some(_) => return Err(Error::InvalidArgument("threshold ladder is not geometric".into())),
            }
        }
        steps.push(steps.last().expect("seeded") + ratio.map_or(0.0, f64::ln));
    }
    if ratio.is_none() {
        return Err(Error::InvalidArgument("threshold ladder does not vary".into()));
    }
    Ok(steps)
}

/// Fiber width for the image of a scan. Neighbouring domain samples a
/// spacing `h` apart land up to `σ₁·h` apart, while the image's own nearest
/// neighbours follow the short axis `σ_m·h`; the larger of the two rules keeps
/// the pushed-forward sample connected.
fn scan_delta(report: &CritScanReport, m: usize) -> Result<f64> {
    let kept: Vec<&ScanRecord> = report.records.iter().filter(|r| r.almost_crit).collect();
    let domain = PointCloud::from_points(kept.iter().map(|r| r.x.clone()).collect(), "")?;
    let image = PointCloud::new(m, kept.iter().map(|r| r.fx.clone()).collect(), "")?;
    let stretch = kept.iter().map(|r| r.sigma.first().copied().unwrap_or(0.0)).fold(0.0, f64::max);
    let spacing = |c: &PointCloud| c.median_spacing().unwrap_or(0.0);
    Ok((DEFAULT_DELTA_FACTOR * spacing(&image)).max(stretch * spacing(&domain)))
}

/// Variations of `p(C^Λ(p) ∩ B(r))` across a geometric ladder of thresholds.
pub fn variation_scaling_experiment(
    p: &PolyMap<f64>,
    ladder: &[LambdaThreshold],
    r: f64,
    opts: &ScalingOptions,
) -> Result<VariationScaling> {
    if ladder.len() < 2 {
        return Err(Error::InvalidArgument("threshold ladder needs at least two rungs".into()));
    }
    let steps = ladder_steps(ladder)?;
    let f = p.compile();
    let m = p.ncomps();
    let mut rows = Vec::with_capacity(ladder.len());
    for lambda in ladder {
        if lambda.values().len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: lambda.values().len() });
        }
        let mut cfg = ScanConfig::new(r, opts.budget, m.saturating_sub(1), lambda.clone());
        cfg.seed = opts.seed;
        let report = scan_almost_critical(&f, &cfg)?;
        let images = report.almost_critical_images();
        let points = images.len();
        let mut variation = opts.variation.clone();
        if variation.delta.is_none() && points > 1 {
            variation.delta = Some(scan_delta(&report, m)?).filter(|d| *d > 0.0);
        }
        let estimates = if images.is_empty() {
            opts.indices
                .iter()
                .map(|&i| Ok(VariationEstimate::zero(i, crofton_constant(m, i)?)))
                .collect::<Result<Vec<_>>>()?
        } else {
            let cloud = PointCloud::new(m, images, "almost-critical values")?;
            opts.indices.iter().map(|&i| variation_estimate(&cloud, i, &variation)).collect::<Result<Vec<_>>>()?
        };
        rows.push(ScalingRow { lambda: lambda.values().to_vec(), points, estimates });
    }
    let empty_rows = rows.iter().filter(|r| r.points == 0).count();
    if empty_rows == rows.len() {
        return Err(Error::Empty("almost-critical sets across the whole ladder"));
    }
    let fits = opts
        .indices
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let used: Vec<usize> = (0..rows.len()).filter(|&j| rows[j].estimates[slot].value > 0.0).collect();
            let y: Vec<f64> = used.iter().map(|&j| rows[j].estimates[slot].value.ln()).collect();
            let x: Vec<f64> = used.iter().map(|&j| steps[j]).collect();
            let (step_exponent, residuals) = if used.len() >= 2 && x.iter().any(|v| *v != x[0]) {
                let (s, b, _) = linear_fit(&x, &y);
                (Some(s), x.iter().zip(&y).map(|(a, v)| v - (b + s * a)).collect())
            } else {
                (None, Vec::new())
            };
            let prod: Vec<f64> =
                used.iter().map(|&j| rows[j].lambda[..i.min(m)].iter().map(|v| v.ln()).sum::<f64>()).collect();
            let product_exponent = (used.len() >= 2 && prod.iter().any(|v| (v - prod[0]).abs() > 1e-12))
                .then(|| linear_fit(&prod, &y).0);
            ScalingFit { index: i, step_exponent, product_exponent, residuals }
        })
        .collect();
    Ok(VariationScaling { rows, fits, empty_rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_cover_is_minimal() {
        let xs = [0.0, 0.1, 0.2, 0.35, 0.9];
        assert_eq!(interval_cover(&xs, 0.1), 3);
        assert_eq!(interval_cover(&xs, 0.05), 4);
        assert_eq!(interval_cover(&xs, 1.0), 1);
    }

    #[test]
    fn ladder_steps_follow_the_varying_coordinate() {
        let l: Vec<LambdaThreshold> =
            [0.02, 0.04, 0.08].iter().map(|v| LambdaThreshold::new(vec![5.0, *v]).unwrap()).collect();
        let s = ladder_steps(&l).unwrap();
        assert!((s[2] - 2.0 * 2f64.ln()).abs() < 1e-12);
        let bad = vec![LambdaThreshold::new(vec![1.0, 1.0]).unwrap(), LambdaThreshold::new(vec![2.0, 3.0]).unwrap()];
        assert!(ladder_steps(&bad).is_err());
    }
}
