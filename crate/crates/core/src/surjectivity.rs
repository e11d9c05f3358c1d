//! Quantitative inverse-function checks and surjectivity certificates for
//! Endpoint maps restricted to finite spans of polynomial controls.
//!
//! A certificate holds a regular seed `u₀` with `End(u₀) ≈ 0`, directions
//! `w_i` orthogonal to `ker D_{u₀}End`, their polynomial approximations
//! `q₀, p_i` of bounded degree, and a radius `r` such that
//! `g(s) = End(q₀ + Σ s_i p_i)` covers the ball of radius `rσ/16` around the
//! identity. Dilations then reach every point of the group.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::carnot::CarnotGroup;
use crate::endpoint::{legendre_on, Control, ControlSubspace, EndpointPolyMap};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, min_norm_solve, norm, op_norm, singular_values_rows, solve};
pub use crate::linalg::smallest_singular;
use crate::poly::CompiledMap;
use crate::rational;
use crate::sampling::{gaussian_vec, rng, sobol_ball, uniform_ball, Rng64};

pub const DEFAULT_GRID: usize = 4096;
/// Share of the `σ/4` budget the grid-estimated sups may use.
pub const DEFAULT_DEFLATION: f64 = 0.9;
pub const NEWTON_STEP_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 100;
pub const REACH_TOL: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const MIN_RADIUS: f64 = 1e-12;
const CENTER_TOL: f64 = 1e-13;

/// A map `ℝ^m → ℝ^m` with its differential.
pub trait SquareMap: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

impl SquareMap for CompiledMap {
    fn dim(&self) -> usize {
        self.nvars()
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.nvars(), x.len())?;
        Ok(self.eval(x))
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.nvars(), x.len())?;
        Ok(CompiledMap::jacobian(self, x))
    }
}

/// `s ↦ End(base + Σ s_i dirs_i)` with controls given by coordinates in the
/// subspace of `map`.
#[derive(Clone, Debug)]
pub struct SpanMap {
    map: Arc<EndpointPolyMap>,
    base: DVector<f64>,
    dirs: DMatrix<f64>,
}

impl SpanMap {
    pub fn new(map: Arc<EndpointPolyMap>, base: Vec<f64>, dirs: DMatrix<f64>) -> Result<Self> {
        check_dim(map.nvars(), base.len())?;
        check_dim(map.nvars(), dirs.nrows())?;
        check_dim(map.ncomps(), dirs.ncols())?;
        Ok(Self { map, base: DVector::from_vec(base), dirs })
    }

    fn coords(&self, s: &[f64]) -> Vec<f64> {
        (&self.base + &self.dirs * DVector::from_column_slice(s)).as_slice().to_vec()
    }

    /// `End(λ (base + Σ s_i dirs_i))`.
    pub fn scaled_value(&self, lambda: f64, s: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dirs.ncols(), s.len())?;
        let c: Vec<f64> = self.coords(s).iter().map(|v| lambda * v).collect();
        self.map.eval(&c)
    }

    fn scaled_jacobian(&self, lambda: f64, s: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dirs.ncols(), s.len())?;
        let c: Vec<f64> = self.coords(s).iter().map(|v| lambda * v).collect();
        Ok(self.map.jacobian(&c)? * &self.dirs * lambda)
    }
}

impl SquareMap for SpanMap {
    fn dim(&self) -> usize {
        self.dirs.ncols()
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.scaled_value(1.0, x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.scaled_jacobian(1.0, x)
    }
}

/// Unit `w` with `⟨w, M v⟩ ≥ σ(M₀)/2` for every `M` within `σ(M₀)/2` of `M₀`
/// in operator norm: `w = M₀v / ‖M₀v‖`, since `‖M₀v‖ ≥ σ(M₀)`.
/// Returns `w` and the guaranteed bound `σ(M₀)/2`.
pub fn separating_direction(m0: &DMatrix<f64>, v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let sigma = smallest_singular(m0)?;
    check_dim(m0.ncols(), v.len())?;
    let nv = norm(v);
    if !(nv > 0.0) {
        return Err(Error::InvalidArgument("direction must be non-zero".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("matrix is singular".into()));
    }
    let image = m0 * DVector::from_column_slice(v) / nv;
    let w = &image / image.norm();
    Ok((w.as_slice().to_vec(), sigma / 2.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct BallOptions {
    pub grid: usize,
    pub initial_radius: f64,
    pub shrink: f64,
    pub deflation: f64,
    pub seed: u32,
}

impl Default for BallOptions {
    fn default() -> Self {
        Self { grid: DEFAULT_GRID, initial_radius: 1.0, shrink: 0.5, deflation: DEFAULT_DEFLATION, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallCheck {
    pub sigma: f64,
    pub radius: f64,
    /// Grid sup of `‖D_z f − D_{x₀} f‖` on `B(x₀, r)`, below `σ/4`.
    pub drift: f64,
    /// Grid sup of `‖D_z f − D_z g‖` on `B(x₀, r)`, required below `σ/4`.
    pub perturbation: f64,
    /// `rσ/8`: covered around `g(x₀)`.
    pub covered_ball: f64,
    /// `rσ/16`: covered around the origin once `‖g(x₀)‖ ≤ rσ/16`.
    pub covered_ball_absorbed: f64,
    pub ok: bool,
}

fn grid_points(x0: &[f64], r: f64, count: usize, seed: u32) -> Vec<Vec<f64>> {
    let mut pts = sobol_ball(x0.len(), r, count.saturating_sub(1), seed);
    pts.push(vec![0.0; x0.len()]);
    for p in &mut pts {
        for (a, b) in p.iter_mut().zip(x0) {
            *a += b;
        }
    }
    pts
}

/// Largest grid value of `‖D_z f − base‖` over `B(x₀, r)`.
fn drift_sup<F: SquareMap + ?Sized>(f: &F, base: &DMatrix<f64>, pts: &[Vec<f64>]) -> Result<f64> {
    let vals = pts.par_iter().map(|z| Ok(op_norm(&(f.jacobian(z)? - base)))).collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Shrinks `r` until the grid sup of `‖D_z f − D_{x₀} f‖` on `B(x₀, r)`
/// drops below the deflated `σ/4`, then checks the perturbation condition
/// `sup ‖D_z f − D_z g‖ < σ/4` on the same grid.
pub fn clarke_ball_check<F, G>(f: &F, g: &G, x0: &[f64], sigma: f64, opts: &BallOptions) -> Result<BallCheck>
where
    F: SquareMap + ?Sized,
    G: SquareMap + ?Sized,
{
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("smallest singular value must be positive, got {sigma}")));
    }
    check_dim(f.dim(), x0.len())?;
    check_dim(f.dim(), g.dim())?;
    let base = f.jacobian(x0)?;
    let allowed = opts.deflation * sigma / 4.0;
    let mut r = opts.initial_radius;
    let (pts, drift) = loop {
        if !(r >= MIN_RADIUS) {
            return Err(Error::InvalidArgument(format!("inverse-function radius underflowed below {MIN_RADIUS:e}")));
        }
        let pts = grid_points(x0, r, opts.grid, opts.seed);
        let drift = drift_sup(f, &base, &pts)?;
        if drift < allowed {
            break (pts, drift);
        }
        r *= opts.shrink;
    };
    let gaps = pts
        .par_iter()
        .map(|z| Ok(op_norm(&(f.jacobian(z)? - g.jacobian(z)?))))
        .collect::<Result<Vec<f64>>>()?;
    let perturbation = gaps.into_iter().fold(0.0, f64::max);
    Ok(BallCheck {
        sigma,
        radius: r,
        drift,
        perturbation,
        covered_ball: r * sigma / 8.0,
        covered_ball_absorbed: r * sigma / 16.0,
        ok: perturbation < opts.deflation * sigma / 4.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectivityReport {
    pub pairs: usize,
    /// Smallest `‖g(x) − g(y)‖ / ‖x − y‖` over the sampled pairs.
    pub min_ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Samples pairs in `B(x₀, r)` and compares `‖g(x) − g(y)‖` with `(σ/2)‖x − y‖`.
pub fn injectivity_check<G: SquareMap + ?Sized>(
    g: &G,
    x0: &[f64],
    r: f64,
    sigma: f64,
    pairs: usize,
    seed: u64,
) -> Result<InjectivityReport> {
    check_dim(g.dim(), x0.len())?;
    let mut gen = rng(seed);
    let draw = |gen: &mut Rng64| -> Vec<f64> {
        let p = uniform_ball(gen, x0.len(), r);
        p.iter().zip(x0).map(|(a, b)| a + b).collect()
    };
    let mut min_ratio = f64::INFINITY;
    for _ in 0..pairs {
        let (x, y) = (draw(&mut gen), draw(&mut gen));
        let d = dist(&x, &y);
        if d == 0.0 {
            continue;
        }
        let ratio = dist(&g.value(&x)?, &g.value(&y)?) / d;
        min_ratio = min_ratio.min(ratio);
    }
    let bound = sigma / 2.0;
    Ok(InjectivityReport { pairs, min_ratio, bound, holds: min_ratio >= bound })
}

/// Controls on `ℓ` equal pieces, polynomial of degree `≤ degree` on each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ControlFamily {
    pub pieces: usize,
    pub degree: usize,
}

impl ControlFamily {
    pub fn polynomial(degree: usize) -> Self {
        Self { pieces: 1, degree }
    }

    pub fn piecewise_const(pieces: usize) -> Self {
        Self { pieces, degree: 0 }
    }

    /// The family in its orthogonal (piecewise Legendre) basis.
    pub fn subspace(&self, k: usize) -> Result<ControlSubspace> {
        ControlSubspace::piecewise_legendre(k, self.pieces, self.degree)
    }

    pub fn dim(&self, k: usize) -> usize {
        k * self.pieces * (self.degree + 1)
    }
}

/// Coordinates of `controls` in the orthogonal basis of `space`, one column
/// per control.
fn embed(space: &ControlSubspace, controls: &[Control]) -> Result<DMatrix<f64>> {
    let cols = controls
        .iter()
        .map(|c| Ok(space.orthogonal_coords(c)?.iter().map(rational::to_f64).collect::<Vec<f64>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(space.dim(), controls.len(), |r, c| cols[c][r]))
}

/// Legendre polynomials of degree `≤ d` on `[0, 1]` in each channel,
/// degree-major.
fn legendre_controls(k: usize, d: usize) -> Vec<Control> {
    let (zero, one) = (rational::qi(0), rational::qi(1));
    let mut out = Vec::new();
    for deg in 0..=d {
        let c = legendre_on(&zero, &one, deg);
        for ch in 0..k {
            let mut comps = vec![Vec::new(); k];
            comps[ch] = c.clone();
            out.push(Control::polynomial(comps));
        }
    }
    out
}

/// Ascending monomial coefficients per channel of `Σ_j y_j ℓ_j`, with `y`
/// in the layout of [`legendre_controls`].
fn legendre_to_monomials(k: usize, d: usize, y: &[f64]) -> Vec<Vec<f64>> {
    let (zero, one) = (rational::qi(0), rational::qi(1));
    let mut out = vec![vec![0.0; d + 1]; k];
    for deg in 0..=d {
        let c: Vec<f64> = legendre_on(&zero, &one, deg).iter().map(rational::to_f64).collect();
        for (ch, row) in out.iter_mut().enumerate() {
            for (i, v) in c.iter().enumerate() {
                row[i] += y[deg * k + ch] * v;
            }
        }
    }
    out
}

/// Inverse of the upper Cholesky factor of the Gram matrix: coordinates
/// `R⁻¹ y` have L² norm `‖y‖`.
fn orthonormalizer(space: &ControlSubspace) -> Result<DMatrix<f64>> {
    let chol = space
        .gram_f64()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("Gram matrix is not positive definite in double precision".into()))?;
    let r = chol.l().transpose();
    r.try_inverse().ok_or_else(|| Error::InvalidArgument("Gram factor is singular".into()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedOptions {
    pub family: ControlFamily,
    /// Minimal accepted `σ_m` of `D_{u₀}End` in L²-orthonormal coordinates.
    pub floor: f64,
    pub max_draws: usize,
    /// Drive `End(u₀)` to the identity by minimum-norm Gauss–Newton.
    pub center: bool,
    pub seed: u64,
}

impl SeedOptions {
    pub fn new(family: ControlFamily) -> Self {
        Self { family, floor: 1e-3, max_draws: 50, center: true, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularSeed {
    pub family: ControlFamily,
    /// Coordinates of `u₀` in the family's piecewise Legendre basis.
    pub coords: Vec<f64>,
    /// `σ_m(D_{u₀}End)` on the family, L²-orthonormal coordinates.
    pub sigma: f64,
    pub endpoint: Vec<f64>,
    pub draws: usize,
}

/// `σ_m` of `D End` at `coords`, measured in L²-orthonormal coordinates.
pub fn seed_sigma(map: &EndpointPolyMap, coords: &[f64]) -> Result<f64> {
    let rinv = orthonormalizer(map.subspace())?;
    let m = map.ncomps();
    let s = singular_values_rows(&(map.jacobian(coords)? * rinv));
    Ok(s.get(m - 1).copied().unwrap_or(0.0))
}

/// Numeric rank of `D End` at `coords` (relative tolerance `1e-10`).
pub fn seed_rank(map: &EndpointPolyMap, coords: &[f64]) -> Result<usize> {
    let rinv = orthonormalizer(map.subspace())?;
    let s = singular_values_rows(&(map.jacobian(coords)? * rinv));
    let top = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|v| **v > 1e-10 * top.max(f64::MIN_POSITIVE)).count())
}

/// Minimum-norm Gauss–Newton towards `End = 0`; `None` if it stalls.
fn center_seed(map: &EndpointPolyMap, rinv: &DMatrix<f64>, mut c: DVector<f64>) -> Result<Option<DVector<f64>>> {
    for _ in 0..NEWTON_MAX_ITER {
        let f = DVector::from_vec(map.eval(c.as_slice())?);
        if f.norm() <= CENTER_TOL {
            return Ok(Some(c));
        }
        let j = map.jacobian(c.as_slice())? * rinv;
        let Some(step) = min_norm_solve(&j, &f) else { return Ok(None) };
        c -= rinv * step;
        if !c.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
    }
    let f = map.eval(c.as_slice())?;
    Ok((norm(&f) <= CENTER_TOL).then_some(c))
}

/// Random search for a control with surjective `D_{u₀}End` (and, when
/// centering, `End(u₀) = 0`) in the given family.
pub fn find_regular_seed(g: &CarnotGroup, opts: &SeedOptions) -> Result<RegularSeed> {
    let space = opts.family.subspace(g.rank())?;
    let map = EndpointPolyMap::build(g, &space)?;
    find_regular_seed_on(&map, opts)
}

pub fn find_regular_seed_on(map: &EndpointPolyMap, opts: &SeedOptions) -> Result<RegularSeed> {
    let rinv = orthonormalizer(map.subspace())?;
    let n = map.nvars();
    let mut gen = rng(opts.seed);
    let mut best: f64 = 0.0;
    for draw in 1..=opts.max_draws {
        let c = &rinv * DVector::from_vec(gaussian_vec(&mut gen, n));
        let c = if opts.center {
            match center_seed(map, &rinv, c)? {
                Some(c) => c,
                None => continue,
            }
        } else {
            c
        };
        let sigma = seed_sigma(map, c.as_slice())?;
        best = best.max(sigma);
        if sigma >= opts.floor {
            let endpoint = map.eval(c.as_slice())?;
            return Ok(RegularSeed { family: opts.family, coords: c.as_slice().to_vec(), sigma, endpoint, draws: draw });
        }
    }
    Err(Error::SearchExhausted { draws: opts.max_draws, best })
}

/// Caps on the approximation errors of the proof. `None` uses the measured
/// value for `η₁, η₂`, the remaining budget for `η₃`, and `rσ/16` for `ε₁`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Tolerances {
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub eta3: Option<f64>,
    pub eps1: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateOptions {
    pub seed: SeedOptions,
    pub tolerances: Tolerances,
    /// First degree tried; the group's step when `None`.
    pub start_degree: Option<usize>,
    pub ball: BallOptions,
}

impl CertificateOptions {
    pub fn for_group(g: &CarnotGroup) -> Self {
        Self {
            seed: SeedOptions::new(ControlFamily::polynomial(g.step())),
            tolerances: Tolerances::default(),
            start_degree: None,
            ball: BallOptions::default(),
        }
    }
}

/// Measured quantities of one degree in the search.
#[derive(Clone, Debug, Serialize)]
pub struct DegreeAttempt {
    pub degree: usize,
    /// `‖D_{u₀}End − D_{q₀}End‖_op` on the ambient span.
    pub eta1: f64,
    /// `max_i ‖w_i − p_i‖_{L²}`.
    pub eta2: f64,
    /// `‖D_{q₀}End‖_op` on the ambient span.
    pub dq_norm: f64,
    /// `‖End(q₀)‖`.
    pub offset: f64,
    /// Deflated `σ/4` minus the `η₁, η₂` terms; what is left for `η₃`.
    pub budget_left: f64,
    pub accepted: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateResiduals {
    /// Grid sup of `‖D_s f − D_0 f‖ + ‖D_s g − D_0 g‖` on `W = B(0, r)`.
    pub eta3: f64,
    /// `‖D_0 f − D_0 g‖_op`, bounded by `η₁ Σ‖w_i‖ + ‖D_{q₀}End‖ m η₂`.
    pub base_gap: f64,
    /// Grid sup of `‖D_s f − D_s g‖_op` on `W`; at most `σ/4`.
    pub perturbation: f64,
    pub quarter_sigma: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurjectivityCertificate {
    pub group: String,
    pub dim: usize,
    pub rank: usize,
    pub degree: usize,
    pub seed: RegularSeed,
    /// `q₀` as ascending coefficients per channel.
    pub q0: Vec<Vec<f64>>,
    /// `p_1..p_m`, same layout.
    pub p: Vec<Vec<Vec<f64>>>,
    pub w_norms: Vec<f64>,
    pub sigma: f64,
    pub radius: f64,
    /// `rσ/8` around `g(0) = End(q₀)`.
    pub lemma_ball: f64,
    /// `rσ/16` around the identity; the certified radius.
    pub covered_ball: f64,
    pub offset: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eps1: f64,
    pub residuals: CertificateResiduals,
    pub attempts: Vec<DegreeAttempt>,
    #[serde(skip)]
    span: Option<SpanMap>,
    #[serde(skip)]
    group_def: Option<CarnotGroup>,
}

impl SurjectivityCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `g(s) = End(q₀ + Σ s_i p_i)`.
    pub fn span_map(&self) -> &SpanMap {
        self.span.as_ref().expect("certificates are built with their span map")
    }

    pub fn group_def(&self) -> &CarnotGroup {
        self.group_def.as_ref().expect("certificates are built with their group")
    }
}

/// Searches the degree from the group's step up to `degree_budget` for
/// polynomial controls `q₀, p_i` meeting the tolerance budget, then certifies
/// the covered ball.
pub fn build_certificate(g: &CarnotGroup, degree_budget: usize, opts: &CertificateOptions) -> Result<SurjectivityCertificate> {
    let seed = find_regular_seed(g, &opts.seed)?;
    build_certificate_from(g, seed, degree_budget, opts)
}

pub fn build_certificate_from(
    g: &CarnotGroup,
    seed: RegularSeed,
    degree_budget: usize,
    opts: &CertificateOptions,
) -> Result<SurjectivityCertificate> {
    let (k, m) = (g.rank(), g.dim());
    let family = seed.family;
    let start = opts.start_degree.unwrap_or(g.step());
    if start > degree_budget {
        return Err(Error::InvalidArgument(format!("degree budget {degree_budget} is below the starting degree {start}")));
    }
    let mut attempts = Vec::new();
    for degree in start..=degree_budget {
        let top = degree.max(family.degree);
        let space = ControlSubspace::piecewise_legendre(k, family.pieces, top)?;
        let map = Arc::new(EndpointPolyMap::build(g, &space)?);
        let gram = space.gram_f64();
        let rinv = DMatrix::from_diagonal(&gram.diagonal().map(|v| 1.0 / v.sqrt()));
        let u0 = embed(&space, family.subspace(k)?.basis())? * DVector::from_column_slice(&seed.coords);

        // w_i: right singular vectors of D_{u₀}End in L²-orthonormal coordinates
        let du = map.jacobian(u0.as_slice())?;
        let svd = (&du * &rinv).svd(false, true);
        let vt = svd.v_t.as_ref().expect("requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
        if order.len() < m {
            return Err(Error::InvalidArgument("control space is smaller than the group".into()));
        }
        let w = DMatrix::from_fn(space.dim(), m, |r, c| rinv[(r, r)] * vt[(order[c], r)]);

        // q₀, p_i: L² projections onto polynomials of degree ≤ d, in the
        // orthogonal Legendre basis
        let basis = legendre_controls(k, degree);
        let poly = embed(&space, &basis)?;
        let norms: Vec<f64> = (0..=degree).flat_map(|deg| std::iter::repeat(1.0 / (2 * deg + 1) as f64).take(k)).collect();
        let project = DMatrix::from_diagonal(&DVector::from_vec(norms).map(|v| 1.0 / v)) * poly.transpose() * &gram;
        let q0_poly = &project * &u0;
        let p_poly = &project * &w;
        let q0 = &poly * &q0_poly;
        let p = &poly * &p_poly;

        let l2 = |v: &DVector<f64>| (v.transpose() * &gram * v)[(0, 0)].max(0.0).sqrt();
        let dq = map.jacobian(q0.as_slice())?;
        let eta1 = op_norm(&((&du - &dq) * &rinv));
        let eta2 = (0..m).map(|i| l2(&(w.column(i) - p.column(i)))).fold(0.0, f64::max);
        let dq_norm = op_norm(&(&dq * &rinv));
        let w_norms: Vec<f64> = (0..m).map(|i| l2(&w.column(i).into_owned())).collect();
        let offset = norm(&map.eval(q0.as_slice())?);

        let f = SpanMap::new(map.clone(), u0.as_slice().to_vec(), w.clone())?;
        let gmap = SpanMap::new(map.clone(), q0.as_slice().to_vec(), p.clone())?;
        let zero = vec![0.0; m];
        let df0 = f.jacobian(&zero)?;
        let dg0 = gmap.jacobian(&zero)?;
        let sigma = smallest_singular(&df0)?;
        let budget = opts.ball.deflation * sigma / 4.0;
        let t = &opts.tolerances;
        let (tol1, tol2) = (t.eta1.unwrap_or(eta1), t.eta2.unwrap_or(eta2));
        let spent = tol1 * w_norms.iter().sum::<f64>() + dq_norm * m as f64 * tol2;
        let budget_left = budget - spent;
        let mut attempt =
            DegreeAttempt { degree, eta1, eta2, dq_norm, offset, budget_left, accepted: false, note: String::new() };
        if let Some(e3) = t.eta3 {
            if e3 + spent > sigma / 4.0 {
                return Err(Error::BudgetInfeasible(format!(
                    "η₃ + η₁Σ‖w_i‖ + ‖D_q₀End‖mη₂ = {:e} exceeds σ/4 = {:e}",
                    e3 + spent,
                    sigma / 4.0
                )));
            }
        }
        if eta1 > tol1 || eta2 > tol2 || budget_left <= 0.0 {
            attempt.note = "approximation errors exhaust the σ/4 budget".into();
            attempts.push(attempt);
            continue;
        }
        let eta3_cap = t.eta3.map_or(budget_left, |e| e.min(budget_left));

        // W = B(0, r): shrink until the combined drift fits η₃
        let mut r = opts.ball.initial_radius;
        let eta3 = loop {
            if r < MIN_RADIUS {
                return Err(Error::InvalidArgument(format!("inverse-function radius underflowed below {MIN_RADIUS:e}")));
            }
            let pts = grid_points(&zero, r, opts.ball.grid, opts.ball.seed);
            let drift = pts
                .par_iter()
                .map(|s| Ok(op_norm(&(f.jacobian(s)? - &df0)) + op_norm(&(gmap.jacobian(s)? - &dg0))))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            if drift <= eta3_cap {
                break drift;
            }
            r *= opts.ball.shrink;
        };
        let ball = clarke_ball_check(&f, &gmap, &zero, sigma, &BallOptions { initial_radius: r, ..opts.ball.clone() })?;
        let r = ball.radius;
        let eps1 = t.eps1.unwrap_or(r * sigma / 16.0).min(r * sigma / 16.0);
        if !ball.ok {
            attempt.note = "perturbation condition fails on the grid".into();
            attempts.push(attempt);
            continue;
        }
        if offset >= eps1 {
            attempt.note = format!("‖End(q₀)‖ = {offset:e} is not below ε₁ = {eps1:e}");
            attempts.push(attempt);
            continue;
        }
        attempt.accepted = true;
        attempts.push(attempt);
        let channels = |c: nalgebra::DVectorView<f64>| legendre_to_monomials(k, degree, c.as_slice());
        return Ok(SurjectivityCertificate {
            group: g.name().to_string(),
            dim: m,
            rank: k,
            degree,
            seed,
            q0: channels(q0_poly.column(0)),
            p: (0..m).map(|i| channels(p_poly.column(i))).collect(),
            w_norms,
            sigma,
            radius: r,
            lemma_ball: r * sigma / 8.0,
            covered_ball: r * sigma / 16.0,
            offset,
            eta1: tol1,
            eta2: tol2,
            eta3,
            eps1,
            residuals: CertificateResiduals {
                eta3,
                base_gap: op_norm(&(&df0 - &dg0)),
                perturbation: ball.perturbation,
                quarter_sigma: sigma / 4.0,
            },
            attempts,
            span: Some(gmap),
            group_def: Some(g.clone()),
        });
    }
    let last = attempts.last().map(|a| a.note.clone()).unwrap_or_default();
    Err(Error::BudgetInfeasible(format!(
        "no certificate up to degree {degree_budget} ({last}); raise the degree budget"
    )))
}

/// Damped Newton with Armijo backtracking for `h(s) = 0`; returns the point,
/// the residual and the iteration count.
pub fn damped_newton<H, J>(h: H, jac: J, start: Vec<f64>) -> Result<(Vec<f64>, f64, usize)>
where
    H: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<DMatrix<f64>>,
{
    let mut s = start;
    let mut res = h(&s)?;
    let mut rn = norm(&res);
    for it in 0..NEWTON_MAX_ITER {
        if rn == 0.0 {
            return Ok((s, rn, it));
        }
        let j = jac(&s)?;
        let Some(step) = solve(&j, &-DVector::from_column_slice(&res)) else {
            return Err(Error::NoConvergence { what: "Newton (singular Jacobian)", iterations: it, residual: rn });
        };
        let mut t = 1.0;
        let (next, next_res, next_rn) = loop {
            let cand: Vec<f64> = s.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let r = h(&cand)?;
            let n = norm(&r);
            if n * n <= (1.0 - 2.0 * ARMIJO * t) * rn * rn || t < 1e-10 {
                break (cand, r, n);
            }
            t *= 0.5;
        };
        let moved = t * step.norm();
        let improved = next_rn < rn;
        if improved {
            s = next;
            res = next_res;
            rn = next_rn;
        }
        if moved <= NEWTON_STEP_TOL * norm(&s).max(1.0) || !improved {
            return Ok((s, rn, it + 1));
        }
    }
    Ok((s, rn, NEWTON_MAX_ITER))
}

#[derive(Clone, Debug, Serialize)]
pub struct Reach {
    /// The control is `λ (q₀ + Σ s_i p_i)`.
    pub lambda: f64,
    pub coords: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Reaches `target` with a control in `λ · span{q₀, p_i}`: the target is
/// dilated into half the certified ball, solved there by Newton from the
/// ball's center, and the solution rescaled by `λ`.
pub fn reach_target(cert: &SurjectivityCertificate, target: &[f64]) -> Result<Reach> {
    let g = cert.group_def();
    check_dim(g.dim(), target.len())?;
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("target has a non-finite coordinate".into()));
    }
    let m = g.dim();
    if target.iter().all(|v| *v == 0.0) {
        return Ok(Reach { lambda: 0.0, coords: vec![0.0; m], residual: 0.0, iterations: 0 });
    }
    let span = cert.span_map();
    let half = cert.covered_ball / 2.0;
    let per = half / (m as f64).sqrt();
    let lambda = target
        .iter()
        .zip(g.weights())
        .map(|(v, &w)| (v.abs() / per).powf(1.0 / w as f64))
        .fold(1.0, f64::max);
    let local = g.dilate(1.0 / lambda, target)?;
    let (s, _, it1) = damped_newton(
        |s| Ok(span.value(s)?.iter().zip(&local).map(|(a, b)| a - b).collect()),
        |s| span.jacobian(s),
        vec![0.0; m],
    )?;
    // polish against the undilated target
    let (s, residual, it2) = damped_newton(
        |s| Ok(span.scaled_value(lambda, s)?.iter().zip(target).map(|(a, b)| a - b).collect()),
        |s| span.scaled_jacobian(lambda, s),
        s,
    )?;
    let scale = norm(target).max(1.0);
    if !(residual <= REACH_TOL * scale) {
        return Err(Error::NoConvergence { what: "Newton towards the target", iterations: it1 + it2, residual });
    }
    Ok(Reach { lambda, coords: s, residual, iterations: it1 + it2 })
}

/// Solves a batch of targets concurrently.
pub fn reach_targets(cert: &SurjectivityCertificate, targets: &[Vec<f64>]) -> Vec<Result<Reach>> {
    targets.par_iter().map(|t| reach_target(cert, t)).collect()
}

/// Gaussian coordinates rescaled by a dilation to homogeneous norm 1.
pub fn dilation_normalized_targets(g: &CarnotGroup, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut gen = rng(seed);
    (0..count)
        .map(|_| {
            let x = gaussian_vec(&mut gen, g.dim());
            let h = g.homogeneous_norm(&x);
            if h > 0.0 {
                g.dilate(1.0 / h, &x).expect("positive factor and matching dimension")
            } else {
                x
            }
        })
        .collect()
}

/// Random `m × m` perturbation with operator norm exactly `size`.
pub fn perturbation_of_norm<R: Rng>(gen: &mut R, m: usize, size: f64) -> DMatrix<f64> {
    let e = DMatrix::from_fn(m, m, |_, _| gen.sample::<f64, _>(rand_distr::StandardNormal));
    let n = op_norm(&e);
    e * (size / n)
}
