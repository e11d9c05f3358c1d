//! Kupka-type counterexamples: smooth maps on ℓ², polynomial on every
//! finite-dimensional coordinate subspace, whose critical values fill an
//! interval.
//!
//! Everything is built from a one-variable polynomial `ψ` of degree `d`
//! whose critical values are exactly `{0, 1, …, d − 2}`.

use nalgebra::DMatrix;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::{MultiPoly, PolyMap};
use crate::rational::{self, qi, Q};

const NEWTON_ITERATIONS: usize = 200;
const VALUE_TOL: f64 = 1e-9;

/// `ψ` with its critical points and values.
#[derive(Clone, Debug)]
pub struct KupkaPolynomial {
    d: usize,
    /// Ascending coefficients.
    coeffs: Vec<f64>,
    exact: Option<Vec<Q>>,
    crit_points: Vec<f64>,
    crit_values: Vec<f64>,
}

impl KupkaPolynomial {
    /// `φ(x) = 3x² − 2x³`: `φ(0) = φ'(0) = φ(1) − 1 = φ'(1) = 0`.
    pub fn phi() -> Self {
        let exact = vec![qi(0), qi(0), qi(3), qi(-2)];
        Self {
            d: 3,
            coeffs: exact.iter().map(rational::to_f64).collect(),
            exact: Some(exact),
            crit_points: vec![0.0, 1.0],
            crit_values: vec![0.0, 1.0],
        }
    }

    /// Degree-`d` polynomial with critical values `{0, …, d − 2}`.
    ///
    /// `ψ' = c Π (x − t_i)` with knots `0 = t_1 < … < t_{d−1} = 1`; Newton on
    /// `(c, t_2, …, t_{d−2})` drives the critical values onto the zigzag
    /// `0, d−2, 1, d−3, …`, and `ψ(0) = 0` fixes the constant.
    pub fn psi(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::InvalidArgument(format!("Kupka polynomial needs d ≥ 3, got {d}")));
        }
        if d == 3 {
            return Ok(Self::phi());
        }
        let n = d - 1;
        let targets = zigzag(n);
        // Chebyshev-Lobatto knots on [0, 1]
        let mut knots: Vec<f64> = (0..n)
            .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
            .collect();
        let unit = crit_values_for(1.0, &knots);
        let mut c = (targets[1] - targets[0]) / (unit[1] - unit[0]);

        let residual = |c: f64, knots: &[f64]| -> Vec<f64> {
            crit_values_for(c, knots).iter().zip(&targets).skip(1).map(|(v, t)| v - t).collect()
        };
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pack = |c: f64, knots: &[f64]| -> Vec<f64> {
            std::iter::once(c).chain(knots[1..n - 1].iter().copied()).collect()
        };
        let unpack = |v: &[f64]| -> (f64, Vec<f64>) {
            let mut k = vec![0.0];
            k.extend_from_slice(&v[1..]);
            k.push(1.0);
            (v[0], k)
        };
        let mut r = residual(c, &knots);
        let mut it = 0;
        while norm(&r) > 1e-14 && it < NEWTON_ITERATIONS {
            it += 1;
            let v = pack(c, &knots);
            let dim = v.len();
            let mut jac = DMatrix::zeros(dim, dim);
            for col in 0..dim {
                let h = 1e-7 * v[col].abs().max(1e-3);
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[col] += h;
                vm[col] -= h;
                let (cp, kp) = unpack(&vp);
                let (cm, km) = unpack(&vm);
                let (rp, rm) = (residual(cp, &kp), residual(cm, &km));
                for row in 0..dim {
                    jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let rhs = nalgebra::DVector::from_iterator(dim, r.iter().map(|x| -x));
            let Some(step) = jac.lu().solve(&rhs) else {
                break;
            };
            // halve the step until knots stay ordered and the residual drops
            let mut lam = 1.0;
            let current = norm(&r);
            let mut accepted = false;
            while lam >= 1e-12 {
                let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, b)| a + lam * b).collect();
                let (ct, kt) = unpack(&trial);
                if kt.windows(2).all(|w| w[0] < w[1]) {
                    let rt = residual(ct, &kt);
                    if norm(&rt) < current {
                        c = ct;
                        knots = kt;
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                // stalled at round-off is fine, anywhere else is not
                if current <= VALUE_TOL {
                    break;
                }
                return Err(Error::NoConvergence { what: "Kupka knot Newton", iterations: it, residual: current });
            }
        }
        let res = norm(&r);
        if res > VALUE_TOL {
            return Err(Error::NoConvergence { what: "Kupka knot Newton", iterations: it, residual: res });
        }
        let mut deriv = vec![c];
        for t in &knots {
            deriv = poly_mul(&deriv, &[-t, 1.0]);
        }
        let coeffs = poly_integrate(&deriv);
        let crit_values: Vec<f64> = knots.iter().map(|&t| horner(&coeffs, t)).collect();
        let psi = Self { d, coeffs, exact: None, crit_points: knots, crit_values };
        psi.verify_by_roots()?;
        Ok(psi)
    }

    /// Recomputes the critical points as companion-matrix eigenvalues of `ψ'`
    /// and checks that they are real, simple, and map onto `{0, …, d − 2}`.
    pub fn verify_by_roots(&self) -> Result<()> {
        let roots = real_roots(&poly_derivative(&self.coeffs))?;
        if roots.len() != self.d - 1 || roots.windows(2).any(|w| w[1] - w[0] < 1e-8) {
            return Err(Error::NoConvergence { what: "Kupka root check", iterations: 0, residual: f64::NAN });
        }
        let mut vals: Vec<f64> = roots.iter().map(|&t| horner(&self.coeffs, t)).collect();
        vals.sort_by(f64::total_cmp);
        let worst = vals.iter().enumerate().map(|(i, v)| (v - i as f64).abs()).fold(0.0, f64::max);
        if worst > VALUE_TOL {
            return Err(Error::NoConvergence { what: "Kupka root check", iterations: 0, residual: worst });
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn exact_coeffs(&self) -> Option<&[Q]> {
        self.exact.as_deref()
    }

    pub fn crit_points(&self) -> &[f64] {
        &self.crit_points
    }

    pub fn crit_values(&self) -> &[f64] {
        &self.crit_values
    }

    /// `ζ = max |z|` over critical points.
    pub fn zeta(&self) -> f64 {
        self.crit_points.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        horner(&poly_derivative(&self.coeffs), x)
    }

    /// `sup_{[-1, 1]} |ψ|`, from the endpoints and the critical points inside.
    pub fn sup_on_unit_interval(&self) -> f64 {
        let mut best = self.eval(-1.0).abs().max(self.eval(1.0).abs());
        for &t in &self.crit_points {
            if t.abs() <= 1.0 {
                best = best.max(self.eval(t).abs());
            }
        }
        best
    }
}

/// Critical values of `∫_0^x c Π(y − t_i) dy` at the knots.
fn crit_values_for(c: f64, knots: &[f64]) -> Vec<f64> {
    let mut deriv = vec![c];
    for t in knots {
        deriv = poly_mul(&deriv, &[-t, 1.0]);
    }
    let anti = poly_integrate(&deriv);
    knots.iter().map(|&t| horner(&anti, t)).collect()
}

/// `0, n−1, 1, n−2, 2, …` (length `n`).
fn zigzag(n: usize) -> Vec<f64> {
    let (mut lo, mut hi) = (0usize, n - 1);
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                lo += 1;
                (lo - 1) as f64
            } else {
                hi -= 1;
                (hi + 1) as f64
            }
        })
        .collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_integrate(c: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(c.iter().enumerate().map(|(i, v)| v / (i + 1) as f64)).collect()
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, v)| v * i as f64).collect()
}

/// Real roots (sorted) of a polynomial whose roots are all real.
fn real_roots(c: &[f64]) -> Result<Vec<f64>> {
    let deg = c.len() - 1;
    let lead = c[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    let eig = comp.complex_eigenvalues();
    let mut roots = Vec::with_capacity(deg);
    for z in eig.iter() {
        if z.im.abs() > 1e-7 {
            return Err(Error::NoConvergence { what: "Kupka root check", iterations: 0, residual: z.im.abs() });
        }
        roots.push(z.re);
    }
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// `f(x) = Σ_{k=1}^N (d − 1)^{−k} ψ(q^{k−1} x_k)`.
#[derive(Clone, Debug)]
pub struct KupkaMap {
    psi: KupkaPolynomial,
    q: Q,
    n: usize,
}

impl KupkaMap {
    pub fn new(d: usize, q: Q, n: usize) -> Result<Self> {
        if q <= Q::zero() {
            return Err(Error::InvalidArgument("q must be positive".into()));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("truncation depth must be at least 1".into()));
        }
        let psi = KupkaPolynomial::psi(d)?;
        let map = Self { psi, q, n };
        if !map.in_smoothness_window() {
            log::warn!(
                "q = {} lies outside (1, (d-1)^(1/d)) = (1, {:.6}); the series is not smooth on ℓ²",
                map.q_f64(),
                ((d - 1) as f64).powf(1.0 / d as f64)
            );
        }
        Ok(map)
    }

    pub fn psi(&self) -> &KupkaPolynomial {
        &self.psi
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &Q {
        &self.q
    }

    pub fn q_f64(&self) -> f64 {
        rational::to_f64(&self.q)
    }

    pub fn in_smoothness_window(&self) -> bool {
        let q = self.q_f64();
        let d = self.psi.d as f64;
        q > 1.0 && q < (d - 1.0).powf(1.0 / d)
    }

    fn base(&self) -> usize {
        self.psi.d - 1
    }

    /// Term `k` (1-based) as a one-variable polynomial in `x_k`.
    fn term_f64(&self, k: usize) -> Vec<f64> {
        let scale = self.q_f64().powi(k as i32 - 1);
        let w = (self.base() as f64).powi(-(k as i32));
        self.psi.coeffs.iter().enumerate().map(|(e, c)| w * c * scale.powi(e as i32)).collect()
    }

    /// `f_N` in double precision on `ℝ^N`.
    pub fn poly_map(&self) -> PolyMap<f64> {
        let n = self.n;
        let mut p = MultiPoly::zero(n);
        for k in 1..=n {
            for (e, c) in self.term_f64(k).into_iter().enumerate() {
                let mut exps = vec![0; n];
                exps[k - 1] = e as u32;
                p.add_term(exps, c);
            }
        }
        PolyMap::new(n, vec![p]).expect("consistent arity")
    }

    /// `f_N` with exact rational coefficients (requires an exact `ψ`, i.e. `d = 3`).
    pub fn poly_map_exact(&self) -> Result<PolyMap<Q>> {
        let coeffs = self
            .psi
            .exact
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("exact mode is available for d = 3 only".into()))?;
        let n = self.n;
        let base = qi(self.base() as i64);
        let mut p = MultiPoly::zero(n);
        for k in 1..=n {
            let scale = num_traits::pow(self.q.clone(), k - 1);
            let w = Q::one() / num_traits::pow(base.clone(), k);
            for (e, c) in coeffs.iter().enumerate() {
                let mut exps = vec![0; n];
                exps[k - 1] = e as u32;
                p.add_term(exps, &w * c * num_traits::pow(scale.clone(), e));
            }
        }
        PolyMap::new(n, vec![p])
    }

    /// Critical points of coordinate `k` (1-based): `t / q^{k−1}`.
    pub fn coordinate_crit_points(&self, k: usize) -> Vec<f64> {
        let s = self.q_f64().powi(k as i32 - 1);
        self.psi.crit_points.iter().map(|t| t / s).collect()
    }

    /// The product grid `Crit(f_N)`, last coordinate varying fastest.
    pub fn crit_grid(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (1..=self.n).map(|k| self.coordinate_crit_points(k)).collect();
        product(&axes)
    }

    /// Exact critical grid for `d = 3`, where `ψ'` vanishes at 0 and 1.
    pub fn crit_grid_exact(&self) -> Result<Vec<Vec<Q>>> {
        if self.psi.exact.is_none() {
            return Err(Error::InvalidArgument("exact mode is available for d = 3 only".into()));
        }
        let axes: Vec<Vec<Q>> = (1..=self.n)
            .map(|k| vec![Q::zero(), Q::one() / num_traits::pow(self.q.clone(), k - 1)])
            .collect();
        Ok(product(&axes))
    }

    /// Enumerated value grid `Σ_k c_k (d−1)^{−k}`, `c_k ∈ {0, …, d−2}`,
    /// sorted and without repeats.
    pub fn value_grid_exact(&self) -> Vec<Q> {
        let base = self.base() as i64;
        let digits: Vec<Vec<Q>> = (1..=self.n)
            .map(|k| {
                let w = Q::one() / num_traits::pow(qi(base), k);
                (0..base).map(|c| &w * qi(c)).collect()
            })
            .collect();
        let mut vals: Vec<Q> = product(&digits).into_iter().map(|v| v.into_iter().sum()).collect();
        vals.sort();
        vals.dedup();
        vals
    }

    pub fn value_grid(&self) -> Vec<f64> {
        self.value_grid_exact().iter().map(rational::to_f64).collect()
    }

    /// `f_N` evaluated on its critical grid, sorted and deduplicated exactly.
    pub fn crit_values_exact(&self) -> Result<Vec<Q>> {
        let map = self.poly_map_exact()?;
        let mut vals: Vec<Q> = self
            .crit_grid_exact()?
            .iter()
            .map(|x| map.eval(x).map(|v| v[0].clone()))
            .collect::<Result<_>>()?;
        vals.sort();
        vals.dedup();
        Ok(vals)
    }

    pub fn crit_values(&self) -> Vec<f64> {
        let map = self.poly_map().compile();
        let mut vals: Vec<f64> = self.crit_grid().iter().map(|x| map.eval(x)[0]).collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// `ζ² Σ_{k>N} q^{−2(k−1)}`: squared ℓ² norm bound of the critical
    /// coordinates dropped by the truncation.
    pub fn crit_tail_sq(&self) -> f64 {
        let q = self.q_f64();
        let z = self.psi.zeta();
        if q <= 1.0 {
            return f64::INFINITY;
        }
        z * z * q.powi(-2 * self.n as i32) / (1.0 - q.powi(-2))
    }

    /// `ζ q^{−n} / √(2 ln q)`.
    pub fn crit_width_bound(&self, n: usize) -> f64 {
        let q = self.q_f64();
        self.psi.zeta() * q.powi(-(n as i32)) / (2.0 * q.ln()).sqrt()
    }

    /// `g_d(x, y) = (x, f_N(y))` on `ℝ^{m−1} × ℝ^N`.
    pub fn product_map(&self, m: usize) -> Result<PolyMap<f64>> {
        if m == 0 {
            return Err(Error::InvalidArgument("codomain dimension must be at least 1".into()));
        }
        let nv = m - 1 + self.n;
        let f = self.poly_map();
        let shift: Vec<usize> = (0..self.n).map(|i| m - 1 + i).collect();
        let mut comps: Vec<MultiPoly<f64>> = (0..m - 1).map(|i| MultiPoly::var(nv, i)).collect();
        comps.push(f.comp(0).embed(nv, &shift));
        PolyMap::new(nv, comps)
    }

    /// `h(x¹, …, x^m) = (f_N(x¹), …, f_N(x^m))` on `(ℝ^N)^m`.
    pub fn rank_zero_map(&self, m: usize) -> Result<PolyMap<f64>> {
        if m == 0 {
            return Err(Error::InvalidArgument("codomain dimension must be at least 1".into()));
        }
        let nv = m * self.n;
        let f = self.poly_map();
        let comps = (0..m)
            .map(|b| {
                let shift: Vec<usize> = (0..self.n).map(|i| b * self.n + i).collect();
                f.comp(0).embed(nv, &shift)
            })
            .collect();
        PolyMap::new(nv, comps)
    }
}

/// Cartesian product, last axis varying fastest.
pub(crate) fn product<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut p2 = p.clone();
                    p2.push(v.clone());
                    p2
                })
            })
            .collect();
    }
    out
}
