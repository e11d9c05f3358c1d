//! Sparse multivariate polynomials over exact rationals or doubles.
//!
//! A [`MultiPoly`] maps exponent vectors to non-zero coefficients. The same
//! container carries Carnot vector fields, endpoint maps, Kupka maps and
//! series truncations; [`PolyMap`] bundles several components over a shared
//! variable count.

mod bounds;
mod compiled;
pub mod literal;

pub use bounds::{
    alpha_constant, markov_check, rescale_bound_check, BoundReport, SupGrid, DEFAULT_SLACK,
};
pub use compiled::{CompiledMap, CompiledPoly};

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{check_dim, Result};
use crate::rational::{self, Q};

/// Coefficient domain of a polynomial.
pub trait Coeff:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coeff for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coeff for Q {
    fn from_ratio(num: i64, den: i64) -> Self {
        rational::q(num, den)
    }
    fn to_f64(&self) -> f64 {
        rational::to_f64(self)
    }
}

pub type Exponent = Vec<u32>;

#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly<C = Q> {
    nvars: usize,
    terms: BTreeMap<Exponent, C>,
}

impl<C: Coeff> MultiPoly<C> {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        Self::monomial(nvars, vec![0; nvars], c)
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(nvars, e, C::one())
    }

    pub fn monomial(nvars: usize, exps: Exponent, c: C) -> Self {
        assert_eq!(exps.len(), nvars, "exponent length must equal nvars");
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Exponent, C)>>(nvars: usize, terms: I) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            check_dim(nvars, e.len())?;
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exps: &[u32]) -> C {
        self.terms.get(exps).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, exps: Exponent, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&exps) {
            Some(v) => {
                let s = v.clone() + c;
                if s.is_zero() {
                    self.terms.remove(&exps);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(exps, c);
            }
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Degree in a single variable; `None` for the zero polynomial.
    pub fn degree_in(&self, var: usize) -> Option<u32> {
        self.terms.keys().map(|e| e[var]).max()
    }

    /// `max Σ w_i α_i` over stored terms; `None` stands for the −∞ of the
    /// zero polynomial.
    pub fn weighted_degree(&self, weights: &[u32]) -> Result<Option<u32>> {
        check_dim(self.nvars, weights.len())?;
        Ok(self
            .terms
            .keys()
            .map(|e| e.iter().zip(weights).map(|(a, w)| a * w).sum())
            .max())
    }

    /// True when every term has weighted degree exactly `w`.
    pub fn is_weighted_homogeneous(&self, weights: &[u32], w: u32) -> bool {
        self.terms
            .keys()
            .all(|e| e.iter().zip(weights).map(|(a, w)| a * w).sum::<u32>() == w)
    }

    /// Indices of variables that occur with positive exponent.
    pub fn support_vars(&self) -> Vec<usize> {
        (0..self.nvars)
            .filter(|&i| self.terms.keys().any(|e| e[i] > 0))
            .collect()
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        let terms = self
            .terms
            .iter()
            .map(|(e, v)| (e.clone(), v.clone() * c.clone()))
            .filter(|(_, v)| !v.is_zero())
            .collect();
        Self { nvars: self.nvars, terms }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(self.nvars, C::one());
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval(&self, x: &[C]) -> Result<C> {
        check_dim(self.nvars, x.len())?;
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &a) in x.iter().zip(e) {
                for _ in 0..a {
                    t = t * xi.clone();
                }
            }
            acc = acc + t;
        }
        Ok(acc)
    }

    /// Double-precision evaluation with Neumaier-compensated summation.
    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.nvars, x.len())?;
        let mut sum = NeumaierSum::default();
        for (e, c) in &self.terms {
            let mut t = c.to_f64();
            for (xi, &a) in x.iter().zip(e) {
                t *= xi.powi(a as i32);
            }
            sum.add(t);
        }
        Ok(sum.value())
    }

    pub fn partial(&self, var: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            p.add_term(e2, c.clone() * C::from_ratio(e[var] as i64, 1));
        }
        p
    }

    /// Antiderivative in `var` with zero integration constant.
    pub fn integrate(&self, var: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[var] += 1;
            let k = e2[var] as i64;
            p.add_term(e2, c.clone() * C::from_ratio(1, k));
        }
        p
    }

    /// Fixes variable `var` to `value`; the variable stays in the signature.
    pub fn substitute(&self, var: usize, value: &C) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for _ in 0..e[var] {
                t = t * value.clone();
            }
            let mut e2 = e.clone();
            e2[var] = 0;
            p.add_term(e2, t);
        }
        p
    }

    /// Removes a variable that does not occur.
    pub fn drop_var(&self, var: usize) -> Self {
        debug_assert!(self.degree_in(var).unwrap_or(0) == 0);
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2.remove(var);
                (e2, c.clone())
            })
            .collect();
        Self { nvars: self.nvars - 1, terms }
    }

    /// Re-indexes into `new_nvars` variables, sending variable `i` to `map[i]`.
    pub fn embed(&self, new_nvars: usize, map: &[usize]) -> Self {
        assert_eq!(map.len(), self.nvars);
        let mut p = Self::zero(new_nvars);
        for (e, c) in &self.terms {
            let mut e2 = vec![0; new_nvars];
            for (i, &a) in e.iter().enumerate() {
                e2[map[i]] += a;
            }
            p.add_term(e2, c.clone());
        }
        p
    }

    /// Substitutes polynomial `subs[i]` for variable `i`.
    pub fn compose(&self, subs: &[MultiPoly<C>]) -> Result<Self> {
        check_dim(self.nvars, subs.len())?;
        let out_vars = subs.first().map_or(0, |s| s.nvars);
        for s in subs {
            check_dim(out_vars, s.nvars)?;
        }
        let mut powers: Vec<Vec<MultiPoly<C>>> = vec![Vec::new(); self.nvars];
        for i in 0..self.nvars {
            let maxe = self.degree_in(i).unwrap_or(0);
            let mut pw = vec![MultiPoly::constant(out_vars, C::one())];
            for k in 1..=maxe as usize {
                let next = &pw[k - 1] * &subs[i];
                pw.push(next);
            }
            powers[i] = pw;
        }
        let mut acc = MultiPoly::zero(out_vars);
        for (e, c) in &self.terms {
            let mut t = MultiPoly::constant(out_vars, c.clone());
            for (i, &a) in e.iter().enumerate() {
                if a > 0 {
                    t = &t * &powers[i][a as usize];
                }
            }
            acc = &acc + &t;
        }
        Ok(acc)
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> MultiPoly<D> {
        let mut p = MultiPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), f(c));
        }
        p
    }

    pub fn to_f64(&self) -> MultiPoly<f64> {
        self.map_coeffs(|c| c.to_f64())
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly::new(&self.to_f64())
    }
}

impl MultiPoly<Q> {
    pub fn is_zero_exact(&self) -> bool {
        self.terms.is_empty()
    }
}

impl<'a, C: Coeff> Add<&'a MultiPoly<C>> for &'a MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn add(self, rhs: &MultiPoly<C>) -> MultiPoly<C> {
        assert_eq!(self.nvars, rhs.nvars);
        let mut p = self.clone();
        for (e, c) in &rhs.terms {
            p.add_term(e.clone(), c.clone());
        }
        p
    }
}

impl<'a, C: Coeff> Sub<&'a MultiPoly<C>> for &'a MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn sub(self, rhs: &MultiPoly<C>) -> MultiPoly<C> {
        assert_eq!(self.nvars, rhs.nvars);
        let mut p = self.clone();
        for (e, c) in &rhs.terms {
            p.add_term(e.clone(), -c.clone());
        }
        p
    }
}

impl<'a, C: Coeff> Mul<&'a MultiPoly<C>> for &'a MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn mul(self, rhs: &MultiPoly<C>) -> MultiPoly<C> {
        assert_eq!(self.nvars, rhs.nvars);
        let mut p = MultiPoly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Exponent = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, c1.clone() * c2.clone());
            }
        }
        p
    }
}

impl<C: Coeff> Neg for &MultiPoly<C> {
    type Output = MultiPoly<C>;
    fn neg(self) -> MultiPoly<C> {
        self.map_coeffs(|c| -c.clone())
    }
}

/// A tuple of polynomials sharing one variable count.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap<C = Q> {
    nvars: usize,
    comps: Vec<MultiPoly<C>>,
}

impl<C: Coeff> PolyMap<C> {
    pub fn new(nvars: usize, comps: Vec<MultiPoly<C>>) -> Result<Self> {
        for c in &comps {
            check_dim(nvars, c.nvars)?;
        }
        Ok(Self { nvars, comps })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn ncomps(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[MultiPoly<C>] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &MultiPoly<C> {
        &self.comps[i]
    }

    pub fn degree(&self) -> Option<u32> {
        self.comps.iter().filter_map(MultiPoly::degree).max()
    }

    pub fn eval(&self, x: &[C]) -> Result<Vec<C>> {
        self.comps.iter().map(|p| p.eval(x)).collect()
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.comps.iter().map(|p| p.eval_f64(x)).collect()
    }

    /// Entry `(i, j)` is `∂p_i/∂x_j`.
    pub fn jacobian(&self) -> Vec<Vec<MultiPoly<C>>> {
        self.comps
            .iter()
            .map(|p| (0..self.nvars).map(|j| p.partial(j)).collect())
            .collect()
    }

    pub fn to_f64(&self) -> PolyMap<f64> {
        PolyMap { nvars: self.nvars, comps: self.comps.iter().map(MultiPoly::to_f64).collect() }
    }

    pub fn compile(&self) -> CompiledMap {
        CompiledMap::new(&self.to_f64())
    }

    pub fn compose(&self, subs: &[MultiPoly<C>]) -> Result<Self> {
        let nv = subs.first().map_or(0, |s| s.nvars);
        let comps = self.comps.iter().map(|p| p.compose(subs)).collect::<Result<Vec<_>>>()?;
        Self::new(nv, comps)
    }
}

#[derive(Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
