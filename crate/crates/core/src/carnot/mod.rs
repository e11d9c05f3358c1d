//! Carnot groups in exponential coordinates of the first kind.
//!
//! A group is given by a stratified nilpotent Lie algebra in an adapted basis
//! `v_1, …, v_m` (weights non-decreasing). From the structure constants we
//! derive the left-invariant horizontal fields
//! `X_j = ∂_j + Σ_{h>k} Q_{jh}(x) ∂_h`, the dilations and the group law.

mod free;
mod spec;

pub use free::witt_dimension;
pub use spec::GroupSpec;

use num_traits::{One, Zero};

use crate::error::{check_dim, Error, Result};
use crate::poly::MultiPoly;
use crate::rational::{self, bernoulli_plus, factorial, Q};

pub const DEFAULT_DIM_CAP: usize = 30;

/// Lie element whose coordinates are polynomials (in point coordinates, or in
/// time for group-law computations).
type PolyElem = Vec<MultiPoly<Q>>;

#[derive(Clone, Debug)]
pub struct CarnotGroup {
    name: String,
    weights: Vec<u32>,
    strata_dims: Vec<usize>,
    /// Non-zero `c_{ij}^h` for all ordered pairs `i ≠ j`.
    brackets: Vec<(usize, usize, usize, Q)>,
    /// `fields[j][h]` is `Q_{jh}` for `j < k`; zero for `h < k`.
    fields: Vec<Vec<MultiPoly<Q>>>,
}

impl CarnotGroup {
    /// Builds a group from strata dimensions and brackets `[v_i, v_j] = c v_h`
    /// given for some ordered pairs (0-based). Omitted brackets are zero;
    /// antisymmetric partners are filled in.
    pub fn from_structure(name: &str, strata_dims: Vec<usize>, entries: Vec<(usize, usize, usize, Q)>) -> Result<Self> {
        if strata_dims.is_empty() || strata_dims.iter().any(|&d| d == 0) {
            return Err(Error::NotStratified("every stratum must be non-empty".into()));
        }
        let m: usize = strata_dims.iter().sum();
        let weights: Vec<u32> = strata_dims
            .iter()
            .enumerate()
            .flat_map(|(i, &d)| std::iter::repeat(i as u32 + 1).take(d))
            .collect();
        let mut table = vec![vec![vec![Q::zero(); m]; m]; m];
        let mut seen = vec![vec![vec![false; m]; m]; m];
        for (i, j, h, c) in entries {
            if i >= m || j >= m || h >= m {
                return Err(Error::InvalidArgument(format!(
                    "bracket index out of range in ({}, {}, {}) for dimension {m}",
                    i + 1,
                    j + 1,
                    h + 1
                )));
            }
            if i == j {
                if c.is_zero() {
                    continue;
                }
                return Err(Error::InvalidArgument(format!("[v{0}, v{0}] must vanish", i + 1)));
            }
            let neg = -c.clone();
            for (a, b, v) in [(i, j, c), (j, i, neg)] {
                if seen[a][b][h] && table[a][b][h] != v {
                    return Err(Error::InvalidArgument(format!(
                        "conflicting values for [v{}, v{}] on v{}",
                        a + 1,
                        b + 1,
                        h + 1
                    )));
                }
                seen[a][b][h] = true;
                table[a][b][h] = v;
            }
        }
        let mut brackets = Vec::new();
        for (i, row) in table.iter().enumerate() {
            for (j, col) in row.iter().enumerate() {
                for (h, c) in col.iter().enumerate() {
                    if !c.is_zero() {
                        if weights[h] != weights[i] + weights[j] {
                            return Err(Error::GradingViolation { i: i + 1, j: j + 1, h: h + 1 });
                        }
                        brackets.push((i, j, h, c.clone()));
                    }
                }
            }
        }
        let mut g = Self { name: name.to_string(), weights, strata_dims, brackets, fields: Vec::new() };
        g.check_jacobi()?;
        g.check_generated()?;
        g.fields = g.derive_fields();
        Ok(g)
    }

    /// Free nilpotent algebra of rank `k` and step `s` in the Lyndon basis.
    pub fn free_nilpotent(k: usize, s: usize, cap: usize) -> Result<Self> {
        if k < 2 || s < 1 {
            return Err(Error::InvalidArgument(format!("free nilpotent group needs k ≥ 2 and s ≥ 1, got k={k}, s={s}")));
        }
        let strata: Vec<usize> = (1..=s).map(|n| witt_dimension(k, n)).collect();
        let m: usize = strata.iter().sum();
        if m > cap {
            return Err(Error::DimensionCap { dim: m, cap });
        }
        let (_, entries) = free::free_structure(k, s);
        Self::from_structure(&format!("free({k},{s})"), strata, entries)
    }

    pub fn heisenberg() -> Self {
        Self::from_structure("heisenberg", vec![2, 1], vec![(0, 1, 2, Q::one())]).expect("valid structure")
    }

    /// Engel group: `[v1, v2] = v3`, `[v1, v3] = v4`.
    pub fn engel() -> Self {
        Self::from_structure("engel", vec![2, 1, 1], vec![(0, 1, 2, Q::one()), (0, 2, 3, Q::one())])
            .expect("valid structure")
    }

    /// Resolves `heisenberg`, `engel` or `free(k,s)`.
    pub fn builtin(name: &str) -> Result<Self> {
        let n = name.trim().to_ascii_lowercase();
        match n.as_str() {
            "heisenberg" => return Ok(Self::heisenberg()),
            "engel" => return Ok(Self::engel()),
            _ => {}
        }
        let args = n
            .strip_prefix("free(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown group {name:?}")))?;
        let parts: Vec<usize> = args
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad free group arguments in {name:?}")))?;
        match parts.as_slice() {
            [k, s] => Self::free_nilpotent(*k, *s, DEFAULT_DIM_CAP),
            _ => Err(Error::InvalidArgument(format!("free group takes (k,s), got {name:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Topological dimension.
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn rank(&self) -> usize {
        self.strata_dims[0]
    }

    pub fn step(&self) -> usize {
        self.strata_dims.len()
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn strata_dims(&self) -> &[usize] {
        &self.strata_dims
    }

    /// Non-zero structure constants `(i, j, h, c)` (0-based, both orders).
    pub fn structure(&self) -> &[(usize, usize, usize, Q)] {
        &self.brackets
    }

    /// `Q_{jh}` for `j < k`, `h < m` (zero when `h < k`).
    pub fn q_field(&self, j: usize, h: usize) -> &MultiPoly<Q> {
        &self.fields[j][h]
    }

    /// Coefficients of the horizontal field `X_j` beyond `∂_j`.
    pub fn field_row(&self, j: usize) -> &[MultiPoly<Q>] {
        &self.fields[j]
    }

    pub fn bracket(&self, a: &[Q], b: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.dim()];
        for (i, j, h, c) in &self.brackets {
            if a[*i].is_zero() || b[*j].is_zero() {
                continue;
            }
            out[*h] += &a[*i] * &b[*j] * c;
        }
        out
    }

    fn bracket_poly(&self, a: &PolyElem, b: &PolyElem) -> PolyElem {
        let nv = a[0].nvars();
        let mut out = vec![MultiPoly::zero(nv); self.dim()];
        for (i, j, h, c) in &self.brackets {
            if a[*i].is_zero() || b[*j].is_zero() {
                continue;
            }
            let t = (&a[*i] * &b[*j]).scale(c);
            out[*h] = &out[*h] + &t;
        }
        out
    }

    fn check_jacobi(&self) -> Result<()> {
        let m = self.dim();
        let e = |i: usize| {
            let mut v = vec![Q::zero(); m];
            v[i] = Q::one();
            v
        };
        for a in 0..m {
            for b in a + 1..m {
                let ab = self.bracket(&e(a), &e(b));
                for c in b + 1..m {
                    let bc = self.bracket(&e(b), &e(c));
                    let ca = self.bracket(&e(c), &e(a));
                    let r1 = self.bracket(&ab, &e(c));
                    let r2 = self.bracket(&bc, &e(a));
                    let r3 = self.bracket(&ca, &e(b));
                    if (0..m).any(|h| !(&r1[h] + &r2[h] + &r3[h]).is_zero()) {
                        return Err(Error::JacobiViolation(a + 1, b + 1, c + 1));
                    }
                }
            }
        }
        Ok(())
    }

    /// Each stratum `i + 1` must equal `[𝔤_1, 𝔤_i]`.
    fn check_generated(&self) -> Result<()> {
        let k = self.rank();
        let mut start = 0;
        for (level, &d) in self.strata_dims.iter().enumerate().take(self.step() - 1) {
            let next_start = start + d;
            let next_dim = self.strata_dims[level + 1];
            let mut rows = Vec::new();
            for a in 0..k {
                for b in start..next_start {
                    let row: Vec<Q> = (0..next_dim)
                        .map(|h| {
                            self.brackets
                                .iter()
                                .find(|(i, j, hh, _)| *i == a && *j == b && *hh == next_start + h)
                                .map_or_else(Q::zero, |e| e.3.clone())
                        })
                        .collect();
                    rows.push(row);
                }
            }
            let r = rational::rank(&rows);
            if r < next_dim {
                return Err(Error::NotStratified(format!(
                    "brackets of the first stratum with stratum {} span only {r} of {next_dim} dimensions",
                    level + 1
                )));
            }
            start = next_start;
        }
        Ok(())
    }

    /// `Q_j(x) = ψ(ad_X)(v_j)` with `ψ(z) = z / (1 − e^{−z})`, truncated at
    /// the step.
    fn derive_fields(&self) -> Vec<Vec<MultiPoly<Q>>> {
        let m = self.dim();
        let x: PolyElem = (0..m).map(|i| MultiPoly::var(m, i)).collect();
        let coefs = psi_coefficients(self.step());
        (0..self.rank())
            .map(|j| {
                let mut term: PolyElem = (0..m)
                    .map(|h| if h == j { MultiPoly::constant(m, Q::one()) } else { MultiPoly::zero(m) })
                    .collect();
                let mut acc: PolyElem = vec![MultiPoly::zero(m); m];
                for c in coefs.iter().skip(1) {
                    term = self.bracket_poly(&x, &term);
                    for h in 0..m {
                        acc[h] = &acc[h] + &term[h].scale(c);
                    }
                }
                for q in acc.iter_mut().take(self.rank()) {
                    debug_assert!(q.is_zero());
                    *q = MultiPoly::zero(m);
                }
                acc
            })
            .collect()
    }

    /// Coordinate `i` scaled by `λ^{w_i}`.
    pub fn dilate(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {lambda}")));
        }
        check_dim(self.dim(), x.len())?;
        Ok(x.iter().zip(&self.weights).map(|(v, &w)| v * lambda.powi(w as i32)).collect())
    }

    pub fn dilate_exact(&self, lambda: &Q, x: &[Q]) -> Result<Vec<Q>> {
        if *lambda <= Q::zero() {
            return Err(Error::InvalidArgument("dilation factor must be positive".into()));
        }
        check_dim(self.dim(), x.len())?;
        Ok(x.iter()
            .zip(&self.weights)
            .map(|(v, &w)| v * num_traits::pow(lambda.clone(), w as usize))
            .collect())
    }

    /// Exact group law `x · y` in exponential coordinates.
    ///
    /// `Z(t) = log(exp(x) exp(t y))` solves `Z' = ψ(ad_Z)(y)`, `Z(0) = x`;
    /// Picard iteration in `Q[t]` fixes one more weight layer per sweep.
    pub fn product_exact(&self, x: &[Q], y: &[Q]) -> Result<Vec<Q>> {
        let m = self.dim();
        check_dim(m, x.len())?;
        check_dim(m, y.len())?;
        let yc: PolyElem = y.iter().map(|v| MultiPoly::constant(1, v.clone())).collect();
        let xc: PolyElem = x.iter().map(|v| MultiPoly::constant(1, v.clone())).collect();
        let coefs = psi_coefficients(self.step());
        let mut z = xc.clone();
        for _ in 0..self.step() {
            let mut term = yc.clone();
            let mut rhs = yc.clone();
            for c in coefs.iter().skip(1) {
                term = self.bracket_poly(&z, &term);
                for h in 0..m {
                    rhs[h] = &rhs[h] + &term[h].scale(c);
                }
            }
            z = (0..m).map(|h| &xc[h] + &rhs[h].integrate(0)).collect();
        }
        z.iter().map(|p| p.eval(&[Q::one()])).collect()
    }

    pub fn product(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let xq = x.iter().map(|&v| rational::from_f64(v)).collect::<Result<Vec<_>>>()?;
        let yq = y.iter().map(|&v| rational::from_f64(v)).collect::<Result<Vec<_>>>()?;
        Ok(self.product_exact(&xq, &yq)?.iter().map(rational::to_f64).collect())
    }

    /// Inverse in exponential coordinates of the first kind.
    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }

    /// Homogeneous quasi-norm `Σ |x_i|^{1/w_i}`.
    pub fn homogeneous_norm(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(v, &w)| v.abs().powf(1.0 / w as f64)).sum()
    }
}

/// Taylor coefficients `B_n^+ / n!` of `ψ(z) = z / (1 − e^{−z})` for
/// `n < len`.
fn psi_coefficients(len: usize) -> Vec<Q> {
    bernoulli_plus(len.saturating_sub(1))
        .into_iter()
        .take(len)
        .enumerate()
        .map(|(n, b)| b / Q::from_integer(factorial(n)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn psi_series() {
        assert_eq!(psi_coefficients(5), vec![qi(1), q(1, 2), q(1, 12), qi(0), q(-1, 720)]);
    }

    #[test]
    fn heisenberg_fields() {
        let g = CarnotGroup::heisenberg();
        let x2 = MultiPoly::<Q>::var(3, 1);
        let x1 = MultiPoly::<Q>::var(3, 0);
        assert_eq!(*g.q_field(0, 2), x2.scale(&q(-1, 2)));
        assert_eq!(*g.q_field(1, 2), x1.scale(&q(1, 2)));
    }

    #[test]
    fn rejects_bad_structures() {
        // grading: [v1, v2] landing in the first stratum
        assert!(matches!(
            CarnotGroup::from_structure("x", vec![3], vec![(0, 1, 2, qi(1))]),
            Err(Error::GradingViolation { .. })
        ));
        // second stratum not generated
        assert!(matches!(
            CarnotGroup::from_structure("x", vec![2, 1], vec![]),
            Err(Error::NotStratified(_))
        ));
    }

    #[test]
    fn builtin_names() {
        assert_eq!(CarnotGroup::builtin("free(2,3)").unwrap().dim(), 5);
        assert_eq!(CarnotGroup::builtin("Engel").unwrap().weights(), &[1, 1, 2, 3]);
        assert!(CarnotGroup::builtin("free(2)").is_err());
        assert!(CarnotGroup::builtin("sl2").is_err());
    }
}
