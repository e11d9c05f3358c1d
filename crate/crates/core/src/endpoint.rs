//! Endpoint maps `End(u) = γ_u(1)` of Carnot groups.
//!
//! In exponential coordinates the horizontal system is triangular:
//! `γ̇_i = u_i` for `i ≤ k` and `γ̇_h = Σ_j u_j Q_{jh}(γ)` with `Q_{jh}`
//! depending only on lower-weight coordinates. Integrating it component by
//! component on a polynomial control subspace gives the endpoint map as an
//! exact polynomial in the subspace coordinates.

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::carnot::CarnotGroup;
use crate::error::{check_dim, Error, Result};
use crate::poly::{CompiledMap, CompiledPoly, MultiPoly, PolyMap};
use crate::rational::{self, q, qi, Q};

pub const DEFAULT_RK4_STEPS: usize = 1000;

/// A control on `[0, 1]`, polynomial in `t` on each of `ℓ` equal pieces.
/// `pieces[p][j]` holds the ascending coefficients of `u_j` on piece `p` as
/// a polynomial in the global time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Control {
    pieces: Vec<Vec<Vec<Q>>>,
}

impl Control {
    pub fn polynomial(comps: Vec<Vec<Q>>) -> Self {
        Self { pieces: vec![comps] }
    }

    pub fn piecewise(pieces: Vec<Vec<Vec<Q>>>) -> Result<Self> {
        let k = pieces.first().map(Vec::len).ok_or(Error::Empty("control pieces"))?;
        for p in &pieces {
            check_dim(k, p.len())?;
        }
        Ok(Self { pieces })
    }

    pub fn rank(&self) -> usize {
        self.pieces[0].len()
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn pieces(&self) -> &[Vec<Vec<Q>>] {
        &self.pieces
    }

    /// Restates the control on `ℓ` pieces, where `ℓ` is a multiple of the
    /// current piece count.
    fn refine(&self, l: usize) -> Vec<Vec<Vec<Q>>> {
        let r = l / self.pieces.len();
        self.pieces.iter().flat_map(|p| std::iter::repeat(p.clone()).take(r)).collect()
    }

    pub fn to_numeric(&self) -> NumericControl {
        NumericControl {
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|c| c.iter().map(rational::to_f64).collect()).collect())
                .collect(),
        }
    }

    /// `∫_0^1 ⟨u, v⟩ dt`, exact.
    pub fn inner(&self, other: &Control) -> Result<Q> {
        check_dim(self.rank(), other.rank())?;
        let l = lcm(self.num_pieces(), other.num_pieces());
        let (a, b) = (self.refine(l), other.refine(l));
        let mut acc = Q::zero();
        for p in 0..l {
            let (lo, hi) = (q(p as i64, l as i64), q(p as i64 + 1, l as i64));
            for j in 0..self.rank() {
                for (e1, c1) in a[p][j].iter().enumerate() {
                    for (e2, c2) in b[p][j].iter().enumerate() {
                        if c1.is_zero() || c2.is_zero() {
                            continue;
                        }
                        let e = (e1 + e2 + 1) as usize;
                        let span = num_traits::pow(hi.clone(), e) - num_traits::pow(lo.clone(), e);
                        acc += c1 * c2 * span / qi(e as i64);
                    }
                }
            }
        }
        Ok(acc)
    }
}

/// Ascending coefficients in `t` of the Legendre polynomial of degree `n`
/// transported to `[a, b]`.
pub fn legendre_on(a: &Q, b: &Q, n: usize) -> Vec<Q> {
    // P̃_n(x) = Σ_j (−1)^{n+j} C(n,j) C(n+j,j) x^j with x = (t − a)/(b − a)
    let h = b - a;
    let mut out = vec![Q::zero(); n + 1];
    for j in 0..=n {
        let sign = if (n + j) % 2 == 0 { 1 } else { -1 };
        let c = Q::from_integer((binom(n, j) * binom(n + j, j) * sign).into()) / num_traits::pow(h.clone(), j);
        // (t − a)^j = Σ_i C(j,i) t^i (−a)^{j−i}
        for i in 0..=j {
            let term = Q::from_integer(binom(j, i).into()) * num_traits::pow(-a.clone(), j - i);
            out[i] += &c * term;
        }
    }
    out
}

fn binom(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Double-precision control, same layout as [`Control`].
#[derive(Clone, Debug)]
pub struct NumericControl {
    pieces: Vec<Vec<Vec<f64>>>,
}

impl NumericControl {
    pub fn new(pieces: Vec<Vec<Vec<f64>>>) -> Self {
        Self { pieces }
    }

    pub fn rank(&self) -> usize {
        self.pieces[0].len()
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    fn eval_on(&self, piece: usize, t: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.pieces[piece]) {
            *o = c.iter().rev().fold(0.0, |acc, v| acc * t + v);
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let l = self.num_pieces();
        let piece = ((t * l as f64).floor() as usize).min(l - 1);
        let mut out = vec![0.0; self.rank()];
        self.eval_on(piece, t, &mut out);
        out
    }

    /// Linear combination `Σ s_a basis_a`.
    pub fn combine(basis: &[NumericControl], s: &[f64]) -> Result<Self> {
        check_dim(basis.len(), s.len())?;
        let first = basis.first().ok_or(Error::Empty("control basis"))?;
        let (k, l) = (first.rank(), first.num_pieces());
        let mut pieces = vec![vec![Vec::<f64>::new(); k]; l];
        for (b, &sa) in basis.iter().zip(s) {
            check_dim(l, b.num_pieces())?;
            for (p, piece) in b.pieces.iter().enumerate() {
                for (j, c) in piece.iter().enumerate() {
                    let dst = &mut pieces[p][j];
                    if dst.len() < c.len() {
                        dst.resize(c.len(), 0.0);
                    }
                    for (d, v) in dst.iter_mut().zip(c) {
                        *d += sa * v;
                    }
                }
            }
        }
        Ok(Self { pieces })
    }
}

/// Compiled right-hand side of the horizontal system.
struct FieldTable {
    k: usize,
    m: usize,
    /// `(j, h, Q_{jh})` for non-zero entries.
    entries: Vec<(usize, usize, CompiledPoly)>,
}

impl FieldTable {
    fn new(g: &CarnotGroup) -> Self {
        let mut entries = Vec::new();
        for j in 0..g.rank() {
            for h in g.rank()..g.dim() {
                let p = g.q_field(j, h);
                if !p.is_zero() {
                    entries.push((j, h, p.compile()));
                }
            }
        }
        Self { k: g.rank(), m: g.dim(), entries }
    }

    fn rhs(&self, u: &[f64], x: &[f64], out: &mut [f64]) {
        out[..self.k].copy_from_slice(u);
        out[self.k..].iter_mut().for_each(|v| *v = 0.0);
        for (j, h, p) in &self.entries {
            if u[*j] != 0.0 {
                out[*h] += u[*j] * p.eval(x);
            }
        }
    }
}

/// Classical RK4 for the horizontal system from the identity; the step
/// count is rounded up to a multiple of the control's piece count so that
/// steps never straddle a discontinuity.
pub fn integrate_numeric(g: &CarnotGroup, u: &NumericControl, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("RK4 needs at least one step".into()));
    }
    check_dim(g.rank(), u.rank())?;
    let table = FieldTable::new(g);
    let l = u.num_pieces();
    let steps = steps.div_ceil(l) * l;
    let per_piece = steps / l;
    let h = 1.0 / steps as f64;
    let m = table.m;
    let mut x = vec![0.0; m];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    let mut uv = vec![0.0; g.rank()];
    for n in 0..steps {
        let piece = n / per_piece;
        let t = n as f64 * h;
        u.eval_on(piece, t, &mut uv);
        table.rhs(&uv, &x, &mut k1);
        u.eval_on(piece, t + 0.5 * h, &mut uv);
        for i in 0..m {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        table.rhs(&uv, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        table.rhs(&uv, &tmp, &mut k3);
        u.eval_on(piece, t + h, &mut uv);
        for i in 0..m {
            tmp[i] = x[i] + h * k3[i];
        }
        table.rhs(&uv, &tmp, &mut k4);
        for i in 0..m {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(x)
}

/// Finite-dimensional space of controls with its exact Gram matrix.
#[derive(Clone, Debug)]
pub struct ControlSubspace {
    basis: Vec<Control>,
    gram: Vec<Vec<Q>>,
    pieces: usize,
}

impl ControlSubspace {
    pub fn new(basis: Vec<Control>) -> Result<Self> {
        let first = basis.first().ok_or(Error::Empty("control basis"))?;
        let k = first.rank();
        let mut pieces = 1;
        for b in &basis {
            check_dim(k, b.rank())?;
            pieces = lcm(pieces, b.num_pieces());
        }
        let n = basis.len();
        let mut gram = vec![vec![Q::zero(); n]; n];
        for a in 0..n {
            for b in a..n {
                let v = basis[a].inner(&basis[b])?;
                gram[a][b] = v.clone();
                gram[b][a] = v;
            }
        }
        let rank = rational::rank(&gram);
        if rank < n {
            return Err(Error::DegenerateBasis { rank, n });
        }
        Ok(Self { basis, gram, pieces })
    }

    /// Monomials `t^0..t^d` in each channel, degree-major.
    pub fn poly_degree(k: usize, d: usize) -> Result<Self> {
        Self::piecewise_poly(k, 1, d)
    }

    /// Indicators of the `ℓ` equal pieces in each channel, piece-major.
    pub fn piecewise_const(k: usize, l: usize) -> Result<Self> {
        Self::piecewise_poly(k, l, 0)
    }

    /// Monomials `t^0..t^d` on each of `ℓ` equal pieces in each channel;
    /// ordering piece, then degree, then channel.
    pub fn piecewise_poly(k: usize, l: usize, d: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidArgument("need at least one channel and one piece".into()));
        }
        let mut basis = Vec::new();
        for p in 0..l {
            for deg in 0..=d {
                for ch in 0..k {
                    let mut pieces = vec![vec![Vec::new(); k]; l];
                    let mut c = vec![Q::zero(); deg + 1];
                    c[deg] = Q::one();
                    pieces[p][ch] = c;
                    basis.push(Control::piecewise(pieces)?);
                }
            }
        }
        Self::new(basis)
    }

    /// Shifted Legendre polynomials of degree `0..=d` on each of `ℓ` equal
    /// pieces in each channel, same ordering as [`Self::piecewise_poly`] and
    /// spanning the same space; the Gram matrix is diagonal.
    pub fn piecewise_legendre(k: usize, l: usize, d: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidArgument("need at least one channel and one piece".into()));
        }
        let mut basis = Vec::new();
        for p in 0..l {
            let (a, b) = (q(p as i64, l as i64), q(p as i64 + 1, l as i64));
            for deg in 0..=d {
                let c = legendre_on(&a, &b, deg);
                for ch in 0..k {
                    let mut pieces = vec![vec![Vec::new(); k]; l];
                    pieces[p][ch] = c.clone();
                    basis.push(Control::piecewise(pieces)?);
                }
            }
        }
        Self::new(basis)
    }

    /// Exact coordinates of `c` in this space, assuming the basis is
    /// orthogonal and `c` lies in its span.
    pub fn orthogonal_coords(&self, c: &Control) -> Result<Vec<Q>> {
        self.basis.iter().zip(&self.gram).enumerate().map(|(i, (b, row))| Ok(c.inner(b)? / &row[i])).collect()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn rank(&self) -> usize {
        self.basis[0].rank()
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces
    }

    pub fn basis(&self) -> &[Control] {
        &self.basis
    }

    pub fn gram(&self) -> &[Vec<Q>] {
        &self.gram
    }

    pub fn gram_f64(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| rational::to_f64(&self.gram[i][j]))
    }

    /// The control with coordinates `s` in double precision.
    pub fn control_at(&self, s: &[f64]) -> Result<NumericControl> {
        let basis: Vec<NumericControl> = self
            .basis
            .iter()
            .map(|b| NumericControl::new(b.refine(self.pieces).iter().map(|p| {
                p.iter().map(|c| c.iter().map(rational::to_f64).collect()).collect()
            }).collect()))
            .collect();
        NumericControl::combine(&basis, s)
    }

    /// `‖Σ s_a basis_a‖_{L²}`.
    pub fn l2_norm(&self, s: &[f64]) -> Result<f64> {
        check_dim(self.dim(), s.len())?;
        let g = self.gram_f64();
        let v = nalgebra::DVector::from_column_slice(s);
        Ok((v.transpose() * g * &v)[(0, 0)].max(0.0).sqrt())
    }
}

/// Exact endpoint map restricted to a control subspace.
#[derive(Clone, Debug)]
pub struct EndpointPolyMap {
    group: CarnotGroup,
    subspace: ControlSubspace,
    map: PolyMap<Q>,
    compiled: CompiledMap,
}

impl EndpointPolyMap {
    /// Integrates the horizontal system symbolically, component by component
    /// in weight order, over each piece of the subspace.
    pub fn build(group: &CarnotGroup, subspace: &ControlSubspace) -> Result<Self> {
        check_dim(group.rank(), subspace.rank())?;
        let n = subspace.dim();
        let nv = n + 1;
        let t = n;
        let l = subspace.num_pieces();
        let m = group.dim();
        let k = group.rank();
        let refined: Vec<Vec<Vec<Vec<Q>>>> = subspace.basis.iter().map(|b| b.refine(l)).collect();
        // u_j on piece p as a polynomial in (s, t)
        let controls: Vec<Vec<MultiPoly<Q>>> = (0..l)
            .map(|p| {
                (0..k)
                    .map(|j| {
                        let mut acc = MultiPoly::zero(nv);
                        for (a, b) in refined.iter().enumerate() {
                            for (e, c) in b[p][j].iter().enumerate() {
                                let mut exps = vec![0; nv];
                                exps[a] = 1;
                                exps[t] = e as u32;
                                acc.add_term(exps, c.clone());
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let mut start: Vec<MultiPoly<Q>> = vec![MultiPoly::zero(nv); m];
        for (p, u) in controls.iter().enumerate() {
            let a = q(p as i64, l as i64);
            let b = q(p as i64 + 1, l as i64);
            let mut gamma: Vec<MultiPoly<Q>> = vec![MultiPoly::zero(nv); m];
            for h in 0..m {
                let rate = if h < k {
                    u[h].clone()
                } else {
                    let mut acc = MultiPoly::zero(nv);
                    for j in 0..k {
                        let qf = group.q_field(j, h);
                        if qf.is_zero() || u[j].is_zero() {
                            continue;
                        }
                        let composed = qf.compose(&gamma)?;
                        acc = &acc + &(&u[j] * &composed);
                    }
                    acc
                };
                let anti = rate.integrate(t);
                let offset = &start[h] - &anti.substitute(t, &a);
                gamma[h] = &anti + &offset;
            }
            start = gamma.iter().map(|g| g.substitute(t, &b)).collect();
        }
        let comps: Vec<MultiPoly<Q>> = start.iter().map(|g| g.drop_var(t)).collect();
        let map = PolyMap::new(n, comps)?;
        let compiled = map.compile();
        Ok(Self { group: group.clone(), subspace: subspace.clone(), map, compiled })
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn subspace(&self) -> &ControlSubspace {
        &self.subspace
    }

    pub fn map(&self) -> &PolyMap<Q> {
        &self.map
    }

    pub fn compiled(&self) -> &CompiledMap {
        &self.compiled
    }

    pub fn nvars(&self) -> usize {
        self.map.nvars()
    }

    pub fn ncomps(&self) -> usize {
        self.map.ncomps()
    }

    /// Total degree of each component (0 for identically zero components).
    pub fn degrees(&self) -> Vec<u32> {
        self.map.comps().iter().map(|c| c.degree().unwrap_or(0)).collect()
    }

    pub fn eval(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.nvars(), s.len())?;
        Ok(self.compiled.eval(s))
    }

    pub fn eval_exact(&self, s: &[Q]) -> Result<Vec<Q>> {
        self.map.eval(s)
    }

    pub fn jacobian(&self, s: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.nvars(), s.len())?;
        Ok(self.compiled.jacobian(s))
    }

    pub fn jacobian_exact(&self, s: &[Q]) -> Result<Vec<Vec<Q>>> {
        check_dim(self.nvars(), s.len())?;
        self.map
            .jacobian()
            .iter()
            .map(|row| row.iter().map(|p| p.eval(s)).collect())
            .collect()
    }

    /// Checks `End(λ s) = δ_λ End(s)` exactly on random rational `λ ∈ (0, 10]`
    /// and coordinates.
    pub fn dilation_equivariance_check(&self, trials: usize, seed: u64) -> Result<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let lam = q(rng.gen_range(1..=100), rng.gen_range(1..=10));
            let s: Vec<Q> = (0..self.nvars()).map(|_| q(rng.gen_range(-30..=30), rng.gen_range(1..=8))).collect();
            let scaled: Vec<Q> = s.iter().map(|v| v * &lam).collect();
            let lhs = self.eval_exact(&scaled)?;
            let rhs = self.group.dilate_exact(&lam, &self.eval_exact(&s)?)?;
            if lhs != rhs {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_pieces_are_orthogonal() {
        let e = ControlSubspace::piecewise_legendre(2, 3, 4).unwrap();
        for i in 0..e.dim() {
            for j in 0..e.dim() {
                let deg = (i / 2) % 5;
                let expect = if i == j { q(1, 3 * (2 * deg as i64 + 1)) } else { Q::zero() };
                assert_eq!(e.gram()[i][j], expect, "{i} {j}");
            }
        }
        // P̃_2(t) = 6t² − 6t + 1 on [0, 1]
        assert_eq!(legendre_on(&qi(0), &qi(1), 2), vec![qi(1), qi(-6), qi(6)]);
        let mono = ControlSubspace::piecewise_poly(2, 3, 4).unwrap();
        for b in mono.basis() {
            let c = e.orthogonal_coords(b).unwrap();
            let back: Q = c.iter().zip(e.basis()).map(|(x, v)| x * b.inner(v).unwrap()).sum();
            assert_eq!(back, b.inner(b).unwrap());
        }
    }

    #[test]
    fn gram_of_monomials() {
        let e = ControlSubspace::poly_degree(1, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(e.gram()[i][j], q(1, (i + j + 1) as i64));
            }
        }
    }

    #[test]
    fn piecewise_gram_is_diagonal() {
        let e = ControlSubspace::piecewise_const(2, 4).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { q(1, 4) } else { Q::zero() };
                assert_eq!(e.gram()[i][j], expect);
            }
        }
    }

    #[test]
    fn degenerate_basis_rejected() {
        let u = Control::polynomial(vec![vec![qi(1)], vec![qi(0)]]);
        let v = Control::polynomial(vec![vec![qi(2)], vec![qi(0)]]);
        assert!(matches!(ControlSubspace::new(vec![u, v]), Err(Error::DegenerateBasis { rank: 1, n: 2 })));
    }
}
