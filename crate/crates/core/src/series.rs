//! Maps on `ℓ²` given as series `f(x) = Σ_k p_k(x_1, …, x_k)` of polynomial
//! blocks with `sup_{B(1)} ‖p_k‖ ≤ q^{−k}`, materialized through their
//! truncations `f_N` together with bounds on the dropped tail.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kupka::KupkaPolynomial;
use crate::poly::{alpha_constant, MultiPoly, PolyMap, SupGrid};

pub const DEFAULT_DEPTH: usize = 8;

/// Relative allowance when a grid-estimated block sup is compared with `q^{−k}`.
const BLOCK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum SeriesBlocks {
    /// `p_k(x) = q^{−k} ψ(x_k) / sup_{[−1,1]}|ψ|` placed on component `(k − 1) mod m`.
    KupkaDiagonal,
    /// Block `k` (1-based) is entry `k − 1`; it may use fewer than `k` variables,
    /// which are then the leading coordinates of `E_k`.
    User(Vec<PolyMap<f64>>),
}

#[derive(Clone, Debug)]
pub struct SeriesMapSpec {
    pub d: u32,
    pub q: f64,
    pub m: usize,
    pub blocks: SeriesBlocks,
    pub depth: usize,
}

impl SeriesMapSpec {
    pub fn kupka_diagonal(d: u32, q: f64, m: usize, depth: usize) -> Self {
        Self { d, q, m, blocks: SeriesBlocks::KupkaDiagonal, depth }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockCheck {
    pub block: usize,
    pub sup: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct SeriesMap {
    spec: SeriesMapSpec,
    /// Block `k` embedded in `ℝ^k`.
    blocks: Vec<PolyMap<f64>>,
    checks: Vec<BlockCheck>,
}

impl SeriesMap {
    /// Materializes blocks `1..=depth` and checks every block against `q^{−k}`
    /// on `B_{E_k}(1)`; the worst violation is reported.
    pub fn build(spec: SeriesMapSpec, grid: &SupGrid) -> Result<Self> {
        if !(spec.q > 1.0) || !spec.q.is_finite() {
            return Err(Error::InvalidArgument(format!("decay base must exceed 1, got {}", spec.q)));
        }
        if spec.m == 0 || spec.depth == 0 {
            return Err(Error::InvalidArgument("codomain dimension and depth must be at least 1".into()));
        }
        let (blocks, exact_sups) = match &spec.blocks {
            SeriesBlocks::KupkaDiagonal => kupka_blocks(&spec)?,
            SeriesBlocks::User(list) => (user_blocks(&spec, list)?, None),
        };
        let mut checks = Vec::with_capacity(blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            let k = i + 1;
            let sup = match &exact_sups {
                Some(s) => s[i],
                None => grid.sup_norm(&b.compile(), 1.0),
            };
            checks.push(BlockCheck { block: k, sup, bound: spec.q.powi(-(k as i32)) });
        }
        let worst = checks
            .iter()
            .filter(|c| c.sup > c.bound * (1.0 + BLOCK_TOL))
            .max_by(|a, b| (a.sup / a.bound).total_cmp(&(b.sup / b.bound)));
        if let Some(w) = worst {
            return Err(Error::BlockNorm { block: w.block, sup: w.sup, bound: w.bound });
        }
        Ok(Self { spec, blocks, checks })
    }

    pub fn spec(&self) -> &SeriesMapSpec {
        &self.spec
    }

    pub fn depth(&self) -> usize {
        self.spec.depth
    }

    /// Block `k`, 1-based, on `ℝ^k`.
    pub fn block(&self, k: usize) -> &PolyMap<f64> {
        &self.blocks[k - 1]
    }

    pub fn block_checks(&self) -> &[BlockCheck] {
        &self.checks
    }

    /// `f_n = Σ_{k ≤ n} p_k ∘ π_k` on `ℝ^n`, for `1 ≤ n ≤ depth`.
    pub fn truncation(&self, n: usize) -> Result<PolyMap<f64>> {
        if n == 0 || n > self.spec.depth {
            return Err(Error::InvalidArgument(format!("truncation {n} outside 1..={}", self.spec.depth)));
        }
        let mut comps = vec![MultiPoly::zero(n); self.spec.m];
        for b in &self.blocks[..n] {
            let shift: Vec<usize> = (0..b.nvars()).collect();
            for (c, p) in comps.iter_mut().zip(b.comps()) {
                *c = &*c + &p.embed(n, &shift);
            }
        }
        PolyMap::new(n, comps)
    }

    /// `α(d, m) (1 + r)^d Σ_{k > n} k^d q^{−k}`: bound on `sup_{B(r)} ‖f − f_n ∘ π_n‖`.
    pub fn value_tail_bound(&self, n: usize, r: f64) -> f64 {
        value_tail_bound(self.spec.d, self.spec.m, self.spec.q, n, r)
    }

    /// Markov bound `(√m d² / r)` times the value tail on `B(r)`.
    pub fn derivative_tail_bound(&self, n: usize, r: f64) -> f64 {
        derivative_tail_bound(self.spec.d, self.spec.m, self.spec.q, n, r)
    }
}

pub fn value_tail_bound(d: u32, m: usize, q: f64, n: usize, r: f64) -> f64 {
    alpha_constant(d, m) * (1.0 + r).powi(d as i32) * power_tail(d, q, n)
}

pub fn derivative_tail_bound(d: u32, m: usize, q: f64, n: usize, r: f64) -> f64 {
    (m as f64).sqrt() * (d * d) as f64 / r * value_tail_bound(d, m, q, n, r)
}

/// `Σ_{k > n} k^d q^{−k}`, summed until the terms are negligible past their peak.
pub fn power_tail(d: u32, q: f64, n: usize) -> f64 {
    if !(q > 1.0) {
        return f64::INFINITY;
    }
    let ln_q = q.ln();
    let peak = d as f64 / ln_q;
    let mut sum = 0.0;
    let mut k = n + 1;
    loop {
        let term = (d as f64 * (k as f64).ln() - k as f64 * ln_q).exp();
        sum += term;
        if (k as f64) > peak && term <= 1e-17 * sum {
            return sum;
        }
        k += 1;
        if k > 100_000_000 {
            return f64::INFINITY;
        }
    }
}

fn kupka_blocks(spec: &SeriesMapSpec) -> Result<(Vec<PolyMap<f64>>, Option<Vec<f64>>)> {
    let psi = KupkaPolynomial::psi(spec.d as usize)?;
    let s = psi.sup_on_unit_interval();
    let mut blocks = Vec::with_capacity(spec.depth);
    let mut sups = Vec::with_capacity(spec.depth);
    for k in 1..=spec.depth {
        let w = spec.q.powi(-(k as i32)) / s;
        let mut p = MultiPoly::zero(k);
        for (e, c) in psi.coeffs().iter().enumerate() {
            let mut exps = vec![0; k];
            exps[k - 1] = e as u32;
            p.add_term(exps, w * c);
        }
        let mut comps = vec![MultiPoly::zero(k); spec.m];
        comps[(k - 1) % spec.m] = p;
        blocks.push(PolyMap::new(k, comps)?);
        sups.push(w * s);
    }
    Ok((blocks, Some(sups)))
}

fn user_blocks(spec: &SeriesMapSpec, list: &[PolyMap<f64>]) -> Result<Vec<PolyMap<f64>>> {
    if list.len() < spec.depth {
        return Err(Error::InvalidArgument(format!("{} blocks supplied, depth {} requested", list.len(), spec.depth)));
    }
    list[..spec.depth]
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let k = i + 1;
            if b.nvars() > k {
                return Err(Error::InvalidArgument(format!("block {k} uses {} variables, at most {k} allowed", b.nvars())));
            }
            if b.ncomps() != spec.m {
                return Err(Error::DimensionMismatch { expected: spec.m, got: b.ncomps() });
            }
            if b.degree().unwrap_or(0) > spec.d {
                return Err(Error::InvalidArgument(format!("block {k} has degree above {}", spec.d)));
            }
            let shift: Vec<usize> = (0..b.nvars()).collect();
            PolyMap::new(k, b.comps().iter().map(|c| c.embed(k, &shift)).collect())
        })
        .collect()
}
