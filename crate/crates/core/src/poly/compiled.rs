use nalgebra::DMatrix;

use super::{MultiPoly, NeumaierSum, PolyMap};

/// Flat double-precision form of a polynomial for hot sampling loops.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    nvars: usize,
    coefs: Vec<f64>,
    starts: Vec<usize>,
    factors: Vec<(u32, i32)>,
}

impl CompiledPoly {
    pub fn new(p: &MultiPoly<f64>) -> Self {
        let mut coefs = Vec::with_capacity(p.len());
        let mut starts = Vec::with_capacity(p.len() + 1);
        let mut factors = Vec::new();
        for (e, c) in p.terms() {
            starts.push(factors.len());
            coefs.push(*c);
            for (v, &a) in e.iter().enumerate() {
                if a > 0 {
                    factors.push((v as u32, a as i32));
                }
            }
        }
        starts.push(factors.len());
        Self { nvars: p.nvars(), coefs, starts, factors }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut sum = NeumaierSum::default();
        for (t, c) in self.coefs.iter().enumerate() {
            let mut v = *c;
            for &(var, a) in &self.factors[self.starts[t]..self.starts[t + 1]] {
                v *= if a == 1 { x[var as usize] } else { x[var as usize].powi(a) };
            }
            sum.add(v);
        }
        sum.value()
    }
}

/// Compiled polynomial map together with its compiled Jacobian.
#[derive(Clone, Debug)]
pub struct CompiledMap {
    nvars: usize,
    comps: Vec<CompiledPoly>,
    jac: Vec<Vec<CompiledPoly>>,
}

impl CompiledMap {
    pub fn new(map: &PolyMap<f64>) -> Self {
        let comps = map.comps().iter().map(CompiledPoly::new).collect();
        let jac = map
            .jacobian()
            .iter()
            .map(|row| row.iter().map(CompiledPoly::new).collect())
            .collect();
        Self { nvars: map.nvars(), comps, jac }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn ncomps(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|p| p.eval(x)).collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (m, n) = (self.comps.len(), self.nvars);
        DMatrix::from_fn(m, n, |i, j| self.jac[i][j].eval(x))
    }
}
