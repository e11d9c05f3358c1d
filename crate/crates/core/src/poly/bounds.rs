//! Grid checks of the Markov inequality and of the ball-rescaling estimate
//! for polynomial maps `ℝ^n → ℝ^m`.

use serde::Serialize;

use super::{Coeff, CompiledMap, PolyMap};
use crate::error::{Error, Result};
use crate::linalg::{norm, op_norm};
use crate::sampling::{sobol_ball, sobol_sphere};

/// Point set used to estimate suprema over a ball: Sobol interior points,
/// Sobol boundary points and the center.
#[derive(Clone, Copy, Debug)]
pub struct SupGrid {
    pub interior: usize,
    pub sphere: usize,
    pub seed: u32,
}

impl Default for SupGrid {
    fn default() -> Self {
        Self { interior: 4096, sphere: 1024, seed: 0 }
    }
}

impl SupGrid {
    pub fn with_count(interior: usize) -> Self {
        Self { interior, sphere: interior / 4, ..Self::default() }
    }

    pub fn points(&self, n: usize, r: f64) -> Vec<Vec<f64>> {
        let mut pts = vec![vec![0.0; n]];
        if n == 0 {
            return pts;
        }
        pts.extend(sobol_ball(n, r, self.interior, self.seed));
        pts.extend(sobol_sphere(n, r, self.sphere, self.seed.wrapping_add(1)));
        pts
    }

    /// Grid estimate of `sup_{B(r)} |p|`.
    pub fn sup_norm(&self, map: &CompiledMap, r: f64) -> f64 {
        self.points(map.nvars(), r)
            .iter()
            .map(|x| norm(&map.eval(x)))
            .fold(0.0, f64::max)
    }

    /// Grid estimate of `sup_{B(r)} |D_x p|_op`.
    pub fn sup_jacobian_norm(&self, map: &CompiledMap, r: f64) -> f64 {
        self.points(map.nvars(), r)
            .iter()
            .map(|x| op_norm(&map.jacobian(x)))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// Grid supremum of the bounded quantity.
    pub lhs: f64,
    /// The inequality's right side evaluated with grid suprema, without slack.
    pub rhs: f64,
    /// Relative allowance for grid undersampling of the right side.
    pub slack: f64,
    pub holds: bool,
}

pub const DEFAULT_SLACK: f64 = 0.05;

fn grid_points_nonempty(grid: &SupGrid) -> Result<()> {
    if grid.interior == 0 && grid.sphere == 0 {
        Err(Error::Empty("sup grid"))
    } else {
        Ok(())
    }
}

/// Checks `sup_{B(r)} |D_x p|_op ≤ (√m d² / r) sup_{B(r)} |p|`.
pub fn markov_check<C: Coeff>(p: &PolyMap<C>, r: f64, grid: &SupGrid, slack: f64) -> Result<BoundReport> {
    if r <= 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    grid_points_nonempty(grid)?;
    let map = p.compile();
    let d = p.degree().unwrap_or(0) as f64;
    let m = p.ncomps() as f64;
    let lhs = grid.sup_jacobian_norm(&map, r);
    let rhs = m.sqrt() * d * d / r * grid.sup_norm(&map, r);
    Ok(BoundReport { lhs, rhs, slack, holds: lhs <= rhs * (1.0 + slack) })
}

/// `α(d, m) = m^{d/2} d^{2d} (d + 1)`.
pub fn alpha_constant(d: u32, m: usize) -> f64 {
    let d_f = d as f64;
    (m as f64).powf(d_f / 2.0) * d_f.powf(2.0 * d_f) * (d_f + 1.0)
}

/// Checks `sup_{B(r)} |p| ≤ α(d, m) n^d (1 + r)^d sup_{B(1)} |p|`.
pub fn rescale_bound_check<C: Coeff>(p: &PolyMap<C>, r: f64, grid: &SupGrid, slack: f64) -> Result<BoundReport> {
    if r <= 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    grid_points_nonempty(grid)?;
    let map = p.compile();
    let d = p.degree().unwrap_or(0);
    let n = p.nvars() as f64;
    let lhs = grid.sup_norm(&map, r);
    let rhs = alpha_constant(d, p.ncomps()) * n.powi(d as i32) * (1.0 + r).powi(d as i32) * grid.sup_norm(&map, 1.0);
    Ok(BoundReport { lhs, rhs, slack, holds: lhs <= rhs * (1.0 + slack) })
}
