//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Singular values of an `m × n` matrix sorted non-increasingly, with exactly
/// `m` entries: when `m > n` the trailing `m - n` values are the zero
/// eigenvalues of `M Mᵀ`.
pub fn singular_values_rows(m: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = m.shape();
    let mut s: Vec<f64> = if rows == 0 || cols == 0 {
        Vec::new()
    } else if rows == 1 {
        vec![m.norm()]
    } else {
        m.singular_values().iter().copied().collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s.resize(rows, 0.0);
    s
}

/// Operator (spectral) norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.singular_values().max()
}

/// `inf_{|v|=1} |M v|` for a square matrix.
pub fn smallest_singular(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m)?;
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(m.singular_values().min())
}

/// Solves the square system `a x = b` by LU; `None` when singular.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let tol = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, tol).ok()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// Least-squares slope and intercept of `y` against `x`, plus the slope's
/// standard error (zero with two points).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}

/// 95% Student-t half-width of a fitted slope with standard error `se`
/// from `points` samples; zero when there are no residual degrees of freedom.
pub fn fit_half_width(se: f64, points: usize) -> f64 {
    if points <= 2 || !(se > 0.0) {
        return 0.0;
    }
    StudentsT::new(0.0, 1.0, (points - 2) as f64).expect("positive dof").inverse_cdf(0.975) * se
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_tall_matrices_with_zeros() {
        let m = DMatrix::from_row_slice(3, 1, &[3.0, 0.0, 4.0]);
        assert_eq!(singular_values_rows(&m), vec![5.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let (s, i, se) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14 && se < 1e-12);
    }

    #[test]
    fn smallest_singular_rejects_rectangles() {
        assert!(smallest_singular(&DMatrix::zeros(2, 3)).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1e-3]);
        assert!((smallest_singular(&m).unwrap() - 1e-3).abs() < 1e-15);
    }
}
