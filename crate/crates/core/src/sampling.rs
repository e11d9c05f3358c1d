//! Deterministic point sets: scrambled Sobol points on balls and spheres,
//! seeded pseudo-random generators, and Haar-random orthonormal frames.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

/// Sobol points per scramble seed; longer sequences roll over to a new seed.
const SOBOL_BLOCK: usize = 1 << 16;
const SOBOL_DIMS: usize = 256;

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a master seed and a label.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Coordinate `dim` of the `index`-th scrambled Sobol point, in (0, 1).
pub fn sobol(index: usize, dim: usize, seed: u32) -> f64 {
    assert!(dim < SOBOL_DIMS, "Sobol dimension {dim} exceeds {SOBOL_DIMS}");
    let block = (index / SOBOL_BLOCK) as u32;
    let i = (index % SOBOL_BLOCK) as u32;
    let u = sobol_burley::sample(i, dim as u32, seed.wrapping_add(block.wrapping_mul(7919))) as f64;
    // keep strictly inside the unit interval
    u + 0.5 / (1u64 << 24) as f64
}

fn std_normal_quantile(u: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(u)
}

/// `count` low-discrepancy points uniformly distributed in the closed ball
/// `B(r) ⊂ ℝ^n`.
pub fn sobol_ball(n: usize, r: f64, count: usize, seed: u32) -> Vec<Vec<f64>> {
    (0..count).map(|i| sobol_ball_point(i, n, r, seed)).collect()
}

/// The `i`-th point of [`sobol_ball`].
pub fn sobol_ball_point(i: usize, n: usize, r: f64, seed: u32) -> Vec<f64> {
    if n == 1 {
        return vec![r * (2.0 * sobol(i, 0, seed) - 1.0)];
    }
    let dir = normal_direction(i, n, seed);
    let rad = r * sobol(i, n, seed).powf(1.0 / n as f64);
    dir.into_iter().map(|d| d * rad).collect()
}

/// `count` low-discrepancy points on the sphere of radius `r`, plus the
/// `2n` axis points `±r e_i`.
pub fn sobol_sphere(n: usize, r: f64, count: usize, seed: u32) -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(count + 2 * n);
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut p = vec![0.0; n];
            p[i] = s * r;
            pts.push(p);
        }
    }
    if n > 1 {
        for i in 0..count {
            pts.push(normal_direction(i, n, seed ^ 0x5eed).into_iter().map(|d| d * r).collect());
        }
    }
    pts
}

/// Points in the cube `[-r, r]^n`.
pub fn sobol_cube(n: usize, r: f64, count: usize, seed: u32) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| (0..n).map(|d| r * (2.0 * sobol(i, d, seed) - 1.0)).collect())
        .collect()
}

fn normal_direction(i: usize, n: usize, seed: u32) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|d| std_normal_quantile(sobol(i, d, seed))).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return e;
    }
    g.into_iter().map(|v| v / norm).collect()
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniformly random point of the ball `B(r) ⊂ ℝ^n`.
pub fn uniform_ball<R: Rng>(rng: &mut R, n: usize, r: f64) -> Vec<f64> {
    let g = gaussian_vec(rng, n);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let rad = r * rng.gen::<f64>().powf(1.0 / n as f64);
    g.into_iter().map(|v| v * rad / norm).collect()
}

/// Haar-distributed orthonormal `n × k` frame (QR of a Gaussian matrix with
/// the sign of `R`'s diagonal fixed).
pub fn haar_frame<R: Rng>(rng: &mut R, n: usize, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut qm = qr.q();
    let rm = qr.r();
    for j in 0..k {
        if rm[(j, j)] < 0.0 {
            for i in 0..n {
                qm[(i, j)] = -qm[(i, j)];
            }
        }
    }
    qm.columns(0, k).into_owned()
}
