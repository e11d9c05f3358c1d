use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sardlab::critical::LambdaThreshold;
use sardlab::entropy::*;
use sardlab::linalg::linear_fit;
use sardlab::poly::{MultiPoly, PolyMap};
use sardlab::sampling::sobol_ball;

fn line_cloud(xs: Vec<f64>) -> PointCloud {
    PointCloud::new(1, xs.into_iter().map(|x| vec![x]).collect(), "line").unwrap()
}

/// Left endpoints of the `2^depth` intervals of the middle-thirds construction.
fn cantor(depth: u32) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..depth {
        len /= 3.0;
        pts = pts.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
    }
    pts
}

/// Occupied cells of side `h` in a grid anchored at the origin.
fn box_count(points: &[Vec<f64>], h: f64) -> usize {
    let mut cells: Vec<Vec<i64>> = points.iter().map(|p| p.iter().map(|v| (v / h + 1e-9).floor() as i64).collect()).collect();
    cells.sort();
    cells.dedup();
    cells.len()
}

fn box_dimension(points: &[Vec<f64>], sides: &[f64]) -> f64 {
    let x: Vec<f64> = sides.iter().map(|h| -h.ln()).collect();
    let y: Vec<f64> = sides.iter().map(|h| (box_count(points, *h) as f64).ln()).collect();
    linear_fit(&x, &y).0
}

fn geometric(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| start * ratio.powi(j as i32)).collect()
}

#[test]
fn covering_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cloud = line_cloud((0..1000).map(|_| rng.gen::<f64>()).collect());
    assert_eq!(epsilon_entropy(&cloud, 0.05).unwrap().upper, 10);

    let single = PointCloud::new(3, vec![vec![0.3, 0.1, 0.2]], "point").unwrap();
    for eps in [1e-6, 0.1, 10.0] {
        let c = epsilon_entropy(&single, eps).unwrap();
        assert_eq!((c.upper, c.lower), (1, 1));
    }
    let pair = PointCloud::new(2, vec![vec![0.0, 0.0], vec![0.6, 0.8]], "pair").unwrap();
    let c = epsilon_entropy(&pair, 0.4).unwrap();
    assert_eq!((c.upper, c.lower), (2, 2));
    assert_eq!(epsilon_entropy(&line_cloud(vec![0.0, 1.0]), 0.4).unwrap().upper, 2);
    // one ball at the midpoint covers the pair; the net keeps data points as centers
    let c = epsilon_entropy(&pair, 0.5).unwrap();
    assert_eq!(c.lower, 1);
    assert!(c.upper <= 2);
    assert_eq!(epsilon_entropy(&line_cloud(vec![0.0, 1.0]), 0.5).unwrap().upper, 1);

    assert!(epsilon_entropy(&PointCloud::new(2, vec![], "none").unwrap(), 0.1).is_err());
    assert!(epsilon_entropy(&pair, 0.0).is_err());
    assert!(PointCloud::new(2, vec![vec![0.0]], "bad").is_err());
    assert!(PointCloud::new(1, vec![vec![f64::NAN]], "bad").is_err());
}

#[test]
fn covering_counts_bracket_box_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<Vec<f64>> = (0..3000).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>().powi(3)]).collect();
    let cloud = PointCloud::new(2, pts.clone(), "warped square").unwrap();
    let ladder = geometric(0.2, 0.7, 8);
    for c in covering_counts(&cloud, &ladder).unwrap() {
        // a cell of side √2·ε sits in one closed ε-ball; an ε-ball meets at most four cells of side 2ε
        assert!(c.lower <= box_count(&pts, 2f64.sqrt() * c.eps), "{c:?}");
        assert!(4 * c.upper >= box_count(&pts, 2.0 * c.eps), "{c:?}");
        assert!(c.lower <= c.upper);
    }
}

#[test]
fn segment_dimension() {
    let seg = line_cloud((0..20000).map(|k| k as f64 / 19999.0).collect());
    let rep = entropy_dimension(&seg, &geometric(0.1, 0.5, 8)).unwrap();
    assert!((rep.dimension - 1.0).abs() <= 0.05, "{}", rep.dimension);
    // the same segment embedded in the plane goes through the farthest-point pass
    let (c, s) = (0.8, 0.6);
    let planar = PointCloud::new(2, (0..5000).map(|k| {
        let t = k as f64 / 4999.0;
        vec![c * t, s * t]
    }).collect(), "segment").unwrap();
    let rep = entropy_dimension(&planar, &geometric(0.1, 0.5, 7)).unwrap();
    assert!((rep.dimension - 1.0).abs() <= 0.05, "{}", rep.dimension);
    assert!((rep.lower_dimension - 1.0).abs() <= 0.1);
}

#[test]
fn cantor_dimension_matches_box_counting() {
    let target = 2f64.ln() / 3f64.ln();
    let pts = cantor(10);
    let as_vec: Vec<Vec<f64>> = pts.iter().map(|x| vec![*x]).collect();
    let sides = geometric(1.0 / 3.0, 1.0 / 3.0, 7);
    let oracle = box_dimension(&as_vec, &sides);
    assert!((oracle - target).abs() < 0.02, "{oracle}");
    let rep = entropy_dimension(&line_cloud(pts), &geometric(0.2, 0.5, 10)).unwrap();
    assert!((rep.dimension - target).abs() <= 0.05, "{}", rep.dimension);
    assert!((rep.dimension - oracle).abs() <= 0.05);
    // covering dimension dominates the Hausdorff dimension of the Cantor set
    assert!(rep.dimension + rep.half_width >= target);
}

#[test]
fn segment_times_cantor_dimension() {
    let target = 1.0 + 2f64.ln() / 3f64.ln();
    let c = cantor(7);
    let pts: Vec<Vec<f64>> = (0..2000)
        .flat_map(|k| {
            let t = k as f64 / 1999.0;
            c.iter().map(move |y| vec![t, *y])
        })
        .collect();
    let oracle = box_dimension(&pts, &geometric(1.0 / 9.0, 1.0 / 3.0, 3));
    assert!((oracle - target).abs() < 0.08, "{oracle}");
    // two full periods of the Cantor scale, smallest radius ten sample spacings
    let cloud = PointCloud::new(2, pts, "segment × Cantor").unwrap();
    let rep = entropy_dimension(&cloud, &geometric(0.05, 1.0 / 3f64.sqrt(), 5)).unwrap();
    assert!((rep.dimension - target).abs() <= 0.08, "{}", rep.dimension);
}

#[test]
fn entropy_dimension_rejects_bad_ladders() {
    let cloud = line_cloud(vec![0.0, 0.5, 1.0]);
    assert!(entropy_dimension(&cloud, &geometric(0.1, 0.5, 4)).is_err());
    assert!(entropy_dimension(&cloud, &[0.1, 0.05, 0.02, 0.01, 0.005]).is_err());
    assert!(entropy_dimension(&cloud, &[0.1; 5]).is_err());
    let rep = entropy_dimension(&cloud, &geometric(0.4, 0.5, 5)).unwrap();
    assert!(rep.to_csv().lines().nth(1) == Some("eps,upper,lower"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn counts_are_ordered_and_monotone(
        pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..200),
        start in 0.05f64..1.0,
    ) {
        let cloud = PointCloud::new(3, pts, "random").unwrap();
        let ladder = geometric(start, 0.7, 8);
        let rows = covering_counts(&cloud, &ladder).unwrap();
        for r in &rows {
            prop_assert!(r.lower >= 1 && r.lower <= r.upper);
        }
        for w in rows.windows(2) {
            // ε decreases along the ladder
            prop_assert!(w[1].upper >= w[0].upper && w[1].lower >= w[0].lower);
        }
    }

    #[test]
    fn line_counts_are_exact_and_monotone(xs in prop::collection::vec(-5.0f64..5.0, 1..100), eps in 0.01f64..2.0) {
        let cloud = line_cloud(xs.clone());
        let c = epsilon_entropy(&cloud, eps).unwrap();
        prop_assert_eq!(c.upper, c.lower);
        prop_assert!(epsilon_entropy(&cloud, eps * 1.5).unwrap().upper <= c.upper);
        // the greedy intervals, checked against the points
        let mut s = xs;
        s.sort_by(f64::total_cmp);
        let mut starts = vec![s[0]];
        for x in &s {
            if *x > starts.last().unwrap() + 2.0 * eps {
                starts.push(*x);
            }
        }
        prop_assert_eq!(starts.len(), c.upper);
    }
}

#[test]
fn crofton_constants() {
    for n in 0..12 {
        assert!((crofton_constant(n, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((crofton_constant(n, n).unwrap() - 1.0).abs() < 1e-12);
        for i in 0..=n {
            assert!((crofton_constant(n, i).unwrap() - crofton_constant(n, n - i).unwrap()).abs() < 1e-12);
        }
    }
    assert!((crofton_constant(2, 1).unwrap() - PI / 2.0).abs() < 1e-14);
    // Γ(1/2)Γ(2) / (Γ(3/2)Γ(1)) = 2
    assert!((crofton_constant(3, 1).unwrap() - 2.0).abs() < 1e-13);
    assert!((crofton_constant(3, 2).unwrap() - 2.0).abs() < 1e-13);
    assert!(crofton_constant(2, 3).is_err());
}

fn segment_cloud(n: usize) -> PointCloud {
    PointCloud::new(2, (0..n).map(|k| {
        let t = k as f64 / (n - 1) as f64;
        vec![0.6 * t, 0.8 * t]
    }).collect(), "unit segment").unwrap()
}

fn disk_cloud(n: usize) -> PointCloud {
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let pts = sobol_ball(2, 1.0, n, 5).into_iter().map(|p| vec![p[0], c * p[1], s * p[1]]).collect();
    PointCloud::new(3, pts, "unit disk").unwrap()
}

#[test]
fn zeroth_variation_counts_components() {
    let mut pts = Vec::new();
    for k in 0..100 {
        let t = k as f64 / 99.0;
        pts.push(vec![t, 0.0]);
        pts.push(vec![t, 3.0 + t]);
    }
    let cloud = PointCloud::new(2, pts, "two arcs").unwrap();
    let v = variation_estimate(&cloud, 0, &VariationOptions::default()).unwrap();
    assert_eq!(v.value, 2.0);
    assert_eq!(v.constant, 1.0);
}

#[test]
fn first_variation_of_a_segment() {
    let cloud = segment_cloud(2000);
    let v = variation_estimate(&cloud, 1, &VariationOptions::default()).unwrap();
    assert!((v.value - 1.0).abs() <= 0.02, "{v:?}");
    assert!(!v.sparse);
    let zero = variation_estimate(&cloud, 2, &VariationOptions::default()).unwrap();
    assert!(zero.value.abs() <= 3.0 * zero.uncertainty(), "{zero:?}");
}

#[test]
fn second_variation_of_a_disk() {
    let cloud = disk_cloud(20000);
    let v = variation_estimate(&cloud, 2, &VariationOptions::default()).unwrap();
    assert!((v.value - PI).abs() <= 0.03 * PI, "{v:?}");
    let zero = variation_estimate(&cloud, 3, &VariationOptions::default()).unwrap();
    assert!(zero.value.abs() <= 3.0 * zero.uncertainty(), "{zero:?}");
}

#[test]
fn stderr_shrinks_with_samples() {
    let cloud = segment_cloud(1000);
    let a = variation_estimate(&cloud, 1, &VariationOptions { samples: 5000, ..Default::default() }).unwrap();
    let b = variation_estimate(&cloud, 1, &VariationOptions { samples: 80000, ..Default::default() }).unwrap();
    let ratio = a.stderr / b.stderr;
    assert!((ratio - 4.0).abs() < 1.0, "{ratio}");
    assert!((b.value - 1.0).abs() <= 3.0 * b.uncertainty() + 0.01);
}

#[test]
fn variation_errors_and_warnings() {
    let cloud = segment_cloud(50);
    assert!(variation_estimate(&cloud, 3, &VariationOptions::default()).is_err());
    assert!(variation_estimate(&cloud, 1, &VariationOptions { samples: 99, ..Default::default() }).is_err());
    assert!(variation_estimate(&cloud, 1, &VariationOptions { delta: Some(-1.0), ..Default::default() }).is_err());
    assert!(variation_estimate(&PointCloud::new(2, vec![], "none").unwrap(), 1, &VariationOptions::default()).is_err());
    let capped = VariationOptions { max_index: 0, ..Default::default() };
    assert!(variation_estimate(&cloud, 1, &capped).is_err());
    // a fiber width far below the spacing leaves almost every fiber with a single point
    let thin = VariationOptions { samples: 2000, delta: Some(1e-4), ..Default::default() };
    assert!(variation_estimate(&cloud, 1, &thin).unwrap().sparse);
}

#[test]
fn variations_are_reproducible() {
    let cloud = segment_cloud(500);
    let o = VariationOptions { samples: 4000, seed: 9, ..Default::default() };
    let a = variation_estimate(&cloud, 1, &o).unwrap();
    let b = variation_estimate(&cloud, 1, &o).unwrap();
    assert_eq!(a.csv_row(), b.csv_row());
}

fn band_map() -> PolyMap<f64> {
    // (x, y) ↦ (x, x·y)
    PolyMap::new(2, vec![MultiPoly::var(2, 0), &MultiPoly::var(2, 0) * &MultiPoly::var(2, 1)]).unwrap()
}

/// Area of the image of the almost-critical band: the map is injective off
/// `x = 0` with Jacobian determinant `x`.
fn band_image_area(l1: f64, l2: f64) -> f64 {
    let h = 1e-3;
    let mut area = 0.0;
    let steps = (2.0 / h) as i64;
    for a in 0..steps {
        for b in 0..steps {
            let (x, y) = (-1.0 + (a as f64 + 0.5) * h, -1.0 + (b as f64 + 0.5) * h);
            if x * x + y * y > 1.0 {
                continue;
            }
            // singular values of [[1, 0], [y, x]]
            let t = 1.0 + x * x + y * y;
            let det = x.abs();
            let s1 = ((t + (t * t - 4.0 * det * det).sqrt()) / 2.0).sqrt();
            let s2 = det / s1;
            if s1 <= l1 && s2 <= l2 {
                area += x.abs() * h * h;
            }
        }
    }
    area
}

#[test]
fn band_variations_scale_with_the_threshold() {
    let l2s = [0.02, 0.04, 0.08, 0.16];
    let ladder: Vec<LambdaThreshold> = l2s.iter().map(|v| LambdaThreshold::new(vec![10.0, *v]).unwrap()).collect();
    let opts = ScalingOptions {
        budget: 1 << 17,
        indices: vec![0, 1, 2],
        variation: VariationOptions { samples: 4000, ..Default::default() },
        seed: 0,
    };
    let res = variation_scaling_experiment(&band_map(), &ladder, 1.0, &opts).unwrap();
    assert_eq!(res.empty_rows, 0);
    // V₁ / Λ₂ constant within 25% across the ladder
    let ratios: Vec<f64> = res.rows.iter().map(|r| r.estimates[1].value / r.lambda[1]).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi <= 1.25 * lo, "{ratios:?}");
    let v1 = &res.fits[1];
    let e = v1.step_exponent.unwrap();
    assert!((e - 1.0).abs() <= 0.25, "V₁ exponent {e}");
    // Λ₁ is fixed, so the product Λ₁ does not vary
    assert!(v1.product_exponent.is_none());
    for row in &res.rows {
        assert!(row.estimates[0].value <= 2.0);
        let area = band_image_area(10.0, row.lambda[1]);
        let v2 = row.estimates[2].value;
        assert!((v2 - area).abs() <= 0.25 * area + 3.0 * row.estimates[2].uncertainty(), "Λ₂ {}: {v2} vs {area}", row.lambda[1]);
    }
    let v2 = res.fits[2].step_exponent.unwrap();
    assert!((v2 - 2.0).abs() <= 0.3, "V₂ exponent {v2}");
}

#[test]
fn linear_map_steps_between_empty_and_full() {
    let p = PolyMap::new(2, vec![MultiPoly::var(2, 0).scale(&2.0), MultiPoly::var(2, 1).scale(&0.5)]).unwrap();
    let ladder: Vec<LambdaThreshold> = [0.25, 1.0, 4.0].iter().map(|v| LambdaThreshold::new(vec![*v, *v]).unwrap()).collect();
    let opts = ScalingOptions { budget: 4096, indices: vec![0, 2], variation: VariationOptions { samples: 4000, ..Default::default() }, seed: 1 };
    let res = variation_scaling_experiment(&p, &ladder, 1.0, &opts).unwrap();
    assert_eq!(res.rows.iter().map(|r| r.points).collect::<Vec<_>>(), vec![0, 0, 4096]);
    assert_eq!(res.empty_rows, 2);
    // image of the unit disk: an ellipse with semi-axes 2 and 1/2
    let area = res.rows[2].estimates[1].value;
    assert!((area - PI).abs() < 0.1 * PI, "{area}");
    let all_empty: Vec<LambdaThreshold> = [0.1, 0.2].iter().map(|v| LambdaThreshold::new(vec![*v, *v]).unwrap()).collect();
    assert!(variation_scaling_experiment(&p, &all_empty, 1.0, &opts).is_err());
}
