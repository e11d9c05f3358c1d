use sardlab::critical::{
    classify_point, directed_hausdorff, hausdorff, polish_rank_zero, scan_almost_critical, Domain, LambdaThreshold,
    RankTol, ScanConfig,
};
use sardlab::kupka::{KupkaMap, KupkaPolynomial};
use sardlab::rational::{parse_q, q, qi, Q};

#[test]
fn phi_meets_its_interpolation_conditions() {
    // solve the 4x4 system for a + b x + c x^2 + e x^3 directly
    let rows = vec![
        vec![qi(1), qi(0), qi(0), qi(0)],
        vec![qi(0), qi(1), qi(0), qi(0)],
        vec![qi(1), qi(1), qi(1), qi(1)],
        vec![qi(0), qi(1), qi(2), qi(3)],
    ];
    let sol = sardlab::rational::solve(&rows, &[qi(0), qi(0), qi(1), qi(0)]).unwrap();
    let phi = KupkaPolynomial::phi();
    assert_eq!(phi.exact_coeffs().unwrap(), sol.as_slice());
    assert_eq!(phi.eval(0.5), 0.5);
    assert_eq!(phi.crit_values(), &[0.0, 1.0]);
    assert_eq!(phi.zeta(), 1.0);
}

#[test]
fn psi_has_integer_critical_values() {
    for d in 3..=8 {
        let psi = KupkaPolynomial::psi(d).unwrap();
        assert_eq!(psi.degree(), d);
        assert!(psi.coeffs()[d].abs() > 1e-12);
        let mut vals = psi.crit_values().to_vec();
        vals.sort_by(f64::total_cmp);
        for (i, v) in vals.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-9, "d={d}: {vals:?}");
        }
        for &t in psi.crit_points() {
            assert!(psi.eval_derivative(t).abs() < 1e-9);
        }
        psi.verify_by_roots().unwrap();
    }
    assert!(KupkaPolynomial::psi(2).is_err());
}

#[test]
fn two_level_truncation_values() {
    let k = KupkaMap::new(3, parse_q("1.1").unwrap(), 2).unwrap();
    assert_eq!(k.crit_values_exact().unwrap(), vec![qi(0), q(1, 4), q(1, 2), q(3, 4)]);
}

#[test]
fn critical_values_equal_enumerated_grid_exactly() {
    for n in 1..=6 {
        let k = KupkaMap::new(3, parse_q("1.1").unwrap(), n).unwrap();
        let vals = k.crit_values_exact().unwrap();
        assert_eq!(vals, k.value_grid_exact());
        assert_eq!(vals.len(), 1 << n);
        // consecutive values are 2^{-n} apart
        let step = Q::new(1.into(), (1u64 << n).into());
        assert!(vals.windows(2).all(|w| &w[1] - &w[0] == step));
    }
}

#[test]
fn higher_degree_values_match_digit_enumeration() {
    let k = KupkaMap::new(4, parse_q("1.05").unwrap(), 3).unwrap();
    let vals = k.crit_values();
    let grid = k.value_grid();
    assert_eq!(grid.len(), 27);
    let mut uniq = vals.clone();
    uniq.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    assert_eq!(uniq.len(), grid.len());
    assert!(uniq.iter().zip(&grid).all(|(a, b)| (a - b).abs() < 1e-9));
}

#[test]
fn grid_points_are_rank_zero() {
    let k = KupkaMap::new(3, parse_q("1.1").unwrap(), 3).unwrap();
    let f = k.poly_map().compile();
    let lam = LambdaThreshold::uniform(1, 1e-3).unwrap();
    for x in k.crit_grid() {
        let (_, flags) = classify_point(&f, &x, 0, &lam, RankTol::Absolute(1e-9)).unwrap();
        assert!(flags.critical && flags.almost_critical);
    }
}

#[test]
fn scanned_critical_cloud_matches_product_grid() {
    for (d, qs, n) in [(3, "1.1", 3), (4, "1.1", 2)] {
        let k = KupkaMap::new(d, parse_q(qs).unwrap(), n).unwrap();
        let map = k.poly_map();
        let f = map.compile();
        let mut cfg = ScanConfig::new(0.6, 1 << 16, 0, LambdaThreshold::uniform(1, 0.05).unwrap());
        cfg.center = Some(vec![0.5; n]);
        cfg.domain = Domain::Cube;
        let rep = scan_almost_critical(&f, &cfg).unwrap();
        let mut crit: Vec<Vec<f64>> = Vec::new();
        for x in rep.almost_critical_points() {
            if let Some(p) = polish_rank_zero(&map, &x, 1e-12, 50).unwrap() {
                let (_, flags) = classify_point(&f, &p, 0, &cfg.lambda, RankTol::Absolute(1e-8)).unwrap();
                if flags.critical {
                    crit.push(p);
                }
            }
        }
        let grid = k.crit_grid();
        assert!(!crit.is_empty());
        let h = hausdorff(&crit, &grid);
        assert!(h < 1e-4, "d={d}: Hausdorff {h}");
    }
}

#[test]
fn almost_critical_scan_clusters_at_the_grid() {
    let k = KupkaMap::new(3, parse_q("1.1").unwrap(), 3).unwrap();
    let f = k.poly_map().compile();
    let grid = k.crit_grid();
    let mut cfg = ScanConfig::new(0.6, 1 << 16, 0, LambdaThreshold::uniform(1, 0.05).unwrap());
    cfg.center = Some(vec![0.5; 3]);
    cfg.domain = Domain::Cube;
    cfg.cluster_radius = Some(0.1);
    let rep = scan_almost_critical(&f, &cfg).unwrap();
    let flagged = rep.almost_critical_points();
    assert!(hausdorff(&flagged, &grid) < 0.05);
    assert_eq!(rep.summary.cluster_centers.len(), 8);
    // at Λ = 0.01 the flagged region is a few thousandths wide around each node
    cfg.lambda = LambdaThreshold::uniform(1, 0.01).unwrap();
    cfg.budget = 1 << 20;
    let rep = scan_almost_critical(&f, &cfg).unwrap();
    let flagged = rep.almost_critical_points();
    assert!(!flagged.is_empty());
    assert!(directed_hausdorff(&flagged, &grid) < 0.05);
}

#[test]
fn window_and_bounds() {
    let inside = KupkaMap::new(3, parse_q("1.1").unwrap(), 4).unwrap();
    assert!(inside.in_smoothness_window());
    let outside = KupkaMap::new(3, parse_q("1.5").unwrap(), 4).unwrap();
    assert!(!outside.in_smoothness_window());
    assert!(KupkaMap::new(3, qi(0), 4).is_err());
    assert!(KupkaMap::new(3, qi(2), 0).is_err());
}

#[test]
fn product_and_rank_zero_maps() {
    let k = KupkaMap::new(3, parse_q("1.1").unwrap(), 2).unwrap();
    let g = k.product_map(3).unwrap();
    assert_eq!((g.nvars(), g.ncomps()), (4, 3));
    let gc = g.compile();
    // (x, y) with y on the grid: last component is a grid value, rank 2
    let x = [0.3, -0.8, 1.0, 0.0];
    let v = gc.eval(&x);
    assert_eq!(&v[..2], &[0.3, -0.8]);
    assert!((v[2] - 0.5).abs() < 1e-15);
    let s = sardlab::critical::singular_values(&gc.jacobian(&x)).unwrap();
    assert!(s.values[2] < 1e-12 && s.values[1] > 0.5);

    let h = k.rank_zero_map(2).unwrap();
    assert_eq!((h.nvars(), h.ncomps()), (4, 2));
    let hc = h.compile();
    let grid = k.crit_grid();
    let mut values = Vec::new();
    for a in &grid {
        for b in &grid {
            let x: Vec<f64> = a.iter().chain(b).copied().collect();
            assert!(hc.jacobian(&x).iter().all(|v| v.abs() < 1e-12));
            values.push(hc.eval(&x));
        }
    }
    // dense grid in [0,1]^2 at resolution 1/4
    let mut keys: Vec<(i64, i64)> = values.iter().map(|v| ((v[0] * 4.0).round() as i64, (v[1] * 4.0).round() as i64)).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 16);
}
