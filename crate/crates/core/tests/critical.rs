use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sardlab::carnot::CarnotGroup;
use sardlab::critical::{
    classify_point, classify_spectrum, hausdorff, scan_almost_critical, singular_values, weyl_gap, Domain, Keep,
    LambdaThreshold, RankTol, Sampler, ScanConfig,
};
use sardlab::endpoint::{Control, ControlSubspace, EndpointPolyMap};
use sardlab::kupka::KupkaMap;
use sardlab::poly::{MultiPoly, PolyMap};
use sardlab::rational::{parse_q, q, qi, rank, Q};

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn trivial_spectra() {
    assert_eq!(singular_values(&DMatrix::identity(2, 2)).unwrap().values, vec![1.0, 1.0]);
    let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
    assert_eq!(singular_values(&d).unwrap().values, vec![3.0, 0.0]);
    let bad = DMatrix::from_row_slice(1, 2, &[f64::NAN, 0.0]);
    assert!(singular_values(&bad).is_err());
    // more rows than columns: padded with zeros
    let tall = DMatrix::from_row_slice(3, 1, &[3.0, 0.0, 4.0]);
    let s = singular_values(&tall).unwrap().values;
    assert_eq!(s.len(), 3);
    assert!((s[0] - 5.0).abs() < 1e-14 && s[1] == 0.0 && s[2] == 0.0);
}

#[test]
fn spectrum_matches_eigenvalues_of_gram() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let m = random_matrix(&mut rng, 3, 7);
        let s = singular_values(&m).unwrap().values;
        let mut eig: Vec<f64> = (&m * m.transpose()).symmetric_eigenvalues().iter().map(|v| v.max(0.0).sqrt()).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s.iter().zip(&eig) {
            assert!((a - b).abs() < 1e-10, "{s:?} vs {eig:?}");
        }
        assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn weyl_examples_and_sweep() {
    let m1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(weyl_gap(&m1, &m1).unwrap().0, 0.0);
    let (gap, norm) = weyl_gap(&m1, &DMatrix::zeros(2, 2)).unwrap();
    assert!((gap - 1.0).abs() < 1e-15 && (norm - 1.0).abs() < 1e-15);
    assert!(weyl_gap(&m1, &DMatrix::zeros(2, 3)).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let m = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=12);
        let a = random_matrix(&mut rng, m, n);
        let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
        let b = &a + random_matrix(&mut rng, m, n) * scale;
        let (gap, norm) = weyl_gap(&a, &b).unwrap();
        assert!(gap <= norm + 1e-12, "{m}x{n}: {gap} > {norm}");
    }
}

#[test]
fn restricting_columns_lowers_every_singular_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(m..=9);
        let j = random_matrix(&mut rng, m, n);
        let full = singular_values(&j).unwrap().values;
        // restriction to a random subspace: J · V with V an isometry
        let k = rng.gen_range(1..=n);
        let v = sardlab::sampling::haar_frame(&mut rng, n, k);
        let restricted = singular_values(&(&j * v)).unwrap().values;
        for (r, f) in restricted.iter().zip(&full) {
            assert!(*r <= f + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn flags_survive_small_perturbations(
        entries in prop::collection::vec(-1.0f64..1.0, 12),
        noise in prop::collection::vec(-1.0f64..1.0, 12),
        eps in 1e-6f64..0.5,
        lam in prop::collection::vec(0.05f64..2.0, 3),
    ) {
        let j = DMatrix::from_row_slice(3, 4, &entries);
        let mut pert = DMatrix::from_row_slice(3, 4, &noise);
        let pn = sardlab::linalg::op_norm(&pert);
        if pn > 0.0 {
            pert *= eps / pn;
        }
        let lambda = LambdaThreshold::new(lam).unwrap();
        let s = singular_values(&j).unwrap();
        let flags = classify_spectrum(&s, 0, &lambda, RankTol::default()).unwrap();
        if flags.almost_critical {
            let sp = singular_values(&(j + pert)).unwrap();
            let inflated = classify_spectrum(&sp, 0, &lambda.inflate(eps), RankTol::default()).unwrap();
            prop_assert!(inflated.almost_critical);
        }
    }
}

#[test]
fn exact_rank_deficiency_agrees_at_full_bound() {
    // random rational maps R^3 -> R^2 of degree 2; critical_1 with tol 0 iff the exact Jacobian has rank < 2
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut deficient = 0;
    for trial in 0..200 {
        let comps: Vec<MultiPoly> = (0..2)
            .map(|_| {
                let mut p = MultiPoly::zero(3);
                for _ in 0..4 {
                    let e: Vec<u32> = (0..3).map(|_| rng.gen_range(0..=2)).collect();
                    if e.iter().sum::<u32>() <= 2 {
                        p.add_term(e, qi(rng.gen_range(-3..=3)));
                    }
                }
                p
            })
            .collect();
        let mut map = PolyMap::new(3, comps).unwrap();
        // every few trials make the second component a multiple of the first
        if trial % 4 == 0 {
            let c0 = map.comp(0).clone();
            map = PolyMap::new(3, vec![c0.clone(), c0.scale(&q(-3, 2))]).unwrap();
        }
        let x: Vec<Q> = (0..3).map(|_| qi(rng.gen_range(-2..=2))).collect();
        let xf: Vec<f64> = x.iter().map(sardlab::rational::to_f64).collect();
        let jac: Vec<Vec<Q>> = map
            .jacobian()
            .iter()
            .map(|row| row.iter().map(|p| p.eval(&x).unwrap()).collect())
            .collect();
        let exact_deficient = rank(&jac) < 2;
        deficient += exact_deficient as usize;
        let lam = LambdaThreshold::uniform(2, 1.0).unwrap();
        let (_, flags) = classify_point(&map.to_f64().compile(), &xf, 1, &lam, RankTol::Absolute(0.0)).unwrap();
        // a float SVD of an exactly singular small-integer matrix returns 0 or round-off;
        // tol = 0 keeps only exact zeros, so compare against a tiny absolute tolerance too
        let (_, loose) = classify_point(&map.to_f64().compile(), &xf, 1, &lam, RankTol::Absolute(1e-12)).unwrap();
        assert_eq!(loose.critical, exact_deficient, "trial {trial}");
        if flags.critical {
            assert!(exact_deficient);
        }
    }
    assert!(deficient >= 50);
}

#[test]
fn constant_map_is_critical_everywhere() {
    let map = PolyMap::new(2, vec![MultiPoly::constant(2, 3.0), MultiPoly::constant(2, -1.0)]).unwrap().compile();
    let lam = LambdaThreshold::uniform(2, 0.1).unwrap();
    for x in [[0.0, 0.0], [1.0, -2.0], [1e3, 4.0]] {
        let (_, flags) = classify_point(&map, &x, 0, &lam, RankTol::default()).unwrap();
        assert!(flags.critical && flags.almost_critical);
    }
    assert!(classify_point(&map, &[0.0, 0.0], 2, &lam, RankTol::default()).is_err());
    assert!(classify_point(&map, &[0.0, 0.0], 0, &lam, RankTol::Absolute(-1.0)).is_err());
}

#[test]
fn heisenberg_endpoint_is_degenerate_at_zero_control() {
    let g = CarnotGroup::heisenberg();
    let basis = vec![
        Control::polynomial(vec![vec![qi(1)], vec![]]),
        Control::polynomial(vec![vec![], vec![qi(1)]]),
        Control::polynomial(vec![vec![qi(0), qi(1)], vec![]]),
        Control::polynomial(vec![vec![], vec![qi(0), qi(1)]]),
    ];
    let f = EndpointPolyMap::build(&g, &ControlSubspace::new(basis).unwrap()).unwrap();
    let lam = LambdaThreshold::uniform(3, 10.0).unwrap();
    let (spec, flags) = classify_point(f.compiled(), &[0.0; 4], 2, &lam, RankTol::default()).unwrap();
    assert!(flags.critical);
    assert!(spec.values[1] > 0.5 && spec.values[2] == 0.0);
    let j = f.jacobian_exact(&vec![qi(0); 4]).unwrap();
    assert!(j[2].iter().all(|v| *v == qi(0)));
    // generic controls reach full rank
    let (spec, flags) = classify_point(f.compiled(), &[0.3, -0.2, 0.5, 0.7], 2, &lam, RankTol::default()).unwrap();
    assert!(!flags.critical && spec.values[2] > 1e-3);
}

fn linear_map() -> PolyMap<f64> {
    // x -> A x with singular values 3 and 0.5
    let a = [[3.0, 0.0, 0.0], [0.0, 0.5, 0.0]];
    let comps = a
        .iter()
        .map(|row| {
            let mut p = MultiPoly::zero(3);
            for (i, c) in row.iter().enumerate() {
                let mut e = vec![0; 3];
                e[i] = 1;
                p.add_term(e, *c);
            }
            p
        })
        .collect();
    PolyMap::new(3, comps).unwrap()
}

#[test]
fn scan_extremes() {
    let f = linear_map().compile();
    for sampler in [Sampler::Grid, Sampler::Sobol, Sampler::Mc] {
        let mut cfg = ScanConfig::new(1.0, 500, 0, LambdaThreshold::uniform(2, 1e6).unwrap());
        cfg.sampler = sampler;
        let rep = scan_almost_critical(&f, &cfg).unwrap();
        assert_eq!(rep.summary.almost_critical, rep.summary.sampled);
        assert!(rep.summary.sampled > 0);
        assert!(rep.records.iter().all(|r| sardlab::linalg::norm(&r.x) <= 1.0 + 1e-12));
        cfg.lambda = LambdaThreshold::uniform(2, 0.4).unwrap();
        cfg.keep = Keep::Flagged;
        let rep = scan_almost_critical(&f, &cfg).unwrap();
        assert_eq!(rep.summary.almost_critical, 0);
        assert!(rep.records.is_empty());
    }
    let mut cfg = ScanConfig::new(1.0, 0, 0, LambdaThreshold::uniform(2, 1.0).unwrap());
    assert!(scan_almost_critical(&f, &cfg).is_err());
    cfg.budget = 10;
    cfg.lambda = LambdaThreshold::uniform(3, 1.0).unwrap();
    assert!(scan_almost_critical(&f, &cfg).is_err());
}

#[test]
fn scan_records_are_consistent_and_reproducible() {
    let k = KupkaMap::new(3, parse_q("1.1").unwrap(), 2).unwrap();
    let f = k.product_map(2).unwrap().compile();
    let mut cfg = ScanConfig::new(1.5, 3000, 1, LambdaThreshold::new(vec![10.0, 0.2]).unwrap());
    cfg.keep_jacobians = true;
    cfg.seed = 17;
    let rep = scan_almost_critical(&f, &cfg).unwrap();
    for r in &rep.records {
        let (spec, flags) = classify_point(&f, &r.x, 1, &cfg.lambda, cfg.tol).unwrap();
        assert_eq!(spec.values, r.sigma);
        assert_eq!((flags.critical, flags.almost_critical), (r.crit_nu, r.almost_crit));
        assert_eq!(f.eval(&r.x), r.fx);
        assert_eq!(r.jacobian.as_ref().unwrap().len(), 6);
    }
    let again = scan_almost_critical(&f, &cfg).unwrap();
    assert_eq!(rep.records.len(), again.records.len());
    assert!(rep.records.iter().zip(&again.records).all(|(a, b)| a.x == b.x && a.sigma == b.sigma));
    assert_eq!(rep.summary.critical, rep.records.iter().filter(|r| r.crit_nu).count());
}

#[test]
fn kupka_scan_at_small_threshold_clusters_at_the_grid() {
    let k = KupkaMap::new(3, parse_q("1.1").unwrap(), 3).unwrap();
    let f = k.poly_map().compile();
    let mut cfg = ScanConfig::new(0.51, 1 << 23, 0, LambdaThreshold::uniform(1, 0.01).unwrap());
    cfg.center = Some(vec![0.5; 3]);
    cfg.domain = Domain::Cube;
    cfg.keep = Keep::Flagged;
    let rep = scan_almost_critical(&f, &cfg).unwrap();
    let flagged = rep.almost_critical_points();
    let grid = k.crit_grid();
    let h = hausdorff(&flagged, &grid);
    assert!(h <= 0.05, "Hausdorff {h} with {} flagged points", flagged.len());
}
