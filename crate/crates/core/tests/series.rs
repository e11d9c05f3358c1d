use sardlab::error::Error;
use sardlab::kupka::KupkaMap;
use sardlab::poly::{alpha_constant, MultiPoly, PolyMap, SupGrid};
use sardlab::rational::parse_q;
use sardlab::sampling::sobol_ball;
use sardlab::series::{power_tail, SeriesBlocks, SeriesMap, SeriesMapSpec};

fn user_block(k: usize, coef: f64) -> PolyMap<f64> {
    // coef · x_k² on E_k
    let mut e = vec![0; k];
    e[k - 1] = 2;
    PolyMap::new(k, vec![MultiPoly::monomial(k, e, coef)]).unwrap()
}

#[test]
fn single_block_truncation_is_the_block() {
    let b = user_block(1, 0.3);
    let spec = SeriesMapSpec { d: 2, q: 3.0, m: 1, blocks: SeriesBlocks::User(vec![b.clone()]), depth: 1 };
    let s = SeriesMap::build(spec, &SupGrid::default()).unwrap();
    assert_eq!(s.truncation(1).unwrap(), b);
    assert!(s.truncation(2).is_err());
}

#[test]
fn block_norm_violation_reports_worst_offender() {
    let q: f64 = 2.0;
    let blocks = vec![user_block(1, 0.4), user_block(2, 0.3), user_block(3, 0.2), user_block(4, 0.0625)];
    let spec = SeriesMapSpec { d: 2, q, m: 1, blocks: SeriesBlocks::User(blocks), depth: 4 };
    match SeriesMap::build(spec, &SupGrid::default()) {
        // ratios: 0.8, 1.2, 1.6, 1.0
        Err(Error::BlockNorm { block, sup, bound }) => {
            assert_eq!(block, 3);
            assert!((sup - 0.2).abs() < 1e-12 && (bound - 0.125).abs() < 1e-15);
        }
        other => panic!("expected a block norm error, got {other:?}"),
    }
}

#[test]
fn kupka_diagonal_matches_truncated_kupka_up_to_normalization() {
    let q = 1.1;
    let n = 5;
    let series = SeriesMap::build(SeriesMapSpec::kupka_diagonal(3, q, 1, n), &SupGrid::default()).unwrap();
    let kupka = KupkaMap::new(3, parse_q("1.1").unwrap(), n).unwrap();
    let psi = kupka.psi();
    let s = psi.sup_on_unit_interval();
    let f = series.truncation(n).unwrap();
    let g = kupka.poly_map();
    // term k, power e: series has q^{-k} c_e / S, Kupka has 2^{-k} c_e q^{(k-1)e}
    for k in 1..=n {
        for (e, c) in psi.coeffs().iter().enumerate().skip(1) {
            let mut exps = vec![0; n];
            exps[k - 1] = e as u32;
            let a = f.comp(0).coeff(&exps);
            let b = g.comp(0).coeff(&exps);
            let ratio = q.powi(-(k as i32)) / s * 2f64.powi(k as i32) * q.powi(-(((k - 1) * e) as i32));
            assert!((a - b * ratio).abs() <= 1e-12 * a.abs().max(1e-300), "k={k} e={e}");
            assert!((a - q.powi(-(k as i32)) * c / s).abs() < 1e-15);
        }
    }
    for c in series.block_checks() {
        assert!((c.sup - c.bound).abs() < 1e-15);
    }
}

#[test]
fn kupka_diagonal_cycles_components() {
    let series = SeriesMap::build(SeriesMapSpec::kupka_diagonal(4, 2.0, 3, 6), &SupGrid::default()).unwrap();
    for k in 1..=6 {
        let b = series.block(k);
        for (c, p) in b.comps().iter().enumerate() {
            assert_eq!(p.is_zero(), c != (k - 1) % 3);
        }
    }
}

#[test]
fn tail_bound_formula_and_monotonicity() {
    let s = SeriesMap::build(SeriesMapSpec::kupka_diagonal(3, 4.0, 1, 8), &SupGrid::default()).unwrap();
    let direct: f64 = (5..2000).map(|k| alpha_constant(3, 1) * 8.0 * (k as f64).powi(3) * 4f64.powi(-k)).sum();
    assert!((s.value_tail_bound(4, 1.0) - direct).abs() <= 1e-12 * direct);
    let mut prev = f64::INFINITY;
    for n in 0..20 {
        let t = s.value_tail_bound(n, 1.0);
        assert!(t < prev);
        prev = t;
    }
    assert!(s.derivative_tail_bound(4, 2.0) > s.value_tail_bound(4, 2.0));
    assert!((power_tail(3, 4.0, 4) * alpha_constant(3, 1) * 8.0 - s.value_tail_bound(4, 1.0)).abs() < 1e-15);
}

#[test]
fn measured_truncation_gap_is_below_tail_bound() {
    let s = SeriesMap::build(SeriesMapSpec::kupka_diagonal(3, 4.0, 1, 12), &SupGrid::default()).unwrap();
    for n in [4, 6, 8] {
        let f = s.truncation(n).unwrap().compile();
        let g = s.truncation(n + 4).unwrap().compile();
        let mut gap: f64 = 0.0;
        for x in sobol_ball(n + 4, 1.0, 8192, 3) {
            gap = gap.max((g.eval(&x)[0] - f.eval(&x[..n])[0]).abs());
        }
        assert!(gap > 0.0 && gap <= s.value_tail_bound(n, 1.0), "n={n}: {gap}");
        // the blocks alone already bound the gap by Σ q^{-k}
        let direct: f64 = (n + 1..=n + 4).map(|k| 4f64.powi(-(k as i32))).sum();
        assert!(gap <= direct * (1.0 + 1e-12));
    }
}

#[test]
fn rejects_bad_specs() {
    let g = SupGrid::default();
    assert!(SeriesMap::build(SeriesMapSpec::kupka_diagonal(3, 1.0, 1, 4), &g).is_err());
    assert!(SeriesMap::build(SeriesMapSpec::kupka_diagonal(3, 2.0, 0, 4), &g).is_err());
    let too_wide = PolyMap::new(2, vec![MultiPoly::var(2, 1)]).unwrap();
    let spec = SeriesMapSpec { d: 2, q: 2.0, m: 1, blocks: SeriesBlocks::User(vec![too_wide]), depth: 1 };
    assert!(SeriesMap::build(spec, &g).is_err());
}
