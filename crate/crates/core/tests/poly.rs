use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sardlab::poly::{markov_check, rescale_bound_check, MultiPoly, PolyMap, SupGrid, DEFAULT_SLACK};
use sardlab::rational::{q, Q};

fn random_poly(rng: &mut ChaCha8Rng, n: usize, d: u32, terms: usize) -> MultiPoly<f64> {
    let mut p = MultiPoly::zero(n);
    for _ in 0..terms {
        let mut e = vec![0u32; n];
        let deg = rng.gen_range(0..=d);
        for _ in 0..deg {
            e[rng.gen_range(0..n)] += 1;
        }
        p.add_term(e, rng.gen_range(-1.0..1.0));
    }
    p
}

fn random_map(rng: &mut ChaCha8Rng) -> PolyMap<f64> {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=3);
    let d = rng.gen_range(1..=5);
    let comps = (0..m)
        .map(|_| {
            let terms = rng.gen_range(1..=6);
            random_poly(rng, n, d, terms)
        })
        .collect();
    PolyMap::new(n, comps).unwrap()
}

#[test]
fn markov_inequality_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let grid = SupGrid::with_count(2048);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let p = random_map(&mut rng);
        if p.degree().unwrap_or(0) == 0 {
            continue;
        }
        let r = [0.5, 1.0, 2.0][i % 3];
        let rep = markov_check(&p, r, &grid, DEFAULT_SLACK).unwrap();
        assert!(rep.holds, "case {i}: lhs {} rhs {}", rep.lhs, rep.rhs);
        worst = worst.max(rep.lhs / rep.rhs);
    }
    assert!(worst <= 1.0 + DEFAULT_SLACK);
}

#[test]
fn rescale_bound_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let grid = SupGrid::with_count(1024);
    for i in 0..200 {
        let p = random_map(&mut rng);
        let r = rng.gen_range(0.1..4.0);
        let rep = rescale_bound_check(&p, r, &grid, DEFAULT_SLACK).unwrap();
        assert!(rep.holds, "case {i}: lhs {} rhs {}", rep.lhs, rep.rhs);
    }
}

fn small_q() -> impl Strategy<Value = Q> {
    (-20i64..=20, 1i64..=7).prop_map(|(a, b)| q(a, b))
}

fn exact_poly(n: usize) -> impl Strategy<Value = MultiPoly> {
    prop::collection::vec((prop::collection::vec(0u32..=3, n), small_q()), 0..6)
        .prop_map(move |terms| MultiPoly::from_terms(n, terms).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ring_laws_hold_exactly(p in exact_poly(3), r in exact_poly(3), x in prop::collection::vec(small_q(), 3)) {
        let px = p.eval(&x).unwrap();
        let rx = r.eval(&x).unwrap();
        prop_assert_eq!((&p + &r).eval(&x).unwrap(), &px + &rx);
        prop_assert_eq!((&p * &r).eval(&x).unwrap(), &px * &rx);
        prop_assert_eq!((&p - &p).eval(&x).unwrap(), q(0, 1));
    }

    #[test]
    fn derivative_inverts_integration(p in exact_poly(3), var in 0usize..3) {
        prop_assert_eq!(p.integrate(var).partial(var), p.clone());
        // the other order loses only the part constant in `var`
        let back = p.partial(var).integrate(var);
        let diff = &p - &back;
        prop_assert!(diff.degree_in(var).unwrap_or(0) == 0);
    }

    #[test]
    fn stored_terms_are_nonzero(p in exact_poly(2), r in exact_poly(2)) {
        let s = &p - &r;
        prop_assert!(s.terms().all(|(e, c)| e.len() == 2 && *c != q(0, 1)));
    }
}
