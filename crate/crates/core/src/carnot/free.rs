//! Free nilpotent Lie algebras in the Lyndon (Hall) basis.
//!
//! Basis elements are standard bracketings of Lyndon words over the
//! generators, ordered by length and then lexicographically. Brackets are
//! computed by expanding into non-commutative polynomials and peeling off
//! the lexicographically smallest word, which is always Lyndon.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::rational::{qi, Q};

pub(crate) type Word = Vec<u8>;
type NcPoly = BTreeMap<Word, i64>;

pub(crate) fn is_lyndon(w: &[u8]) -> bool {
    !w.is_empty() && (1..w.len()).all(|i| w < &w[i..])
}

/// Lyndon words of length `1..=max_len` over `k` letters, length-lexicographic.
pub(crate) fn lyndon_words(k: usize, max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        let mut layer = Vec::new();
        // Duval's generator enumerates words of length ≤ len in lex order
        let mut w: Vec<u8> = vec![0];
        loop {
            if w.len() == len {
                layer.push(w.clone());
            }
            let m = w.len();
            while w.len() < len {
                let c = w[w.len() - m];
                w.push(c);
            }
            while let Some(&last) = w.last() {
                if last as usize == k - 1 {
                    w.pop();
                } else {
                    break;
                }
            }
            match w.last_mut() {
                Some(c) => *c += 1,
                None => break,
            }
        }
        out.extend(layer);
    }
    out
}

/// Number of Lyndon words of length `n` on `k` letters (Witt's formula).
pub fn witt_dimension(k: usize, n: usize) -> usize {
    let mut total: i128 = 0;
    for d in 1..=n {
        if n % d == 0 {
            total += mobius(d) as i128 * (k as i128).pow((n / d) as u32);
        }
    }
    (total / n as i128) as usize
}

fn mobius(mut n: usize) -> i32 {
    let mut sign = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

fn standard_split(w: &[u8]) -> usize {
    // split point of the longest proper Lyndon suffix
    (1..w.len()).find(|&i| is_lyndon(&w[i..])).expect("words of length ≥ 2 have a Lyndon suffix")
}

fn expand(w: &[u8], cache: &mut BTreeMap<Word, NcPoly>) -> NcPoly {
    if let Some(p) = cache.get(w) {
        return p.clone();
    }
    let p = if w.len() == 1 {
        NcPoly::from([(w.to_vec(), 1)])
    } else {
        let i = standard_split(w);
        let a = expand(&w[..i], cache);
        let b = expand(&w[i..], cache);
        commutator(&a, &b)
    };
    cache.insert(w.to_vec(), p.clone());
    p
}

fn commutator(a: &NcPoly, b: &NcPoly) -> NcPoly {
    let mut out = NcPoly::new();
    for (u, cu) in a {
        for (v, cv) in b {
            let mut uv = u.clone();
            uv.extend_from_slice(v);
            *out.entry(uv).or_insert(0) += cu * cv;
            let mut vu = v.clone();
            vu.extend_from_slice(u);
            *out.entry(vu).or_insert(0) -= cu * cv;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Structure constants `[v_i, v_j] = Σ_h c v_h` of the free nilpotent algebra,
/// listed for `i < j` only, together with the basis words.
pub(crate) fn free_structure(k: usize, s: usize) -> (Vec<Word>, Vec<(usize, usize, usize, Q)>) {
    let words = lyndon_words(k, s);
    let index: BTreeMap<Word, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let mut cache = BTreeMap::new();
    let expansions: Vec<NcPoly> = words.iter().map(|w| expand(w, &mut cache)).collect();
    let mut out = Vec::new();
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            if words[i].len() + words[j].len() > s {
                continue;
            }
            let mut p = commutator(&expansions[i], &expansions[j]);
            while let Some((w, c)) = p.iter().next().map(|(w, c)| (w.clone(), *c)) {
                let h = *index.get(&w).expect("leading word of a Lie element is Lyndon");
                for (u, cu) in &expansions[h] {
                    *p.entry(u.clone()).or_insert(0) -= c * cu;
                }
                p.retain(|_, v| *v != 0);
                let coef = qi(c);
                if !coef.is_zero() {
                    out.push((i, j, h, coef));
                }
            }
        }
    }
    (words, out)
}
