//! Config-file polynomial literals: a list of `[[α₁,…,α_n], "p/q"]` term pairs.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{MultiPoly, PolyMap};
use crate::error::{Error, Result};
use crate::rational::{format_q, parse_q, Q};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermLiteral(pub Vec<u32>, pub Value);

pub fn parse_poly(nvars: usize, terms: &[TermLiteral]) -> Result<MultiPoly<Q>> {
    let mut p = MultiPoly::zero(nvars);
    for TermLiteral(e, c) in terms {
        if e.len() != nvars {
            return Err(Error::DimensionMismatch { expected: nvars, got: e.len() });
        }
        let c = match c {
            Value::String(s) => parse_q(s)?,
            Value::Number(n) => parse_q(&n.to_string())?,
            other => return Err(Error::InvalidArgument(format!("bad coefficient {other}"))),
        };
        p.add_term(e.clone(), c);
    }
    Ok(p)
}

pub fn parse_map(nvars: usize, comps: &[Vec<TermLiteral>]) -> Result<PolyMap<Q>> {
    let comps = comps.iter().map(|t| parse_poly(nvars, t)).collect::<Result<Vec<_>>>()?;
    PolyMap::new(nvars, comps)
}

pub fn format_poly(p: &MultiPoly<Q>) -> Vec<TermLiteral> {
    p.terms()
        .map(|(e, c)| TermLiteral(e.clone(), Value::String(format_q(c))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn round_trip() {
        let json = r#"[[[2,0],"1"],[[0,1],"-3/4"],[[1,1],2]]"#;
        let terms: Vec<TermLiteral> = serde_json::from_str(json).unwrap();
        let p = parse_poly(2, &terms).unwrap();
        assert_eq!(p.coeff(&[0, 1]), q(-3, 4));
        assert_eq!(p.coeff(&[1, 1]), q(2, 1));
        assert_eq!(parse_poly(2, &format_poly(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_wrong_arity() {
        let terms: Vec<TermLiteral> = serde_json::from_str(r#"[[[1],"1"]]"#).unwrap();
        assert!(parse_poly(2, &terms).is_err());
    }
}
