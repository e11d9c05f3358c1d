//! JSON group definitions.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CarnotGroup, DEFAULT_DIM_CAP};
use crate::error::{parse_json, Error, Result};
use crate::rational::{parse_q, Q};

/// `{"rank": 2, "step": 2, "strata_dims": [2, 1], "brackets": [[1, 2, 3, "1"]]}`
/// with 1-based indices; omitted brackets are zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub rank: usize,
    pub step: usize,
    pub strata_dims: Vec<usize>,
    #[serde(default)]
    pub brackets: Vec<(usize, usize, usize, Value)>,
}

impl GroupSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn build(&self) -> Result<CarnotGroup> {
        if self.strata_dims.len() != self.step {
            return Err(Error::InvalidArgument(format!(
                "step {} but {} strata dimensions",
                self.step,
                self.strata_dims.len()
            )));
        }
        if self.strata_dims.first() != Some(&self.rank) {
            return Err(Error::InvalidArgument(format!(
                "rank {} must equal the first stratum dimension",
                self.rank
            )));
        }
        let m: usize = self.strata_dims.iter().sum();
        if m > DEFAULT_DIM_CAP {
            return Err(Error::DimensionCap { dim: m, cap: DEFAULT_DIM_CAP });
        }
        let entries = self
            .brackets
            .iter()
            .map(|(i, j, h, c)| {
                if *i == 0 || *j == 0 || *h == 0 {
                    return Err(Error::InvalidArgument("bracket indices are 1-based".into()));
                }
                Ok((i - 1, j - 1, h - 1, coefficient(c)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let name = self.name.clone().unwrap_or_else(|| "custom".to_string());
        CarnotGroup::from_structure(&name, self.strata_dims.clone(), entries)
    }
}

fn coefficient(v: &Value) -> Result<Q> {
    match v {
        Value::String(s) => parse_q(s),
        Value::Number(n) => parse_q(&n.to_string()),
        other => Err(Error::InvalidArgument(format!("bad bracket coefficient {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engel_from_json() {
        let text = r#"{"rank":2,"step":3,"strata_dims":[2,1,1],"brackets":[[1,2,3,"1"],[1,3,4,"1"]]}"#;
        let g = GroupSpec::from_json(text).unwrap().build().unwrap();
        assert_eq!(g.dim(), 4);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = GroupSpec::from_json("{\n\"rank\": 2,\n\"step\": }").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn zero_index_rejected() {
        let text = r#"{"rank":2,"step":2,"strata_dims":[2,1],"brackets":[[0,1,2,"1"]]}"#;
        assert!(GroupSpec::from_json(text).unwrap().build().is_err());
    }
}
