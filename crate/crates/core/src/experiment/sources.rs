//! Resolution of groups, control bases, maps and point clouds named in a
//! configuration.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::config::anchor;
use super::ExperimentConfig;
use crate::carnot::{CarnotGroup, GroupSpec};
use crate::endpoint::{Control, ControlSubspace, EndpointPolyMap};
use crate::entropy::PointCloud;
use crate::error::{parse_json, Error, Result};
use crate::kupka::KupkaMap;
use crate::poly::literal::{parse_map, TermLiteral};
use crate::poly::{MultiPoly, PolyMap, SupGrid};
use crate::rational::{parse_q, Q};
use crate::sampling::sobol_ball;
use crate::series::{SeriesMap, SeriesMapSpec};
use crate::width::analytic_ball_cloud;

/// Splits `name(a,b)` into `("name", ["a", "b"])`; a bare name has no arguments.
fn call(spec: &str) -> Result<(String, Vec<String>)> {
    let s = spec.trim();
    match s.find('(') {
        None => Ok((s.to_ascii_lowercase(), Vec::new())),
        Some(open) => {
            let inner = s[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::InvalidArgument(format!("unbalanced parentheses in {spec:?}")))?;
            let args = inner.split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect();
            Ok((s[..open].trim().to_ascii_lowercase(), args))
        }
    }
}

fn usize_args(spec: &str, args: &[String], count: usize) -> Result<Vec<usize>> {
    if args.len() != count {
        return Err(Error::InvalidArgument(format!("{spec:?} takes {count} argument(s)")));
    }
    args.iter()
        .map(|a| a.parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad integer {a:?} in {spec:?}"))))
        .collect()
}

fn looks_like_file(s: &str) -> bool {
    s.ends_with(".json") || Path::new(s).is_file()
}

/// A built-in group name or the path of a JSON group definition.
pub fn resolve_group(spec: &str) -> Result<CarnotGroup> {
    if looks_like_file(spec) {
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{spec}: {e}")))?;
        let def: GroupSpec = GroupSpec::from_json(&text).map_err(|e| anchor(path, e))?;
        return def.build().map_err(|e| anchor_semantic(path, &text, e));
    }
    CarnotGroup::builtin(spec)
}

/// Anchors a validation error of a well-formed group file at the line of the
/// field it concerns.
fn anchor_semantic(path: &Path, text: &str, e: Error) -> Error {
    let key = match &e {
        Error::JacobiViolation(..) | Error::GradingViolation { .. } => Some("brackets"),
        Error::NotStratified(_) => Some("strata_dims"),
        Error::InvalidArgument(msg) if msg.contains("strata") || msg.contains("step") => Some("strata_dims"),
        Error::InvalidArgument(msg) if msg.contains("rank") => Some("rank"),
        Error::InvalidArgument(_) => Some("brackets"),
        _ => None,
    };
    let line = key.and_then(|k| text.lines().position(|l| l.contains(&format!("\"{k}\""))));
    match line {
        Some(l) => Error::Parse { line: l + 1, column: 1, msg: format!("{}: {e}", path.display()) },
        None => anchor(path, e),
    }
}

/// `poly_degree(d)`, `piecewise_const(ℓ)`, `piecewise_poly(ℓ,d)`,
/// `piecewise_legendre(ℓ,d)`, or a JSON file listing basis controls, each a
/// `k`-list of `t`-coefficient arrays.
pub fn resolve_basis(spec: &str, k: usize) -> Result<ControlSubspace> {
    if looks_like_file(spec) {
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{spec}: {e}")))?;
        let raw: Vec<Vec<Vec<Value>>> = parse_json(&text).map_err(|e| anchor(path, e))?;
        let basis = raw
            .iter()
            .map(|ctrl| {
                let comps = ctrl
                    .iter()
                    .map(|coeffs| coeffs.iter().map(value_q).collect::<Result<Vec<Q>>>())
                    .collect::<Result<Vec<_>>>()?;
                Ok(Control::polynomial(comps))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| anchor(path, e))?;
        return ControlSubspace::new(basis);
    }
    let (name, args) = call(spec)?;
    match name.as_str() {
        "poly_degree" => ControlSubspace::poly_degree(k, usize_args(spec, &args, 1)?[0]),
        "piecewise_const" => ControlSubspace::piecewise_const(k, usize_args(spec, &args, 1)?[0]),
        "piecewise_poly" => {
            let a = usize_args(spec, &args, 2)?;
            ControlSubspace::piecewise_poly(k, a[0], a[1])
        }
        "piecewise_legendre" => {
            let a = usize_args(spec, &args, 2)?;
            ControlSubspace::piecewise_legendre(k, a[0], a[1])
        }
        _ => Err(Error::InvalidArgument(format!("unknown control basis {spec:?}"))),
    }
}

fn value_q(v: &Value) -> Result<Q> {
    match v {
        Value::String(s) => parse_q(s),
        Value::Number(n) => parse_q(&n.to_string()),
        other => Err(Error::InvalidArgument(format!("bad coefficient {other}"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    nvars: usize,
    components: Vec<Vec<TermLiteral>>,
}

pub fn read_map_file(path: &Path) -> Result<PolyMap<Q>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let f: MapFile = parse_json(&text).map_err(|e| anchor(path, e))?;
    parse_map(f.nvars, &f.components).map_err(|e| anchor(path, e))
}

/// A polynomial map under study with a suggested scan domain.
pub struct MapChoice {
    pub map: PolyMap<f64>,
    pub label: String,
    /// Kupka-type maps live in `[0, 1]^N`; others are scanned around 0.
    pub kupka: Option<KupkaMap>,
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub cube: bool,
}

/// `(x, y) ↦ (x, x y)`, whose almost-critical set is a band around `x = 0`.
pub fn band_map() -> PolyMap<f64> {
    let x = MultiPoly::var(2, 0);
    let xy = MultiPoly::monomial(2, vec![1, 1], 1.0);
    PolyMap::new(2, vec![x, xy]).expect("two variables")
}

pub fn kupka_from(cfg: &ExperimentConfig, depth: usize) -> Result<KupkaMap> {
    KupkaMap::new(cfg.d.unwrap_or(3), cfg.q_exact("1.1")?, cfg.depth.unwrap_or(depth))
}

/// Resolves `family` (or `map_file`) with Kupka defaults `d = 3`, `q = 1.1`,
/// `N = 3`.
pub fn resolve_map(cfg: &ExperimentConfig) -> Result<MapChoice> {
    if let Some(path) = &cfg.map_file {
        let map = read_map_file(path)?.to_f64();
        return Ok(MapChoice { map, label: path.display().to_string(), kupka: None, center: None, radius: 1.0, cube: false });
    }
    let family = cfg.family.as_deref().unwrap_or("kupka").to_ascii_lowercase();
    let m = cfg.m.unwrap_or(1);
    let kupka_choice = |map: PolyMap<f64>, k: KupkaMap, label: String| {
        let n = map.nvars();
        MapChoice { map, label, kupka: Some(k), center: Some(vec![0.5; n]), radius: 0.6, cube: true }
    };
    match family.as_str() {
        "kupka" => {
            let k = kupka_from(cfg, 3)?;
            Ok(kupka_choice(k.poly_map(), k, "kupka".into()))
        }
        "product" => {
            let k = kupka_from(cfg, 3)?;
            Ok(kupka_choice(k.product_map(m)?, k, format!("product(m={m})")))
        }
        "rankzero" => {
            let k = kupka_from(cfg, 3)?;
            Ok(kupka_choice(k.rank_zero_map(m)?, k, format!("rankzero(m={m})")))
        }
        "series" => {
            let spec = series_spec(cfg)?;
            let depth = spec.depth;
            let s = SeriesMap::build(spec, &SupGrid::with_count(cfg.samples.unwrap_or(4096)))?;
            let map = s.truncation(depth)?;
            Ok(MapChoice { map, label: format!("series(N={depth})"), kupka: None, center: None, radius: 1.0, cube: false })
        }
        "band" => Ok(MapChoice { map: band_map(), label: "band".into(), kupka: None, center: None, radius: 1.0, cube: false }),
        "endpoint" => {
            let g = resolve_group(cfg.group.as_deref().unwrap_or("heisenberg"))?;
            let e = resolve_basis(cfg.basis.as_deref().unwrap_or("poly_degree(1)"), g.rank())?;
            let f = EndpointPolyMap::build(&g, &e)?;
            Ok(MapChoice {
                map: f.map().to_f64(),
                label: format!("endpoint({})", g.name()),
                kupka: None,
                center: None,
                radius: 1.0,
                cube: false,
            })
        }
        other => Err(Error::InvalidArgument(format!("unknown map family {other:?}"))),
    }
}

/// Kupka-diagonal series spec with defaults `d = 3`, `q = 4`, `m = 1`, `N = 12`.
pub fn series_spec(cfg: &ExperimentConfig) -> Result<SeriesMapSpec> {
    let d = cfg.d.unwrap_or(3);
    Ok(SeriesMapSpec::kupka_diagonal(d as u32, cfg.q_f64("4")?, cfg.m.unwrap_or(1), cfg.depth.unwrap_or(12)))
}

/// Left endpoints of the `2^depth` intervals of the middle-thirds construction.
pub fn cantor_points(depth: usize) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..depth {
        len /= 3.0;
        pts = pts.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
    }
    pts
}

/// Evenly spaced points of the unit segment from 0 to `(0.6, 0.8)`.
pub fn unit_segment(n: usize) -> PointCloud {
    let n = n.max(2);
    let pts = (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            vec![0.6 * t, 0.8 * t]
        })
        .collect();
    PointCloud::new(2, pts, "unit segment").expect("finite points")
}

/// Sobol points of the unit disk tilted into `ℝ³`.
pub fn unit_disk(n: usize, seed: u32) -> PointCloud {
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let pts = sobol_ball(2, 1.0, n, seed).into_iter().map(|p| vec![p[0], c * p[1], s * p[1]]).collect();
    PointCloud::new(3, pts, "unit disk").expect("finite points")
}

/// A sampled cloud with its reference dimension and variations when known.
pub struct CloudChoice {
    pub cloud: PointCloud,
    pub dimension: Option<f64>,
    /// `(index, value)` pairs of known variations.
    pub variations: Vec<(usize, f64)>,
    pub ladder: Vec<f64>,
}

fn geometric(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| start * ratio.powi(j as i32)).collect()
}

/// Resolves `source` with `points` samples for the sampled shapes.
pub fn resolve_cloud(cfg: &ExperimentConfig) -> Result<CloudChoice> {
    let spec = cfg.source.as_deref().unwrap_or("segment");
    if let Some(path) = spec.strip_prefix("csv:") {
        let cloud = read_csv_cloud(Path::new(path))?;
        let spacing = cloud.median_spacing().unwrap_or(1e-3).max(1e-12);
        let diam = bounding_diameter(&cloud).max(spacing * 64.0);
        let count = 6;
        let ratio = ((10.0 * spacing) / (diam / 4.0)).powf(1.0 / (count - 1) as f64);
        return Ok(CloudChoice { cloud, dimension: None, variations: Vec::new(), ladder: geometric(diam / 4.0, ratio, count) });
    }
    let (name, args) = call(spec)?;
    let seed = cfg.seed() as u32;
    let ln23 = 2f64.ln() / 3f64.ln();
    match name.as_str() {
        "segment" => {
            let n = cfg.points.unwrap_or(20_000);
            Ok(CloudChoice { cloud: unit_segment(n), dimension: Some(1.0), variations: vec![(0, 1.0), (1, 1.0), (2, 0.0)], ladder: geometric(0.1, 0.5, 8) })
        }
        "disk" => {
            let n = cfg.points.unwrap_or(20_000);
            Ok(CloudChoice {
                cloud: unit_disk(n, seed),
                dimension: Some(2.0),
                variations: vec![(0, 1.0), (2, std::f64::consts::PI), (3, 0.0)],
                ladder: geometric(0.25, 0.5, 5),
            })
        }
        "cantor" => {
            let depth = if args.is_empty() { 10 } else { usize_args(spec, &args, 1)?[0] };
            let pts = cantor_points(depth).into_iter().map(|x| vec![x]).collect();
            let cloud = PointCloud::new(1, pts, format!("cantor({depth})"))?;
            let count = depth.clamp(5, 10);
            Ok(CloudChoice { cloud, dimension: Some(ln23), variations: Vec::new(), ladder: geometric(0.2, 0.5, count) })
        }
        "segment-x-cantor" => {
            let depth = if args.is_empty() { 7 } else { usize_args(spec, &args, 1)?[0] };
            let n = cfg.points.unwrap_or(2000).max(2);
            let c = cantor_points(depth);
            let pts = (0..n)
                .flat_map(|k| {
                    let t = k as f64 / (n - 1) as f64;
                    c.iter().map(move |y| vec![t, *y])
                })
                .collect();
            let cloud = PointCloud::new(2, pts, format!("segment x cantor({depth})"))?;
            Ok(CloudChoice { cloud, dimension: Some(1.0 + ln23), variations: Vec::new(), ladder: geometric(0.05, 1.0 / 3f64.sqrt(), 5) })
        }
        "kupka-values" => {
            let k = kupka_from(cfg, 8)?;
            let vals = k.crit_values();
            let base = (k.psi().degree() - 1) as f64;
            let finest = 4.0 * base.powi(-(k.depth() as i32));
            let ladder = geometric(0.25, (finest / 0.25).powf(0.2), 6);
            let cloud = PointCloud::new(1, vals.into_iter().map(|v| vec![v]).collect(), "kupka critical values")?;
            Ok(CloudChoice { cloud, dimension: None, variations: Vec::new(), ladder })
        }
        "kupka-grid" => {
            let k = kupka_from(cfg, 6)?;
            let cloud = PointCloud::new(k.depth(), k.crit_grid(), "kupka critical grid")?;
            Ok(CloudChoice { cloud, dimension: None, variations: Vec::new(), ladder: geometric(0.25, 0.5, 5) })
        }
        "analytic" => {
            let k = cfg.channels.unwrap_or(1);
            let l = cfg.pieces.unwrap_or(1);
            let r = cfg.analytic_radius.unwrap_or(std::f64::consts::E);
            let pts = analytic_ball_cloud(k, l, r, 12, cfg.points.unwrap_or(2000), cfg.seed())?;
            let cloud = PointCloud::from_points(pts, "analytic unit ball")?;
            Ok(CloudChoice { cloud, dimension: None, variations: Vec::new(), ladder: geometric(0.25, 0.5, 5) })
        }
        _ => Err(Error::InvalidArgument(format!("unknown cloud source {spec:?}"))),
    }
}

/// Comma-separated coordinates, one point per line; `#` starts a comment.
pub fn read_csv_cloud(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let p = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse { line: i + 1, column: 1, msg: format!("{}: {e}", path.display()) })?;
        pts.push(p);
    }
    PointCloud::from_points(pts, path.display().to_string())
}

fn bounding_diameter(cloud: &PointCloud) -> f64 {
    let dim = cloud.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in cloud.points() {
        for j in 0..dim {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_syntax() {
        assert_eq!(call("poly_degree(2)").unwrap(), ("poly_degree".to_string(), vec!["2".to_string()]));
        assert_eq!(call("segment").unwrap().1.len(), 0);
        assert!(call("free(2,3").is_err());
    }

    #[test]
    fn bases_resolve() {
        assert_eq!(resolve_basis("poly_degree(1)", 2).unwrap().dim(), 4);
        assert_eq!(resolve_basis("piecewise_poly(2, 1)", 2).unwrap().dim(), 8);
        assert!(resolve_basis("poly_degree(1,2)", 2).is_err());
        assert!(resolve_basis("splines(3)", 2).is_err());
    }
}
