//! Experiment bodies. Each writes its artifacts and returns its checks.

use rand::Rng;
use serde_json::json;

use super::pipeline::{sard_pipeline, PipelineOptions};
use super::sources::{kupka_from, resolve_basis, resolve_cloud, resolve_group, resolve_map, series_spec};
use super::{Artifacts, Check, ExperimentConfig, Report};
use crate::critical::{directed_hausdorff, hausdorff, polish_rank_zero, scan_almost_critical, Domain, LambdaThreshold, Sampler, ScanConfig};
use crate::endpoint::{integrate_numeric, EndpointPolyMap};
use crate::entropy::{entropy_dimension, variation_estimate, variation_scaling_experiment, PointCloud, ScalingOptions, VariationEstimate, VariationOptions};
use crate::error::{Error, Result};
use crate::kupka::KupkaMap;
use crate::linalg::{dist, norm};
use crate::poly::literal::format_poly;
use crate::poly::SupGrid;
use crate::rational::{format_q, to_f64};
use crate::sampling::{derive_seed, rng, sobol_ball};
use crate::series::SeriesMap;
use crate::surjectivity::{build_certificate, dilation_normalized_targets, reach_targets, CertificateOptions};
use crate::width::{omega_rate, width_analytic_bound, width_report_cloud, width_report_ellipsoid, OmegaRate, WidthOptions, WidthReport};

// stream labels under the master seed
const LABEL_WIDTH: u64 = 1;
const LABEL_CONTROLS: u64 = 2;
const LABEL_DILATION: u64 = 3;
const LABEL_SCAN: u64 = 4;
const LABEL_SEED_SEARCH: u64 = 5;
const LABEL_TARGETS: u64 = 6;
const LABEL_VARIATIONS: u64 = 7;
const LABEL_PIPELINE: u64 = 8;
const LABEL_GAP: u64 = 9;

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

fn default_ns(cfg: &ExperimentConfig, upto: usize) -> Vec<usize> {
    cfg.ns.clone().unwrap_or_else(|| (0..=upto).collect())
}

/// Width report of the bare critical grid, its fitted rate and the checks
/// against `1/q` and the tail bound `ζ q^{−n} / √(1 − q^{−2})`.
fn kupka_widths(k: &KupkaMap, ns: &[usize], seed: u64, tol: f64) -> Result<(WidthReport, Option<OmegaRate>, Vec<Check>)> {
    let opts = WidthOptions { seed, ..WidthOptions::default() };
    let report = width_report_cloud(&k.crit_grid(), ns, &opts, 0.0)?;
    let q = k.q_f64();
    let zeta = k.psi().zeta();
    let mut checks = Vec::new();
    let worst = report
        .rows
        .iter()
        .map(|r| r.upper / (zeta * q.powi(-(r.n as i32)) / (1.0 - q.powi(-2)).sqrt()))
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "grid widths below the geometric tail bound",
        worst <= 1.0 + 1e-9,
        format!("max width / bound = {worst:.6}"),
    ));
    let fit = omega_rate(&report).ok();
    match &fit {
        Some(f) => {
            let dev = (f.rate * q - 1.0).abs();
            checks.push(Check::new(
                "width rate matches 1/q",
                dev <= tol,
                format!("rate {:.6} vs 1/q {:.6} ({:.1}% off, allowed {:.1}%)", f.rate, 1.0 / q, 100.0 * dev, 100.0 * tol),
            ));
        }
        None => checks.push(Check::new("width rate matches 1/q", false, "too few positive widths to fit a rate")),
    }
    Ok((report, fit, checks))
}

pub(super) fn kupka_verify(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let k = kupka_from(cfg, 6)?;
    let (d, n, q) = (k.psi().degree(), k.depth(), k.q_f64());
    let mut checks = Vec::new();

    // critical values against the digit grid
    let grid = k.value_grid_exact();
    let mut csv = String::from("value,approx,in_grid\n");
    let (mode, equal) = match k.crit_values_exact() {
        Ok(vals) => {
            for v in &vals {
                csv.push_str(&format!("{},{:e},{}\n", format_q(v), to_f64(v), grid.binary_search(v).is_ok()));
            }
            ("exact", vals == grid)
        }
        Err(_) => {
            let mut vals = k.crit_values();
            vals.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
            let approx: Vec<f64> = grid.iter().map(to_f64).collect();
            for v in &vals {
                let hit = approx.iter().any(|g| (g - v).abs() <= 1e-9);
                csv.push_str(&format!("{v:e},{v:e},{hit}\n"));
            }
            ("float", vals.len() == approx.len() && vals.iter().zip(&approx).all(|(a, b)| (a - b).abs() <= 1e-9))
        }
    };
    art.write("crit_values.csv", &csv)?;
    checks.push(Check::new(
        "critical values equal the enumerated digit grid",
        equal,
        format!("{mode} comparison of {} grid values", grid.len()),
    ));

    // widths of the critical grid
    let tol = cfg.tolerance.unwrap_or(0.1);
    let ns = default_ns(cfg, n.saturating_sub(1));
    let (report, fit, width_checks) = kupka_widths(&k, &ns, derive_seed(cfg.seed(), LABEL_WIDTH), tol)?;
    art.write("width.csv", &report.to_csv())?;
    checks.extend(width_checks);

    // entropy dimension of the critical values at depth ≥ 8
    let deep = KupkaMap::new(d, k.q().clone(), n.max(8))?;
    let cloud = PointCloud::new(1, deep.crit_values().into_iter().map(|v| vec![v]).collect(), "kupka critical values")?;
    let finest = 4.0 * ((d - 1) as f64).powi(-(deep.depth() as i32));
    let ladder = cfg.eps.clone().unwrap_or_else(|| (0..6).map(|j| 0.25 * (finest / 0.25).powf(j as f64 / 5.0)).collect());
    let entropy = entropy_dimension(&cloud, &ladder)?;
    art.write("entropy.csv", &entropy.to_csv())?;
    let window = k.in_smoothness_window();
    if window {
        checks.push(Check::new(
            "critical values have entropy dimension at least 0.9",
            entropy.dimension >= 0.9,
            format!("dimension {:.4} ± {:.4} at depth {}", entropy.dimension, entropy.half_width, deep.depth()),
        ));
    }
    let bounds: Vec<f64> = ns.iter().map(|&i| k.crit_width_bound(i)).collect();
    Ok(Report {
        checks,
        summary: json!({
            "d": d,
            "q": q,
            "depth": n,
            "smoothness_window": window,
            "zeta": k.psi().zeta(),
            "values": grid.len(),
            "width_rate": fit.as_ref().map(|f| f.rate),
            "width_rate_half_width": fit.as_ref().map(|f| f.half_width),
            "stated_width_bound": bounds,
            "entropy_dimension": entropy.dimension,
            "entropy_half_width": entropy.half_width,
        }),
    })
}

pub(super) fn series_map(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let spec = series_spec(cfg)?;
    let (q, m, depth) = (spec.q, spec.m, spec.depth);
    let series = SeriesMap::build(spec, &SupGrid::with_count(cfg.samples.unwrap_or(4096)))?;
    let mut csv = String::from("block,sup,bound\n");
    for b in series.block_checks() {
        csv.push_str(&format!("{},{:e},{:e}\n", b.block, b.sup, b.bound));
    }
    art.write("blocks.csv", &csv)?;

    const HORIZON: usize = 4;
    let r = cfg.radius.unwrap_or(1.0);
    let ns = cfg.ns.clone().unwrap_or_else(|| vec![4, 6, 8]);
    if let Some(&bad) = ns.iter().find(|&&n| n == 0 || n + HORIZON > depth) {
        return Err(Error::InvalidArgument(format!("gap index {bad} needs 1 ≤ n ≤ depth − {HORIZON} = {}", depth.saturating_sub(HORIZON))));
    }
    let mut csv = String::from("n,gap,value_bound,derivative_bound,holds\n");
    let mut checks = Vec::new();
    let count = cfg.points.unwrap_or(8192);
    for &n in &ns {
        let f = series.truncation(n)?.compile();
        let g = series.truncation(n + HORIZON)?.compile();
        let gap = sobol_ball(n + HORIZON, r, count, derive_seed(cfg.seed(), LABEL_GAP) as u32)
            .iter()
            .map(|x| dist(&g.eval(x), &f.eval(&x[..n])))
            .fold(0.0, f64::max);
        let bound = series.value_tail_bound(n, r);
        let holds = gap <= bound;
        csv.push_str(&format!("{n},{gap:e},{bound:e},{:e},{holds}\n", series.derivative_tail_bound(n, r)));
        checks.push(Check::new(format!("gap f_{n} to f_{} below the tail bound", n + HORIZON), holds, format!("{gap:e} ≤ {bound:e}")));
    }
    art.write("tail.csv", &csv)?;

    let ladder = cfg.eps.clone().unwrap_or_else(|| (0..6).map(|j| 0.1 * 0.5f64.powi(j)).collect());
    let opts = PipelineOptions {
        c: cfg.c.unwrap_or(1.0),
        radius: r,
        budget: cfg.budget.unwrap_or(1 << 14),
        nu: cfg.nu.unwrap_or(0),
        lambda: cfg.lambda.clone().unwrap_or_default(),
        variation_samples: 2000,
        seed: derive_seed(cfg.seed(), LABEL_PIPELINE),
    };
    let pipe = sard_pipeline(&series, &ladder, &opts)?;
    art.write("pipeline.csv", &pipe.to_csv())?;
    Ok(Report {
        checks,
        summary: json!({
            "q": q,
            "m": m,
            "depth": depth,
            "pipeline_dimension": pipe.dimension,
            "pipeline_half_width": pipe.half_width,
            "variation_constant": pipe.variation_constant,
        }),
    })
}

pub(super) fn endpoint_poly(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let g = resolve_group(cfg.group.as_deref().unwrap_or("heisenberg"))?;
    let basis_spec = cfg.basis.clone().unwrap_or_else(|| "poly_degree(1)".into());
    let e = resolve_basis(&basis_spec, g.rank())?;
    let f = EndpointPolyMap::build(&g, &e)?;
    let mut checks = Vec::new();

    let degrees = f.degrees();
    let comps: Vec<_> = f
        .map()
        .comps()
        .iter()
        .enumerate()
        .map(|(i, p)| json!({ "index": i + 1, "weight": g.weights()[i], "degree": degrees[i], "terms": format_poly(p) }))
        .collect();
    art.write_json(
        "endpoint.json",
        &json!({
            "group": g.name(),
            "dim": g.dim(),
            "rank": g.rank(),
            "step": g.step(),
            "weights": g.weights(),
            "basis": basis_spec,
            "nvars": f.nvars(),
            "components": comps,
        }),
    )?;
    let within = degrees.iter().zip(g.weights()).all(|(d, w)| d <= w);
    checks.push(Check::new("component degrees within weights", within, format!("degrees {degrees:?}, weights {:?}", g.weights())));

    let steps = cfg.steps.unwrap_or(2000);
    let tol = cfg.tolerance.unwrap_or(1e-8);
    let mut gen = rng(derive_seed(cfg.seed(), LABEL_CONTROLS));
    let samples: Vec<Vec<f64>> = (0..cfg.controls.unwrap_or(100)).map(|_| (0..f.nvars()).map(|_| gen.gen_range(-1.0..1.0)).collect()).collect();
    let mut csv = String::from("sample,steps,max_residual\n");
    let mut worst: f64 = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let exact = f.eval(s)?;
        let num = integrate_numeric(&g, &e.control_at(s)?, steps)?;
        let res = exact.iter().zip(&num).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(res);
        csv.push_str(&format!("{i},{steps},{res:e}\n"));
    }
    art.write("rk4.csv", &csv)?;
    checks.push(Check::new("symbolic map matches RK4", worst <= tol, format!("max residual {worst:e} at {steps} steps")));

    if cfg.convergence.unwrap_or(false) {
        let mut csv = String::from("steps,max_error,order\n");
        let mut prev: Option<f64> = None;
        for k in 0..6 {
            let n = 25usize << k;
            let err = samples
                .iter()
                .take(10)
                .map(|s| {
                    let exact = f.eval(s)?;
                    let num = integrate_numeric(&g, &e.control_at(s)?, n)?;
                    Ok(exact.iter().zip(&num).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let order = prev.filter(|p| *p > 0.0 && err > 0.0).map(|p| (p / err).log2());
            csv.push_str(&format!("{n},{err:e},{}\n", order.map(|o| format!("{o:.3}")).unwrap_or_default()));
            prev = Some(err);
        }
        art.write("convergence.csv", &csv)?;
    }

    let dilation = f.dilation_equivariance_check(100, derive_seed(cfg.seed(), LABEL_DILATION))?;
    checks.push(Check::new("dilation law holds exactly", dilation, "100 random rational inputs"));
    Ok(Report {
        checks,
        summary: json!({ "group": g.name(), "nvars": f.nvars(), "degrees": degrees, "max_rk4_residual": worst }),
    })
}

pub(super) fn crit_scan(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let choice = resolve_map(cfg)?;
    let (n, m) = (choice.map.nvars(), choice.map.ncomps());
    let nu = cfg.nu.unwrap_or(m.saturating_sub(1));
    let lambda = match cfg.lambda.as_deref() {
        None => LambdaThreshold::uniform(m, 0.05)?,
        Some([v]) => LambdaThreshold::uniform(m, *v)?,
        Some(vs) => LambdaThreshold::new(vs.to_vec())?,
    };
    let mut sc = ScanConfig::new(cfg.radius.unwrap_or(choice.radius), cfg.budget.unwrap_or(1 << 16), nu, lambda);
    sc.center = cfg.center.clone().or(choice.center.clone());
    sc.domain = match cfg.domain.as_deref() {
        None if choice.cube => Domain::Cube,
        None => Domain::Ball,
        Some(s) => serde_json::from_value(json!(s)).map_err(|_| Error::InvalidArgument(format!("unknown domain {s:?}")))?,
    };
    if let Some(s) = &cfg.sampler {
        sc.sampler = serde_json::from_value::<Sampler>(json!(s)).map_err(|_| Error::InvalidArgument(format!("unknown sampler {s:?}")))?;
    }
    sc.seed = derive_seed(cfg.seed(), LABEL_SCAN);
    let report = scan_almost_critical(&choice.map.compile(), &sc)?;

    let mut csv = String::new();
    let head: Vec<String> = (0..n)
        .map(|i| format!("x{i}"))
        .chain((0..m).map(|i| format!("sigma{i}")))
        .chain(["crit_nu".to_string(), "almost_crit".to_string()])
        .chain((0..m).map(|i| format!("fx{i}")))
        .collect();
    csv.push_str(&head.join(","));
    csv.push('\n');
    for r in &report.records {
        let cells: Vec<String> = r
            .x
            .iter()
            .chain(&r.sigma)
            .map(|v| format!("{v:e}"))
            .chain([r.crit_nu.to_string(), r.almost_crit.to_string()])
            .chain(r.fx.iter().map(|v| format!("{v:e}")))
            .collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    art.write("scan.csv", &csv)?;
    art.write_json("scan_summary.json", &json!({ "map": choice.label, "summary": report.summary }))?;

    let mut checks = Vec::new();
    let mut extra = json!(null);
    if let (Some(k), true) = (&choice.kupka, cfg.family.as_deref().unwrap_or("kupka") == "kupka" && nu == 0) {
        let polished: Vec<Vec<f64>> = report
            .almost_critical_points()
            .iter()
            .filter_map(|x| polish_rank_zero(&choice.map, x, 1e-12, 50).ok().flatten())
            .collect();
        let grid = k.crit_grid();
        let inward = directed_hausdorff(&polished, &grid);
        let both = hausdorff(&polished, &grid);
        checks.push(Check::new(
            "polished critical points lie on the product grid",
            !polished.is_empty() && inward <= 1e-4,
            format!("{} polished points, directed distance {inward:e}", polished.len()),
        ));
        extra = json!({ "polished": polished.len(), "directed_hausdorff": inward, "hausdorff": both });
    }
    Ok(Report {
        checks,
        summary: json!({
            "map": choice.label,
            "sampled": report.summary.sampled,
            "critical": report.summary.critical,
            "almost_critical": report.summary.almost_critical,
            "clusters": report.summary.cluster_centers.len(),
            "grid_comparison": extra,
        }),
    })
}

pub(super) fn entropy_dim(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let choice = resolve_cloud(cfg)?;
    let ladder = cfg.eps.clone().unwrap_or(choice.ladder);
    let rep = entropy_dimension(&choice.cloud, &ladder)?;
    art.write("entropy.csv", &rep.to_csv())?;
    let mut checks = Vec::new();
    if let Some(reference) = choice.dimension {
        // the product cloud converges more slowly across the ladder
        let product = cfg.source.as_deref().is_some_and(|s| s.starts_with("segment-x-cantor"));
        let tol = cfg.tolerance.unwrap_or(if product { 0.08 } else { 0.05 });
        checks.push(Check::new(
            "entropy dimension matches the reference",
            (rep.dimension - reference).abs() <= tol,
            format!("{:.4} vs {reference:.4} (tolerance {tol})", rep.dimension),
        ));
    }
    Ok(Report {
        checks,
        summary: json!({
            "source": choice.cloud.meta(),
            "points": choice.cloud.len(),
            "dimension": rep.dimension,
            "half_width": rep.half_width,
            "lower_dimension": rep.lower_dimension,
            "reference": choice.dimension,
        }),
    })
}

pub(super) fn variations(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let seed = derive_seed(cfg.seed(), LABEL_VARIATIONS);
    if let Some(ladder) = cfg.ladder()? {
        let mut mcfg = cfg.clone();
        mcfg.family.get_or_insert_with(|| "band".into());
        let choice = resolve_map(&mcfg)?;
        let opts = ScalingOptions {
            budget: cfg.budget.unwrap_or(1 << 16),
            indices: cfg.indices.clone().unwrap_or_else(|| vec![0, 1]),
            variation: VariationOptions { samples: cfg.samples.unwrap_or(20_000), delta: cfg.delta, seed, ..VariationOptions::default() },
            seed,
        };
        let scaling = variation_scaling_experiment(&choice.map, &ladder, cfg.radius.unwrap_or(1.0), &opts)?;
        let mut csv = format!("rung,lambda,points,{}\n", VariationEstimate::csv_header());
        for (i, row) in scaling.rows.iter().enumerate() {
            for est in &row.estimates {
                csv.push_str(&format!("{i},{},{},{}\n", fmt_list(&row.lambda), row.points, est.csv_row()));
            }
        }
        art.write("scaling.csv", &csv)?;
        let empty = scaling.empty_rows == scaling.rows.len();
        let checks = vec![Check::new("almost-critical sets are non-empty", !empty, format!("{} empty rungs", scaling.empty_rows))];
        return Ok(Report { checks, summary: json!({ "map": choice.label, "fits": scaling.fits, "empty_rows": scaling.empty_rows }) });
    }

    let choice = resolve_cloud(cfg)?;
    let dim = choice.cloud.dim();
    let indices = cfg.indices.clone().unwrap_or_else(|| (0..=dim.min(3)).collect());
    let opts = VariationOptions { samples: cfg.samples.unwrap_or(100_000), delta: cfg.delta, seed, ..VariationOptions::default() };
    let rel = cfg.tolerance.unwrap_or(0.03);
    let mut csv = format!("{},reference\n", VariationEstimate::csv_header());
    let mut checks = Vec::new();
    let mut values = Vec::new();
    for &i in &indices {
        let v = variation_estimate(&choice.cloud, i, &opts)?;
        if v.sparse {
            log::warn!("V_{i}: {:.0}% of non-empty fibers are sparse; consider a larger δ", 100.0 * v.sparse_share);
        }
        let reference = choice.variations.iter().find(|(j, _)| *j == i).map(|(_, r)| *r);
        csv.push_str(&format!("{},{}\n", v.csv_row(), reference.map(|r| format!("{r:e}")).unwrap_or_default()));
        if let Some(r) = reference {
            let allowed = (3.0 * v.uncertainty()).max(rel * r);
            checks.push(Check::new(
                format!("V_{i} matches its reference"),
                (v.value - r).abs() <= allowed,
                format!("{:.5} ± {:.5} vs {r:.5}", v.value, v.uncertainty()),
            ));
        }
        values.push(json!({ "index": i, "value": v.value, "uncertainty": v.uncertainty(), "sparse": v.sparse }));
    }
    art.write("variations.csv", &csv)?;
    Ok(Report { checks, summary: json!({ "source": choice.cloud.meta(), "points": choice.cloud.len(), "estimates": values }) })
}

pub(super) fn width(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let source = cfg.source.clone().unwrap_or_else(|| "ellipsoid".into());
    let seed = derive_seed(cfg.seed(), LABEL_WIDTH);
    let mut checks = Vec::new();
    let (report, fit) = match source.as_str() {
        "ellipsoid" => {
            let q = cfg.q_f64("2")?;
            let finite = cfg.axes.is_some();
            let axes = cfg.axes.clone().unwrap_or_else(|| (0..40).map(|k| q.powi(-k)).collect());
            let ns = default_ns(cfg, 8.min(axes.len().saturating_sub(1)));
            let report = width_report_ellipsoid(&axes, &ns, finite)?;
            let off = report
                .rows
                .iter()
                .map(|r| (r.upper - axes.get(r.n).copied().unwrap_or(0.0)).abs())
                .fold(0.0, f64::max);
            checks.push(Check::new("ellipsoid widths equal the semi-axes", off <= 1e-12, format!("max deviation {off:e}")));
            let fit = omega_rate(&report).ok();
            (report, fit)
        }
        "kupka-grid" => {
            let k = kupka_from(cfg, 6)?;
            let ns = default_ns(cfg, k.depth().saturating_sub(1));
            let (report, fit, c) = kupka_widths(&k, &ns, seed, cfg.tolerance.unwrap_or(0.1))?;
            checks.extend(c);
            (report, fit)
        }
        "analytic" => {
            let (kk, l) = (cfg.channels.unwrap_or(1), cfg.pieces.unwrap_or(1));
            let r = cfg.analytic_radius.unwrap_or(std::f64::consts::E);
            let ns = default_ns(cfg, 8);
            let cloud = crate::width::analytic_ball_cloud(kk, l, r, 12, cfg.points.unwrap_or(2000), seed)?;
            let report = width_report_cloud(&cloud, &ns, &WidthOptions { seed, ..WidthOptions::default() }, 0.0)?;
            for row in &report.rows {
                let b = width_analytic_bound(kk, l, r, row.n)?;
                checks.push(Check::new(format!("width {} below the analytic bound", row.n), row.upper <= b, format!("{:e} ≤ {b:e}", row.upper)));
            }
            let fit = omega_rate(&report).ok();
            (report, fit)
        }
        s if s.starts_with("csv:") => {
            let cloud = resolve_cloud(cfg)?.cloud;
            let ns = default_ns(cfg, 8.min(cloud.dim()));
            let report = width_report_cloud(cloud.points(), &ns, &WidthOptions { seed, ..WidthOptions::default() }, 0.0)?;
            let fit = omega_rate(&report).ok();
            (report, fit)
        }
        other => return Err(Error::InvalidArgument(format!("unknown width source {other:?}"))),
    };
    art.write("width.csv", &report.to_csv())?;
    Ok(Report {
        checks,
        summary: json!({
            "source": source,
            "uppers": report.uppers(),
            "rate": fit.as_ref().map(|f| f.rate),
            "rate_half_width": fit.as_ref().map(|f| f.half_width),
            "rate_indices": fit.as_ref().map(|f| f.used.clone()),
        }),
    })
}

pub(super) fn surjectivity(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<Report> {
    let g = resolve_group(cfg.group.as_deref().unwrap_or("heisenberg"))?;
    let budget = cfg.degree_budget.unwrap_or(g.step());
    let mut opts = CertificateOptions::for_group(&g);
    opts.seed.seed = derive_seed(cfg.seed(), LABEL_SEED_SEARCH);
    let cert = build_certificate(&g, budget, &opts)?;
    let mut body = cert.to_json()?;
    body.push('\n');
    art.write("certificate.json", &body)?;

    let targets = dilation_normalized_targets(&g, cfg.targets.unwrap_or(50), derive_seed(cfg.seed(), LABEL_TARGETS));
    let results = reach_targets(&cert, &targets);
    let mut csv = String::from("target,lambda,residual,iterations,reached\n");
    let mut reached = 0;
    let mut worst: f64 = 0.0;
    for (t, r) in targets.iter().zip(&results) {
        match r {
            Ok(sol) => {
                reached += 1;
                worst = worst.max(sol.residual / norm(t).max(1.0));
                csv.push_str(&format!("{},{:e},{:e},{},true\n", fmt_list(t), sol.lambda, sol.residual, sol.iterations));
            }
            Err(e) => {
                log::warn!("target {t:?} not reached: {e}");
                csv.push_str(&format!("{},,,,false\n", fmt_list(t)));
            }
        }
    }
    art.write("reach.csv", &csv)?;
    let checks = vec![
        Check::new("certificate has σ > 0", cert.sigma > 0.0, format!("σ = {:e}, degree {}", cert.sigma, cert.degree)),
        Check::new("every target reached", reached == targets.len(), format!("{reached}/{} reached, worst relative residual {worst:e}", targets.len())),
    ];
    Ok(Report {
        checks,
        summary: json!({
            "group": g.name(),
            "degree": cert.degree,
            "sigma": cert.sigma,
            "covered_ball": cert.covered_ball,
            "lemma_ball": cert.lemma_ball,
            "reached": reached,
            "targets": targets.len(),
            "worst_relative_residual": worst,
        }),
    })
}
