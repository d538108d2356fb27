//! One function per experiment kind. Each resolves its defaults into the
//! knobs (so the echoed config is complete), runs, and returns named
//! pass/fail assertions plus the artifacts to write.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use rplab::euler_scheme::VectorFieldFamily;
use rplab::geodesic::{cc_norm_upper, heisenberg_cc_norm, GeodesicFamilyConfig};
use rplab::rde_lab::{
    davie_rate_experiment, gamma_limit_bound_check, lambda_gamma, DavieConfig, DavieRecursion, WindowPlacement,
};
use rplab::stochastic_driver::{
    azencott_tail_experiment, ebm_rate_study, lq_convergence_experiment, AzencottConfig, LqConfig, DEFAULT_FINE_LEVEL,
};
use rplab::{
    path_signature, AlgebraShape, Error, GroupElement, LieSeries, PiecewiseLinearPath, Result, RoughPathGrid,
    TensorSeries,
};

use crate::config::{Kind, Knobs};
use crate::plotdata::emit_plotdata;

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Everything a run produces; written out by the caller.
#[derive(Debug)]
pub struct Outcome {
    pub kind: Kind,
    /// Knobs with all defaults filled in.
    pub config: Knobs,
    pub assertions: Vec<Assertion>,
    pub report: Value,
    /// Tidy CSV body, if the experiment has one.
    pub csv: Option<String>,
    /// Additional `(file name, contents)` pairs.
    pub extra: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

pub fn run(kind: Kind, mut knobs: Knobs) -> Result<Outcome> {
    knobs.kind = Some(kind);
    knobs.validate_common()?;
    match kind {
        Kind::Selfcheck => selfcheck(knobs),
        Kind::Sig => sig(knobs),
        Kind::Ccnorm => ccnorm(knobs),
        Kind::EulerRate => euler_rate(knobs),
        Kind::DavieRate => davie_rate(knobs),
        Kind::GammaBound => gamma_bound(knobs),
        Kind::Azencott => azencott(knobs),
        Kind::LqConv => lq_conv(knobs),
    }
}

fn outcome(kind: Kind, config: Knobs, assertions: Vec<Assertion>, report: impl Serialize, csv: Option<String>) -> Result<Outcome> {
    Ok(Outcome {
        kind,
        config,
        assertions,
        report: serde_json::to_value(report).map_err(|e| Error::Inconsistent(e.to_string()))?,
        csv,
        extra: Vec::new(),
    })
}

fn load_fields(source: &str) -> Result<VectorFieldFamily> {
    match VectorFieldFamily::builtin(source) {
        Ok(v) => Ok(v),
        Err(_) if Path::new(source).exists() => VectorFieldFamily::load(Path::new(source)),
        Err(e) => Err(e),
    }
}

/// `(1, 0, ..., 0)` unless given.
fn initial_point(knobs: &mut Knobs, v: &VectorFieldFamily) -> Vec<f64> {
    knobs
        .y0
        .get_or_insert_with(|| {
            let mut y = vec![0.0; v.state_dim()];
            y[0] = 1.0;
            y
        })
        .clone()
}

fn geodesic_config(knobs: &mut Knobs) -> Result<GeodesicFamilyConfig> {
    let base = GeodesicFamilyConfig::default();
    let cfg = GeodesicFamilyConfig {
        k_budget: *knobs.geodesic.k_budget.get_or_insert(base.k_budget),
        segments: *knobs.geodesic.m.get_or_insert(base.segments),
        tol: *knobs.geodesic.geodesic_tol.get_or_insert(base.tol),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn random_group_element(shape: AlgebraShape, rng: &mut ChaCha12Rng, scale: f64) -> Result<GroupElement> {
    let mut coeffs: Vec<f64> = (0..shape.len()).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    coeffs[0] = 0.0;
    Ok(LieSeries::dynkin_projection(&TensorSeries::from_flat(shape, coeffs)?).exp())
}

fn relative_gap(a: &GroupElement, b: &GroupElement) -> Result<f64> {
    let scale = a.series().coeffs().iter().chain(b.series().coeffs()).fold(1.0f64, |m, c| m.max(c.abs()));
    Ok(a.series().max_abs_diff(b.series())? / scale)
}

#[derive(Default, Serialize)]
struct WorstCase {
    name: &'static str,
    worst: f64,
    tolerance: f64,
}

fn selfcheck(mut knobs: Knobs) -> Result<Outcome> {
    let d = *knobs.d.get_or_insert(2);
    let n = *knobs.depth.get_or_insert(3);
    let cases = *knobs.cases.get_or_insert(200);
    let seed = knobs.seed.expect("seed resolved by the caller");
    let shape = AlgebraShape::new(d, n)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut checks = [
        WorstCase { name: "associativity", tolerance: 1e-12, ..Default::default() },
        WorstCase { name: "inverse", tolerance: 1e-12, ..Default::default() },
        WorstCase { name: "exp-log", tolerance: 1e-12, ..Default::default() },
        WorstCase { name: "dilation", tolerance: 1e-12, ..Default::default() },
        WorstCase { name: "group-like", tolerance: 1e-8, ..Default::default() },
        WorstCase { name: "chen", tolerance: 1e-12, ..Default::default() },
    ];
    let identity = GroupElement::identity(shape);
    for _ in 0..cases {
        let a = random_group_element(shape, &mut rng, 0.5)?;
        let b = random_group_element(shape, &mut rng, 0.5)?;
        let c = random_group_element(shape, &mut rng, 0.5)?;
        let left = a.multiply(&b)?.multiply(&c)?;
        let right = a.multiply(&b.multiply(&c)?)?;
        checks[0].worst = checks[0].worst.max(relative_gap(&left, &right)?);
        checks[1].worst = checks[1].worst.max(relative_gap(&a.multiply(&a.inverse())?, &identity)?);
        checks[2].worst = checks[2].worst.max(relative_gap(&a.log().exp(), &a)?);
        let lambda = rng.random_range(0.2..3.0);
        let lhs = a.multiply(&b)?.dilate(lambda);
        let rhs = a.dilate(lambda).multiply(&b.dilate(lambda))?;
        checks[3].worst = checks[3].worst.max(relative_gap(&lhs, &rhs)?);
        if !a.is_group_like(checks[4].tolerance) {
            checks[4].worst = f64::INFINITY;
        }

        let segments = rng.random_range(2..10);
        let increments: Vec<Vec<f64>> = (0..segments)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) / segments as f64).collect())
            .collect();
        let path = PiecewiseLinearPath::from_increments(&vec![0.0; d], &increments)?;
        let mut split = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        split.sort_by(f64::total_cmp);
        let [s, t, u] = split;
        let direct = path_signature(&path, s, u, shape)?;
        let chained = path_signature(&path, s, t, shape)?.multiply(&path_signature(&path, t, u, shape)?)?;
        checks[5].worst = checks[5].worst.max(relative_gap(&direct, &chained)?);
    }
    let assertions = checks
        .iter()
        .map(|c| {
            Assertion::new(
                c.name,
                c.worst <= c.tolerance,
                format!("worst {:.3e} over {cases} cases (tolerance {:.0e})", c.worst, c.tolerance),
            )
        })
        .collect();
    outcome(Kind::Selfcheck, knobs, assertions, json!({ "d": d, "N": n, "cases": cases, "checks": checks }), None)
}

fn required_input(knobs: &Knobs, kind: Kind) -> Result<std::path::PathBuf> {
    knobs
        .input
        .clone()
        .ok_or_else(|| Error::InvalidInput(format!("{kind} needs --input")))
}

fn sig(mut knobs: Knobs) -> Result<Outcome> {
    let input = required_input(&knobs, Kind::Sig)?;
    let n = *knobs.depth.get_or_insert(2);
    let path = PiecewiseLinearPath::load_csv(&input)?;
    let shape = AlgebraShape::new(path.dim(), n)?;
    let g = path_signature(&path, path.start_time(), path.end_time(), shape)?;
    let assertions = vec![Assertion::new(
        "group-like",
        g.is_group_like(1e-8),
        format!("step-{n} signature of {} segments", path.segment_count()),
    )];
    let mut out = outcome(Kind::Sig, knobs, assertions, &g, None)?;
    out.extra.push(("signature.json".into(), g.to_json()));
    Ok(out)
}

fn ccnorm(mut knobs: Knobs) -> Result<Outcome> {
    let input = required_input(&knobs, Kind::Ccnorm)?;
    let cfg = geodesic_config(&mut knobs)?;
    let g = GroupElement::from_json(&std::fs::read_to_string(&input)?)?;
    let bounds = cc_norm_upper(&g, &cfg)?;
    let mut assertions = vec![Assertion::new(
        "sandwich",
        bounds.lower <= bounds.upper,
        format!("lower {:.6} <= upper {:.6}", bounds.lower, bounds.upper),
    )];
    if g.shape().dim() == 2 && g.shape().depth() == 2 {
        let exact = heisenberg_cc_norm(&g)?;
        let slack = 1e-9 * exact.max(1.0);
        assertions.push(Assertion::new(
            "heisenberg-exact",
            bounds.lower <= exact + slack && exact <= bounds.upper + slack,
            format!("exact {exact:.6}, gap {:.3}%", 100.0 * (bounds.upper / exact - 1.0)),
        ));
    }
    let summary: Value = serde_json::from_str(&bounds.to_json("ccnorm_path.csv")).expect("bounds JSON");
    let mut out = outcome(Kind::Ccnorm, knobs, assertions, summary, None)?;
    out.extra.push(("ccnorm_path.csv".into(), bounds.path.to_csv()));
    Ok(out)
}

fn davie_config(knobs: &mut Knobs, default_windows: Option<usize>, default_lengths: fn() -> Vec<f64>) -> DavieConfig {
    let windows = match knobs.windows.or(default_windows) {
        Some(k) => {
            knobs.windows = Some(k);
            WindowPlacement::evenly(k)
        }
        None => WindowPlacement::Dyadic,
    };
    DavieConfig {
        depth: knobs.depth.expect("depth resolved"),
        p: knobs.p.expect("p resolved"),
        lengths: knobs.lengths.get_or_insert_with(default_lengths).clone(),
        windows,
        tol: *knobs.tol.get_or_insert(1e-12),
    }
}

fn euler_rate(mut knobs: Knobs) -> Result<Outcome> {
    let v = load_fields(knobs.fields.get_or_insert_with(|| "linear1d".into()))?;
    knobs.depth.get_or_insert(2);
    knobs.p.get_or_insert(1.0);
    let y0 = initial_point(&mut knobs, &v);
    let cfg = davie_config(&mut knobs, None, DavieConfig::smooth_lengths);
    let path = match &knobs.input {
        Some(p) => PiecewiseLinearPath::load_csv(p)?.retimed(0.0, 1.0)?,
        None => PiecewiseLinearPath::moment_curve(v.driver_dim(), *knobs.fine_level.get_or_insert(DEFAULT_FINE_LEVEL))?,
    };
    let shape = AlgebraShape::new(path.dim(), cfg.depth)?;
    let grid = RoughPathGrid::from_skeleton(Arc::new(path), RoughPathGrid::uniform_times(1), shape, cfg.p)?;
    let report = davie_rate_experiment(&v, &grid, &y0, &cfg)?;
    let target = cfg.theta() - 0.1;
    let assertions = vec![Assertion::new(
        "euler-exponent",
        report.fitted_slope >= target,
        format!("slope {:.4} >= {target:.2}", report.fitted_slope),
    )];
    let csv = emit_plotdata(&report);
    outcome(Kind::EulerRate, knobs, assertions, &report, Some(csv))
}

fn davie_rate(mut knobs: Knobs) -> Result<Outcome> {
    let v = load_fields(knobs.fields.get_or_insert_with(|| "linear2d".into()))?;
    let n = *knobs.depth.get_or_insert(2);
    knobs.p.get_or_insert(2.5);
    let y0 = initial_point(&mut knobs, &v);
    let cfg = davie_config(&mut knobs, Some(8), DavieConfig::dyadic_lengths);
    let samples = *knobs.samples.get_or_insert(50);
    let agreement_samples = *knobs.agreement_samples.get_or_insert(0);
    let fine = *knobs.fine_level.get_or_insert(DEFAULT_FINE_LEVEL);
    let seed = knobs.seed.expect("seed resolved by the caller");
    let study = ebm_rate_study(&v, &y0, &cfg, None, samples, seed, fine)?;
    let target = (n as f64 + 1.0) / 2.0 - 0.2;
    let mut assertions = vec![Assertion::new(
        "davie-slope",
        study.mean_slope >= target,
        format!("mean slope {:.4} over {samples} samples >= {target:.2}", study.mean_slope),
    )];
    let mut report = json!({ "rate": &study });
    if agreement_samples > 0 {
        let geo = geodesic_config(&mut knobs)?;
        let agreement = ebm_rate_study(&v, &y0, &cfg, Some(&geo), agreement_samples, seed, fine)?;
        let mean = agreement.mean_agreement_slope.expect("agreement requested");
        let target = cfg.theta() - 0.15;
        assertions.push(Assertion::new(
            "scheme-agreement",
            mean >= target,
            format!("mean agreement slope {mean:.4} over {agreement_samples} samples >= {target:.2}"),
        ));
        report["agreement"] = serde_json::to_value(&agreement).map_err(|e| Error::Inconsistent(e.to_string()))?;
    }
    let csv = emit_plotdata(&study);
    outcome(Kind::DavieRate, knobs, assertions, report, Some(csv))
}

fn gamma_bound(mut knobs: Knobs) -> Result<Outcome> {
    let p = *knobs.p.get_or_insert(2.5);
    // Smallest N with N > p - 1.
    let n = *knobs.depth.get_or_insert((p - 1.0).floor() as usize + 1);
    let b_grid = knobs
        .b_grid
        .get_or_insert_with(|| vec![std::f64::consts::E, 10.0, 1e3, 1e6])
        .clone();
    let rec = DavieRecursion::new(p, n, 0.0)?;
    let a = rec.a();
    let lambda_worst = (0..=30)
        .map(|k| (lambda_gamma(&rec, k, 0).0 / a.powi(k as i32) - 1.0).abs())
        .fold(0.0, f64::max);
    let report = gamma_limit_bound_check(&rec, &b_grid)?;
    let mut assertions = vec![
        Assertion::new("lambda-at-zero", lambda_worst <= 1e-13, format!("max relative gap to a^k {lambda_worst:.1e}, a = {a:.6}")),
        Assertion::new(
            "limit-bound",
            report.all_hold,
            format!(
                "ln Γ∞ - ln bound at largest b: {:.3}",
                report.rows.last().map_or(0.0, |r| r.log_gamma_limit - r.log_refined_bound)
            ),
        ),
        Assertion::new(
            "monotone-in-b",
            report.rows.windows(2).all(|w| w[0].b >= w[1].b || w[1].log_gamma_limit >= w[0].log_gamma_limit),
            "ln Γ∞ nondecreasing along the b grid",
        ),
    ];
    if let Some(c) = report.quadratic_coefficient {
        assertions.push(Assertion::new("quadratic-growth", c > 0.0 && c <= 1.6, format!("coefficient {c:.4} in (0, 1.6]")));
    }
    let large: Vec<_> = report.rows.iter().filter(|r| r.b >= 1e3).collect();
    if !large.is_empty() {
        assertions.push(Assertion::new(
            "refined-beats-naive",
            large.iter().all(|r| r.refined_beats_naive),
            format!("{} grid points with b >= 1e3", large.len()),
        ));
    }
    let csv = emit_plotdata(&report);
    outcome(Kind::GammaBound, knobs, assertions, &report, Some(csv))
}

fn azencott(mut knobs: Knobs) -> Result<Outcome> {
    let v = load_fields(knobs.fields.get_or_insert_with(|| "linear2d".into()))?;
    let y0 = initial_point(&mut knobs, &v);
    let mut cfg = AzencottConfig::new(
        *knobs.depth.get_or_insert(3),
        *knobs.p.get_or_insert(2.5),
        knobs.t_grid.get_or_insert_with(|| vec![1.0 / 64.0, 1.0 / 16.0]).clone(),
        knobs.r_grid.get_or_insert_with(|| vec![1.0, 2.0, 4.0, 8.0]).clone(),
        *knobs.samples.get_or_insert(10_000),
        knobs.seed.expect("seed resolved by the caller"),
        y0,
    );
    cfg.fine_level = *knobs.fine_level.get_or_insert(cfg.fine_level);
    cfg.tol = *knobs.tol.get_or_insert(cfg.tol);
    let report = azencott_tail_experiment(&v, &cfg)?;
    let b = &report.brownian;
    let assertions = vec![
        Assertion::new("monotone-in-R", b.monotone, "exceedance nonincreasing in R within confidence"),
        Assertion::new("collapse-across-t", b.collapse, format!("intervals overlap under t^{}", b.exponent)),
        Assertion::new(
            "tail-envelope",
            b.envelope_dominated,
            format!("largest R below the fitted exp(-R^{:.3}) envelope", 2.0 / (cfg.depth as f64 + 1.0)),
        ),
        Assertion::new(
            "confidence-width",
            b.max_halfwidth() <= 0.02,
            format!("max half-width {:.4} <= 0.02", b.max_halfwidth()),
        ),
    ];
    let csv = emit_plotdata(b);
    let hoelder_csv = emit_plotdata(&report.hoelder);
    let mut out = outcome(Kind::Azencott, knobs, assertions, &report, Some(csv))?;
    out.extra.push(("azencott_hoelder.csv".into(), hoelder_csv));
    Ok(out)
}

fn lq_conv(mut knobs: Knobs) -> Result<Outcome> {
    let v = load_fields(knobs.fields.get_or_insert_with(|| "linear2d".into()))?;
    let y0 = initial_point(&mut knobs, &v);
    let mut cfg = LqConfig::new(
        *knobs.p.get_or_insert(2.9),
        knobs.q_list.get_or_insert_with(|| vec![1.0, 2.0, 4.0]).clone(),
        knobs.n_list.get_or_insert_with(|| (3..=8).collect()).clone(),
        *knobs.samples.get_or_insert(1000),
        knobs.seed.expect("seed resolved by the caller"),
        y0,
    );
    cfg.fine_level = *knobs.fine_level.get_or_insert(cfg.fine_level);
    cfg.tol = *knobs.tol.get_or_insert(cfg.tol);
    let report = lq_convergence_experiment(&v, &cfg)?;
    let mut assertions: Vec<Assertion> = cfg
        .q_list
        .iter()
        .zip(&report.decreasing)
        .zip(&report.moments)
        .map(|((q, ok), m)| {
            Assertion::new(
                format!("decreasing-q{q}"),
                *ok,
                format!("E[Z^q]^(1/q) from {:.4} to {:.4}", m[0], m[m.len() - 2]),
            )
        })
        .collect();
    let ordered = (0..cfg.n_list.len()).all(|ni| {
        let mut by_q: Vec<(f64, f64)> = cfg.q_list.iter().zip(&report.moments).map(|(q, m)| (*q, m[ni])).collect();
        by_q.sort_by(|x, y| x.0.total_cmp(&y.0));
        by_q.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12))
    });
    assertions.push(Assertion::new("moment-order", ordered, "higher q curves lie above lower q curves"));
    assertions.push(match &report.tail {
        Some(t) => Assertion::new(
            "gauss-tail",
            t.passes,
            format!(
                "tail slope {:?}, moment growth {:?} over sup_n Hölder norms",
                t.log_tail_slope, t.moment_growth
            ),
        ),
        None => Assertion::new("gauss-tail", false, "tail probe refused (fewer than 1000 samples?)"),
    });
    let csv = emit_plotdata(&report);
    outcome(Kind::LqConv, knobs, assertions, &report, Some(csv))
}
