//! End-to-end acceptance criteria 1 to 8. Runs without the libtest harness and
//! prints one PASS/FAIL line per criterion; the process fails if any does.

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use rplab::euler_scheme::{euler_increment, VectorFieldFamily};
use rplab::geodesic::{cc_norm_lower, cc_norm_upper, heisenberg_cc_norm, GeodesicFamilyConfig};
use rplab::rde_lab::{
    davie_rate_experiment, gamma_limit_bound_check, lambda_gamma, DavieConfig, DavieRecursion, WindowPlacement,
};
use rplab::stochastic_driver::{
    azencott_tail_experiment, ebm_rate_study, lq_convergence_experiment, AzencottConfig, LqConfig, DEFAULT_FINE_LEVEL,
};
use rplab::{
    path_signature, segment_signature, AlgebraShape, GroupElement, LieSeries, PiecewiseLinearPath, RoughPathGrid,
    TensorSeries,
};

const SEED: u64 = 20_240_601;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn relative_gap(a: &GroupElement, b: &GroupElement) -> f64 {
    let scale = a.series().coeffs().iter().chain(b.series().coeffs()).fold(1.0f64, |m, c| m.max(c.abs()));
    a.series().max_abs_diff(b.series()).unwrap() / scale
}

fn random_element(shape: AlgebraShape, rng: &mut ChaCha12Rng) -> GroupElement {
    let mut coeffs: Vec<f64> = (0..shape.len()).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    coeffs[0] = 0.0;
    LieSeries::dynkin_projection(&TensorSeries::from_flat(shape, coeffs).unwrap()).exp()
}

fn random_shape(rng: &mut ChaCha12Rng) -> AlgebraShape {
    AlgebraShape::new(rng.random_range(1..=3), rng.random_range(1..=4)).unwrap()
}

fn algebra_suite() -> Verdict {
    let mut rng = ChaCha12Rng::seed_from_u64(SEED);
    let (mut assoc, mut inverse, mut explog, mut dilation) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut not_group_like = 0;
    let cases = 10_000;
    for _ in 0..cases {
        let shape = random_shape(&mut rng);
        let (a, b, c) = (random_element(shape, &mut rng), random_element(shape, &mut rng), random_element(shape, &mut rng));
        let e = GroupElement::identity(shape);
        assoc = assoc.max(relative_gap(&a.multiply(&b).unwrap().multiply(&c).unwrap(), &a.multiply(&b.multiply(&c).unwrap()).unwrap()));
        inverse = inverse
            .max(relative_gap(&a.multiply(&a.inverse()).unwrap(), &e))
            .max(relative_gap(&a.inverse().multiply(&a).unwrap(), &e));
        explog = explog.max(relative_gap(&a.log().exp(), &a));
        let lambda = rng.random_range(0.1..4.0);
        dilation = dilation.max(relative_gap(
            &a.multiply(&b).unwrap().dilate(lambda),
            &a.dilate(lambda).multiply(&b.dilate(lambda)).unwrap(),
        ));
        if !a.multiply(&b).unwrap().is_group_like(1e-8) {
            not_group_like += 1;
        }
    }
    let worst = assoc.max(inverse).max(explog).max(dilation);
    Verdict::new(
        worst <= 1e-12 && not_group_like == 0,
        format!(
            "{cases} cases; associativity {assoc:.1e}, inverse {inverse:.1e}, exp/log {explog:.1e}, dilation {dilation:.1e} (<= 1e-12); {not_group_like} products fail group-likeness at 1e-8"
        ),
    )
}

fn chen_identity() -> Verdict {
    let mut rng = ChaCha12Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    let paths = 1000;
    for _ in 0..paths {
        let shape = random_shape(&mut rng);
        let d = shape.dim();
        let segments = rng.random_range(1..=12);
        let increments: Vec<Vec<f64>> = (0..segments)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) / (segments as f64).sqrt()).collect())
            .collect();
        let x = PiecewiseLinearPath::from_increments(&vec![0.0; d], &increments).unwrap();
        let mut cuts = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        cuts.sort_by(f64::total_cmp);
        let [s, t, u] = cuts;
        let direct = path_signature(&x, s, u, shape).unwrap();
        let chained = path_signature(&x, s, t, shape).unwrap().multiply(&path_signature(&x, t, u, shape).unwrap()).unwrap();
        worst = worst.max(relative_gap(&direct, &chained));
    }
    Verdict::new(worst <= 1e-12, format!("{paths} paths, worst defect {worst:.1e} (<= 1e-12)"))
}

fn heisenberg_sandwich() -> Verdict {
    let mut rng = ChaCha12Rng::seed_from_u64(SEED + 2);
    let shape = AlgebraShape::new(2, 2).unwrap();
    let cfg = GeodesicFamilyConfig::default();
    let mut violations = 0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let g = random_element(shape, &mut rng);
        let exact = heisenberg_cc_norm(&g).unwrap();
        let lower = cc_norm_lower(&g);
        let upper = cc_norm_upper(&g, &cfg).unwrap().upper;
        let slack = 1e-9 * exact.max(1.0);
        if !(lower <= exact + slack && exact <= upper + slack) {
            violations += 1;
        }
        worst_gap = worst_gap.max(upper / exact - 1.0);
    }
    let area = LieSeries::bracket_generators(shape, 0, 1).unwrap().exp();
    let fixture = cc_norm_upper(&area, &cfg).unwrap().upper;
    let dido = 2.0 * PI.sqrt();
    let fixture_gap = fixture / dido - 1.0;
    Verdict::new(
        violations == 0 && fixture_gap.abs() <= 0.02,
        format!(
            "100 elements, {violations} sandwich violations, worst upper gap {:.2}%; pure-area upper {fixture:.6} vs 2√π = {dido:.6} ({:+.3}%, within 2%)",
            100.0 * worst_gap,
            100.0 * fixture_gap
        ),
    )
}

fn euler_exponent() -> Verdict {
    let mut notes = Vec::new();
    let mut passed = true;
    for name in ["linear1d", "linear2d", "rotation2d", "polynomial_saturating"] {
        let v = VectorFieldFamily::builtin(name).unwrap();
        let mut y0 = vec![0.0; v.state_dim()];
        y0[0] = 1.0;
        let x = Arc::new(PiecewiseLinearPath::moment_curve(v.driver_dim(), DEFAULT_FINE_LEVEL).unwrap());
        let mut slopes = Vec::new();
        for n in 1..=3 {
            let shape = AlgebraShape::new(v.driver_dim(), n).unwrap();
            let grid = RoughPathGrid::from_skeleton(x.clone(), RoughPathGrid::uniform_times(1), shape, 1.0).unwrap();
            let cfg = DavieConfig {
                depth: n,
                p: 1.0,
                lengths: DavieConfig::smooth_lengths(),
                windows: WindowPlacement::Dyadic,
                tol: 1e-12,
            };
            let slope = davie_rate_experiment(&v, &grid, &y0, &cfg).unwrap().fitted_slope;
            passed &= slope >= n as f64 + 1.0 - 0.1;
            slopes.push(format!("{slope:.3}"));
        }
        notes.push(format!("{name} [{}]", slopes.join(", ")));
    }

    let v = VectorFieldFamily::builtin("linear1d").unwrap();
    let h: f64 = 0.1;
    let g = segment_signature(&[h], AlgebraShape::new(1, 2).unwrap()).unwrap();
    let defect = h.exp() - 1.0 - euler_increment(&v, 2, &g, &[1.0]).unwrap().value[0];
    let leading = h.powi(3) / 6.0;
    let ratio = defect / leading;
    passed &= (ratio - 1.0).abs() <= 0.05 && (defect - 1.70918e-4).abs() <= 1e-9;
    Verdict::new(
        passed,
        format!(
            "slopes for N = 1, 2, 3 (>= N + 0.9): {}; h = 0.1 defect {defect:.5e} = {ratio:.4} × h³/6",
            notes.join("; ")
        ),
    )
}

fn davie_rate() -> Verdict {
    let v = VectorFieldFamily::builtin("linear2d").unwrap();
    let y0 = [1.0, 0.0];
    let p = 2.5;
    let mut passed = true;
    let mut notes = Vec::new();
    for n in [2, 3] {
        let cfg = DavieConfig {
            depth: n,
            p,
            lengths: DavieConfig::dyadic_lengths(),
            windows: WindowPlacement::evenly(8),
            tol: 1e-12,
        };
        let study = ebm_rate_study(&v, &y0, &cfg, None, 50, SEED, DEFAULT_FINE_LEVEL).unwrap();
        let target = (n as f64 + 1.0) / 2.0 - 0.2;
        let agreement = ebm_rate_study(&v, &y0, &cfg, Some(&GeodesicFamilyConfig::default()), 8, SEED, DEFAULT_FINE_LEVEL)
            .unwrap()
            .mean_agreement_slope
            .unwrap();
        let agreement_target = cfg.theta() - 0.15;
        passed &= study.mean_slope >= target && agreement >= agreement_target;
        notes.push(format!(
            "N = {n}: mean slope {:.3} over 50 samples (>= {target:.2}), Euler/geodesic agreement {agreement:.3} over 8 samples (>= {agreement_target:.2})",
            study.mean_slope
        ));
    }
    Verdict::new(passed, notes.join("; "))
}

/// `ln` of `exp(e / (1 - 2^{-p})) / (1 - a) · e^{1.5 (ln b)^2}`.
fn log_limit_bound(a: f64, p: f64, b: f64) -> f64 {
    E / (1.0 - 2f64.powf(-p)) - (1.0 - a).ln() + 1.5 * b.ln().powi(2)
}

fn gamma_machinery() -> Verdict {
    let b_grid = [E, 10.0, 1e3, 1e6];
    let mut passed = true;
    let mut worst_margin = f64::INFINITY;
    let mut worst_oracle: f64 = 0.0;
    let mut max_quadratic = f64::NEG_INFINITY;
    for p in [2.1, 2.5, 3.0] {
        let n_min = (p - 1.0f64).floor() as usize + 1;
        for n in [n_min, n_min + 1] {
            let rec = DavieRecursion::new(p, n, 0.0).unwrap();
            let a = rec.a();
            for k in 0..=40 {
                let power = (0..k).fold(1.0, |acc, _| acc * a);
                passed &= lambda_gamma(&rec, k, 0).0 == power;
                passed &= (power / a.powi(k as i32) - 1.0).abs() <= 1e-14;
            }
            let report = gamma_limit_bound_check(&rec, &b_grid).unwrap();
            for row in &report.rows {
                let bound = log_limit_bound(a, p, row.b);
                worst_margin = worst_margin.min(bound - row.log_gamma_limit);
                passed &= row.log_gamma_limit <= bound;
                // Direct summation of Γ(n, b) in linear space.
                let direct = lambda_gamma(&rec.with_b(row.b).unwrap(), 0, 4000).1.ln();
                worst_oracle = worst_oracle.max((direct - row.log_gamma_limit).abs());
            }
            let c = report.quadratic_coefficient.unwrap();
            max_quadratic = max_quadratic.max(c);
            passed &= c <= 1.6;
        }
    }
    passed &= worst_oracle <= 1e-9;
    Verdict::new(
        passed,
        format!(
            "Λ(k, 0) = a^k for k <= 40; smallest ln-margin to the bound {worst_margin:.3}; direct-sum oracle gap {worst_oracle:.1e}; largest quadratic coefficient {max_quadratic:.4} (<= 1.6)"
        ),
    )
}

fn azencott_tails() -> Verdict {
    let v = VectorFieldFamily::builtin("linear2d").unwrap();
    let cfg = AzencottConfig::new(3, 2.5, vec![1.0 / 64.0, 1.0 / 16.0], vec![1.0, 2.0, 4.0, 8.0], 10_000, SEED, vec![1.0, 0.0]);
    let report = azencott_tail_experiment(&v, &cfg).unwrap();
    let b = &report.brownian;
    let probabilities: Vec<String> = b
        .probabilities
        .iter()
        .map(|row| row.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(" "))
        .collect();
    Verdict::new(
        b.monotone && b.collapse && b.envelope_dominated,
        format!(
            "10^4 samples, skeleton level {}, t^{} normalization: monotone {}, collapse {}, envelope dominated {}; p̂ rows [{}]",
            cfg.fine_level,
            b.exponent,
            b.monotone,
            b.collapse,
            b.envelope_dominated,
            probabilities.join(" | ")
        ),
    )
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn lq_convergence() -> Verdict {
    let v = VectorFieldFamily::builtin("linear2d").unwrap();
    let cfg = LqConfig::new(2.9, vec![1.0, 2.0, 4.0], (3..=8).collect(), 1000, SEED, vec![1.0, 0.0]);
    let report = lq_convergence_experiment(&v, &cfg).unwrap();
    let decreasing = report.decreasing.iter().all(|d| *d);
    let tail = report.tail.as_ref().is_some_and(|t| t.passes);
    let curves: Vec<String> = cfg
        .q_list
        .iter()
        .zip(&report.moments)
        .map(|(q, m)| format!("q = {q}: {:.4} → {:.4}", m[0], m[m.len() - 2]))
        .collect();
    Verdict::new(
        decreasing && tail,
        format!(
            "decreasing within one width {decreasing} ({}); Gauss tail on sup_n Hölder norms {tail} (slope {}, growth {})",
            curves.join(", "),
            fmt_opt(report.tail.as_ref().and_then(|t| t.log_tail_slope)),
            fmt_opt(report.tail.as_ref().and_then(|t| t.moment_growth))
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Verdict); 8] = [
        ("algebra suite", 30, algebra_suite),
        ("Chen identity", 10, chen_identity),
        ("Heisenberg CC sandwich", 120, heisenberg_sandwich),
        ("Euler exponent", 60, euler_exponent),
        ("Davie rate on EBM", 600, davie_rate),
        ("Λ/Γ machinery", 5, gamma_machinery),
        ("tail probabilities", 900, azencott_tails),
        ("L^q convergence", 600, lq_convergence),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let verdict = check();
        let elapsed = clock.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let passed = verdict.passed && in_time;
        failures += usize::from(!passed);
        println!(
            "criterion {} {name}: {} | {} [{:.1} s, budget {budget} s]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            verdict.detail,
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        println!("acceptance: 8/8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 8 criteria fail");
        ExitCode::FAILURE
    }
}
