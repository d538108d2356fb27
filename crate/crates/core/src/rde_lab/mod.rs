//! Reference ODE solves, step-N Euler and geodesic schemes, Davie-rate
//! regressions and the constant-growth recursion.

mod davie;
mod ode;

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

pub(crate) use ode::integrate_segment;
pub use davie::{gamma_limit_bound_check, lambda_gamma, BoundCheckReport, BoundCheckRow, DavieRecursion};

use crate::error::{invalid, Error, Result};
use crate::euler_scheme::{euler_increment, VectorFieldFamily};
use crate::geodesic::{cc_norm_upper, geodesic_family, GeodesicFamilyConfig};
use crate::path_signature::{path_signature, PiecewiseLinearPath, RoughPathGrid};
use crate::regression::{linear_fit, polynomial_fit};
use crate::tensor_group::AlgebraShape;

/// Defects below this are treated as round-off and left out of fits.
pub const ROUND_OFF_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Reference,
    Euler(usize),
    Geodesic(usize),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Reference => f.write_str("reference"),
            Scheme::Euler(n) => write!(f, "euler-{n}"),
            Scheme::Geodesic(n) => write!(f, "geodesic-{n}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub scheme: Scheme,
    /// Non-fatal diagnostics such as over-budget geodesic cells.
    pub warnings: Vec<String>,
    /// Largest state difference against a re-run at a tenth of the tolerance.
    pub error_estimate: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories are non-empty")
    }

    /// Largest Euclidean state difference at shared times.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times != other.times {
            return Err(invalid("trajectories live on different time grids"));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| distance(a, b))
            .fold(0.0, f64::max))
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn check_driver(v: &VectorFieldFamily, y0: &[f64], dim: usize) -> Result<()> {
    if y0.len() != v.state_dim() {
        return Err(invalid(format!("y0 has length {}, expected e = {}", y0.len(), v.state_dim())));
    }
    if dim != v.driver_dim() {
        return Err(invalid(format!("driver dimension {dim} does not match d = {}", v.driver_dim())));
    }
    Ok(())
}

/// Solution of `dy = V(y) dx` from `y` at time `s` to time `t` along `x`.
pub fn flow(v: &VectorFieldFamily, y: &[f64], x: &PiecewiseLinearPath, s: f64, t: f64, tol: f64) -> Result<Vec<f64>> {
    check_driver(v, y, x.dim())?;
    if !(s <= t) {
        return Err(invalid(format!("flow interval [{s}, {t}] is reversed")));
    }
    let mut state = y.to_vec();
    let times = x.times();
    let mut prev_t = s;
    let mut prev = x.value_at(s);
    let first = times.partition_point(|&u| u <= s);
    for (i, &u) in times.iter().enumerate().skip(first) {
        if u >= t {
            break;
        }
        let point = x.point(i);
        let delta: Vec<f64> = point.iter().zip(&prev).map(|(a, b)| a - b).collect();
        ode::integrate_segment(v, &mut state, &delta, tol, prev_t)?;
        prev_t = u;
        prev = point.to_vec();
    }
    let end = x.value_at(t);
    let delta: Vec<f64> = end.iter().zip(&prev).map(|(a, b)| a - b).collect();
    ode::integrate_segment(v, &mut state, &delta, tol, prev_t)?;
    Ok(state)
}

/// Flow through every segment of `x`, recording the state at each breakpoint.
fn solve_breakpoints(v: &VectorFieldFamily, y0: &[f64], x: &PiecewiseLinearPath, tol: f64) -> Result<Vec<Vec<f64>>> {
    let mut states = Vec::with_capacity(x.breakpoint_count());
    let mut y = y0.to_vec();
    states.push(y.clone());
    for i in 0..x.segment_count() {
        ode::integrate_segment(v, &mut y, &x.increment(i), tol, x.times()[i])?;
        states.push(y.clone());
    }
    Ok(states)
}

/// Adaptive Dormand–Prince solution at the breakpoints of `x`, with an error
/// estimate from a second run at `tol / 10`.
pub fn ode_solve_reference(v: &VectorFieldFamily, y0: &[f64], x: &PiecewiseLinearPath, tol: f64) -> Result<Trajectory> {
    check_driver(v, y0, x.dim())?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let states = solve_breakpoints(v, y0, x, tol)?;
    let check = solve_breakpoints(v, y0, x, tol / 10.0)?;
    let error = states
        .iter()
        .zip(&check)
        .map(|(a, b)| distance(a, b))
        .fold(0.0, f64::max);
    Ok(Trajectory {
        times: x.times().to_vec(),
        states,
        scheme: Scheme::Reference,
        warnings: Vec::new(),
        error_estimate: Some(error),
    })
}

/// Global schemes on genuinely rough grids (`p >= 2`) need `N >= [p] + 1`.
fn check_global_depth(n: usize, p: f64) -> Result<()> {
    if p >= 2.0 && n < p.floor() as usize + 1 {
        return Err(invalid(format!("N = {n} must be at least [p] + 1 = {} for p = {p}", p.floor() as usize + 1)));
    }
    Ok(())
}

/// Grid with increments of depth exactly `n`, lifting from the skeleton if needed.
fn grid_at_depth(x: &RoughPathGrid, n: usize) -> Result<RoughPathGrid> {
    let depth = x.shape().depth();
    if depth == n {
        Ok(x.clone())
    } else if depth > n {
        x.project(n)
    } else {
        x.lift(n)
    }
}

/// `y_{k+1} = y_k + I[y_k, N, x_{t_k, t_{k+1}}]` on the grid.
pub fn euler_scheme_solve(v: &VectorFieldFamily, n: usize, x: &RoughPathGrid, y0: &[f64]) -> Result<Trajectory> {
    check_driver(v, y0, x.shape().dim())?;
    check_global_depth(n, x.p())?;
    let grid = grid_at_depth(x, n)?;
    let mut states = Vec::with_capacity(grid.times().len());
    let mut y = y0.to_vec();
    states.push(y.clone());
    for g in grid.increments() {
        let inc = euler_increment(v, n, g, &y)?;
        for (s, d) in y.iter_mut().zip(&inc.value) {
            *s += d;
        }
        states.push(y.clone());
    }
    Ok(Trajectory {
        times: grid.times().to_vec(),
        states,
        scheme: Scheme::Euler(n),
        warnings: Vec::new(),
        error_estimate: None,
    })
}

/// Integrator tolerance used along geodesic cell paths.
pub const GEODESIC_ODE_TOL: f64 = 1e-12;

/// ODE solve along the per-cell paths of [`geodesic_family`].
pub fn geodesic_scheme_solve(
    v: &VectorFieldFamily,
    n: usize,
    x: &RoughPathGrid,
    cfg: &GeodesicFamilyConfig,
    y0: &[f64],
) -> Result<Trajectory> {
    check_driver(v, y0, x.shape().dim())?;
    check_global_depth(n, x.p())?;
    let grid = grid_at_depth(x, n)?;
    let cells = geodesic_family(&grid, cfg)?;
    let mut states = Vec::with_capacity(grid.times().len());
    let mut warnings = Vec::new();
    let mut y = y0.to_vec();
    states.push(y.clone());
    for cell in &cells {
        if cell.flagged {
            warnings.push(format!(
                "cell {} over budget: length {:.6e} > {:.6e}",
                cell.cell, cell.length, cell.budget
            ));
        }
        let path = &cell.path;
        y = flow(v, &y, path, path.start_time(), path.end_time(), GEODESIC_ODE_TOL)?;
        states.push(y.clone());
    }
    Ok(Trajectory {
        times: grid.times().to_vec(),
        states,
        scheme: Scheme::Geodesic(n),
        warnings,
        error_estimate: None,
    })
}

/// Where the windows `[s, s + ℓ]` of a rate experiment start.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum WindowPlacement {
    /// `s = kℓ`, tiling `[0, 1]`.
    Dyadic,
    /// The listed starts that fit, the same set at every length.
    Starts(Vec<f64>),
}

impl WindowPlacement {
    /// Starts `k / count` for `k = 0..count`.
    pub fn evenly(count: usize) -> Self {
        WindowPlacement::Starts((0..count).map(|k| k as f64 / count as f64).collect())
    }

    pub fn starts(&self, length: f64) -> Vec<f64> {
        match self {
            WindowPlacement::Dyadic => {
                let count = (1.0 / length).round() as usize;
                (0..count).map(|k| k as f64 * length).collect()
            }
            WindowPlacement::Starts(list) => list.iter().copied().filter(|s| s + length <= 1.0 + 1e-12).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DavieConfig {
    /// Euler depth `N`.
    pub depth: usize,
    pub p: f64,
    pub lengths: Vec<f64>,
    pub windows: WindowPlacement,
    /// Local tolerance of the reference integrator.
    pub tol: f64,
}

impl DavieConfig {
    /// Lengths `2^{-2}, ..., 2^{-7}`.
    pub fn dyadic_lengths() -> Vec<f64> {
        (2..=7).map(|j| 0.5f64.powi(j)).collect()
    }

    /// Lengths `2^{-5}, ..., 2^{-9}` for smooth drivers, whose long windows
    /// are still pre-asymptotic.
    pub fn smooth_lengths() -> Vec<f64> {
        (5..=9).map(|j| 0.5f64.powi(j)).collect()
    }

    pub fn theta(&self) -> f64 {
        (self.depth as f64 + 1.0) / self.p
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(invalid("Euler depth N must be >= 1"));
        }
        if !(self.p >= 1.0) {
            return Err(invalid(format!("p must be >= 1, got {}", self.p)));
        }
        if !(self.theta() > 1.0) {
            return Err(invalid(format!("N = {} must exceed p - 1 = {}", self.depth, self.p - 1.0)));
        }
        if self.lengths.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
            return Err(invalid("window lengths must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("integrator tolerance must be positive"));
        }
        Ok(())
    }
}

/// Per-length sup defects with a log-log fit.
#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub interval_lengths: Vec<f64>,
    pub errors: Vec<f64>,
    /// Whether each length entered the fit (defect above the round-off floor).
    pub used: Vec<bool>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    pub theta_target: f64,
    /// `max errors / ℓ^θ`.
    pub empirical_constant: f64,
    /// Running sup of `error / ℓ^θ` from the smallest length upwards.
    pub rho: Vec<f64>,
}

impl RateReport {
    pub fn from_errors(lengths: Vec<f64>, errors: Vec<f64>, theta: f64) -> Result<Self> {
        if lengths.len() != errors.len() {
            return Err(invalid("lengths and errors differ in size"));
        }
        if errors.iter().all(|e| *e == 0.0) {
            return Err(Error::RegressionRefused("all-zero errors".into()));
        }
        let used: Vec<bool> = errors.iter().map(|e| *e >= ROUND_OFF_FLOOR).collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = lengths
            .iter()
            .zip(&errors)
            .zip(&used)
            .filter(|(_, u)| **u)
            .map(|((l, e), _)| (l.ln(), e.ln()))
            .unzip();
        if lx.len() < 3 {
            return Err(Error::RegressionRefused(format!(
                "only {} lengths above the round-off floor, need 3",
                lx.len()
            )));
        }
        let fit = linear_fit(&lx, &ly)?;
        let ratios: Vec<f64> = lengths.iter().zip(&errors).map(|(l, e)| e / l.powf(theta)).collect();
        let mut order: Vec<usize> = (0..lengths.len()).collect();
        order.sort_by(|&a, &b| lengths[a].total_cmp(&lengths[b]));
        let mut rho = vec![0.0; lengths.len()];
        let mut running: f64 = 0.0;
        for &i in &order {
            running = running.max(ratios[i]);
            rho[i] = running;
        }
        Ok(Self {
            empirical_constant: ratios.iter().copied().fold(0.0, f64::max),
            interval_lengths: lengths,
            errors,
            used,
            fitted_slope: fit.slope,
            fitted_intercept: fit.intercept,
            theta_target: theta,
            rho,
        })
    }
}

/// Reference states at the requested (sorted, distinct) times.
pub(crate) fn states_at(v: &VectorFieldFamily, y0: &[f64], x: &PiecewiseLinearPath, times: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0.to_vec();
    let mut t_prev = x.start_time();
    for &t in times {
        y = flow(v, &y, x, t_prev, t, tol)?;
        out.push(y.clone());
        t_prev = t;
    }
    Ok(out)
}

struct Window {
    length_index: usize,
    start: f64,
    state: Vec<f64>,
}

fn windows(
    v: &VectorFieldFamily,
    y0: &[f64],
    skeleton: &PiecewiseLinearPath,
    cfg: &DavieConfig,
) -> Result<Vec<Window>> {
    let mut starts: Vec<f64> = cfg.lengths.iter().flat_map(|&l| cfg.windows.starts(l)).collect();
    starts.sort_by(f64::total_cmp);
    starts.dedup();
    let states = states_at(v, y0, skeleton, &starts, cfg.tol)?;
    let mut out = Vec::new();
    for (li, &l) in cfg.lengths.iter().enumerate() {
        for s in cfg.windows.starts(l) {
            let idx = starts.partition_point(|&u| u < s);
            out.push(Window {
                length_index: li,
                start: s,
                state: states[idx].clone(),
            });
        }
    }
    Ok(out)
}

fn skeleton_of(x: &RoughPathGrid) -> Result<&PiecewiseLinearPath> {
    x.skeleton()
        .map(|s| s.as_ref())
        .ok_or_else(|| Error::Unsupported("rate experiments need a skeleton-backed driver".into()))
}

fn sup_per_length(cfg: &DavieConfig, defects: &[(usize, f64)]) -> Vec<f64> {
    let mut errors = vec![0.0f64; cfg.lengths.len()];
    for &(li, e) in defects {
        errors[li] = errors[li].max(e);
    }
    errors
}

/// `sup_s |y_{s,s+ℓ} − I[y_s, N, x_{s,s+ℓ}]|` per length, with the log-log fit.
pub fn davie_rate_experiment(v: &VectorFieldFamily, x: &RoughPathGrid, y0: &[f64], cfg: &DavieConfig) -> Result<RateReport> {
    cfg.validate()?;
    let skeleton = skeleton_of(x)?;
    check_driver(v, y0, skeleton.dim())?;
    let shape = AlgebraShape::new(skeleton.dim(), cfg.depth)?;
    let table = windows(v, y0, skeleton, cfg)?;
    let defects = table
        .par_iter()
        .map(|w| {
            let t = w.start + cfg.lengths[w.length_index];
            let g = path_signature(skeleton, w.start, t, shape)?;
            let euler = euler_increment(v, cfg.depth, &g, &w.state)?;
            let exact = flow(v, &w.state, skeleton, w.start, t, cfg.tol)?;
            let defect = exact
                .iter()
                .zip(&w.state)
                .zip(&euler.value)
                .map(|((y, y0), i)| (y - y0 - i).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok((w.length_index, defect))
        })
        .collect::<Result<Vec<_>>>()?;
    RateReport::from_errors(cfg.lengths.clone(), sup_per_length(cfg, &defects), cfg.theta())
}

/// One-step comparison of the Euler increment with the solution along a
/// short path carrying the same step-N signature, from the reference state
/// at each window start. Both approximate `y_{s,t}` to order `ℓ^θ`.
pub fn scheme_agreement_experiment(
    v: &VectorFieldFamily,
    x: &RoughPathGrid,
    y0: &[f64],
    cfg: &DavieConfig,
    geo: &GeodesicFamilyConfig,
) -> Result<RateReport> {
    cfg.validate()?;
    geo.validate()?;
    let skeleton = skeleton_of(x)?;
    check_driver(v, y0, skeleton.dim())?;
    let shape = AlgebraShape::new(skeleton.dim(), cfg.depth)?;
    let table = windows(v, y0, skeleton, cfg)?;
    let defects = table
        .par_iter()
        .map(|w| {
            let t = w.start + cfg.lengths[w.length_index];
            let g = path_signature(skeleton, w.start, t, shape)?;
            let euler = euler_increment(v, cfg.depth, &g, &w.state)?;
            let bounds = cc_norm_upper(&g, geo)?;
            let end = if bounds.path.segment_count() == 0 {
                w.state.clone()
            } else {
                flow(v, &w.state, &bounds.path, 0.0, 1.0, GEODESIC_ODE_TOL)?
            };
            let defect = end
                .iter()
                .zip(&w.state)
                .zip(&euler.value)
                .map(|((y, y0), i)| (y - y0 - i).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok((w.length_index, defect))
        })
        .collect::<Result<Vec<_>>>()?;
    RateReport::from_errors(cfg.lengths.clone(), sup_per_length(cfg, &defects), cfg.theta())
}

/// Empirical Davie constant under driver dilation.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub lambdas: Vec<f64>,
    /// `M = λ · |||x|||_{1/p}` of the base grid.
    pub hoelder_norms: Vec<f64>,
    pub constants: Vec<f64>,
    /// Least-squares slope of `ln C` against `(ln M)^2`.
    pub quadratic_coefficient: Option<f64>,
    /// Coefficients `c_0..c_3` of a cubic fit of `ln C` in `ln M`.
    pub cubic_fit: Option<Vec<f64>>,
    pub monotone: bool,
    pub at_most_quadratic: bool,
}

/// Measures `C(λM) = sup error / ℓ^θ` for the dilated drivers `δ_λ x`.
pub fn constant_growth_probe(
    v: &VectorFieldFamily,
    x: &RoughPathGrid,
    y0: &[f64],
    cfg: &DavieConfig,
    lambdas: &[f64],
) -> Result<GrowthReport> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 1.0)) {
        return Err(invalid("driver scales must be >= 1"));
    }
    let base_norm = x.hoelder_norm();
    let mut constants = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let scaled = x.dilate(lambda)?;
        let c = match davie_rate_experiment(v, &scaled, y0, cfg) {
            Ok(report) => report.empirical_constant,
            Err(Error::RegressionRefused(_)) => 0.0,
            Err(e) => return Err(e),
        };
        constants.push(c);
    }
    let norms: Vec<f64> = lambdas.iter().map(|l| l * base_norm).collect();
    let monotone = constants.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
    if constants.iter().all(|c| *c == 0.0) {
        return Ok(GrowthReport {
            lambdas: lambdas.to_vec(),
            hoelder_norms: norms,
            constants,
            quadratic_coefficient: None,
            cubic_fit: None,
            monotone: true,
            at_most_quadratic: true,
        });
    }
    if constants.iter().any(|c| *c <= 0.0) || norms.iter().any(|m| *m <= 0.0) {
        return Err(Error::RegressionRefused("zero constant at some scale".into()));
    }
    let ln_m: Vec<f64> = norms.iter().map(|m| m.ln()).collect();
    let ln_c: Vec<f64> = constants.iter().map(|c| c.ln()).collect();
    let sq: Vec<f64> = ln_m.iter().map(|l| l * l).collect();
    let quadratic = linear_fit(&sq, &ln_c).ok().map(|f| f.slope);
    let cubic = polynomial_fit(&ln_m, &ln_c, 3).ok();
    let at_most_quadratic = match &cubic {
        Some(c) => c[3] <= 0.05 * c[2].abs(),
        None => false,
    };
    Ok(GrowthReport {
        lambdas: lambdas.to_vec(),
        hoelder_norms: norms,
        constants,
        quadratic_coefficient: quadratic,
        cubic_fit: cubic,
        monotone,
        at_most_quadratic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn line(v: &[f64], segments: usize) -> PiecewiseLinearPath {
        let step: Vec<f64> = v.iter().map(|c| c / segments as f64).collect();
        PiecewiseLinearPath::from_increments(&vec![0.0; v.len()], &vec![step; segments]).unwrap()
    }

    #[test]
    fn reference_exponential() {
        let v = VectorFieldFamily::builtin("linear1d").unwrap();
        let traj = ode_solve_reference(&v, &[1.0], &line(&[1.0], 4), 1e-12).unwrap();
        assert!((traj.final_state()[0] - 1f64.exp()).abs() < 1e-10);
        assert!(traj.error_estimate.unwrap() < 1e-10);
    }

    #[test]
    fn flow_splits_segments() {
        let v = VectorFieldFamily::builtin("linear1d").unwrap();
        let x = line(&[1.0], 3);
        let y = flow(&v, &[1.0], &x, 0.1, 0.85, 1e-12).unwrap();
        assert!((y[0] - 0.75f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn euler_one_step_defect() {
        let v = VectorFieldFamily::builtin("linear1d").unwrap();
        let x = Arc::new(line(&[0.1], 1));
        let grid = RoughPathGrid::from_skeleton(x, vec![0.0, 1.0], AlgebraShape::new(1, 2).unwrap(), 1.0).unwrap();
        let traj = euler_scheme_solve(&v, 2, &grid, &[1.0]).unwrap();
        let defect = 0.1f64.exp() - traj.final_state()[0];
        assert!((defect - 1.70918e-4).abs() < 1e-9, "{defect}");
    }

    #[test]
    fn constant_fields_are_exact() {
        let v = VectorFieldFamily::builtin("constant2d").unwrap();
        let x = Arc::new(PiecewiseLinearPath::from_increments(&[0.0, 0.0], &[vec![0.3, -0.1], vec![0.2, 0.4]]).unwrap());
        let grid = RoughPathGrid::from_skeleton(x.clone(), vec![0.0, 0.5, 1.0], AlgebraShape::new(2, 2).unwrap(), 1.5).unwrap();
        let euler = euler_scheme_solve(&v, 2, &grid, &[1.0, 1.0]).unwrap();
        let reference = ode_solve_reference(&v, &[1.0, 1.0], &x, 1e-12).unwrap();
        assert!(euler.sup_distance(&reference).unwrap() < 1e-14);
    }

    #[test]
    fn rough_grids_need_deep_schemes() {
        let v = VectorFieldFamily::builtin("constant2d").unwrap();
        let x = Arc::new(line(&[0.3, 0.1], 4));
        let grid = RoughPathGrid::from_skeleton(x, RoughPathGrid::uniform_times(4), AlgebraShape::new(2, 2).unwrap(), 2.5).unwrap();
        assert!(euler_scheme_solve(&v, 2, &grid, &[0.0, 0.0]).is_err());
        assert!(euler_scheme_solve(&v, 3, &grid, &[0.0, 0.0]).is_ok());
    }

    #[test]
    fn windows_cover_unit_interval() {
        assert_eq!(WindowPlacement::Dyadic.starts(0.25), vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(WindowPlacement::evenly(4).starts(0.5), vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn zero_driver_is_refused() {
        let v = VectorFieldFamily::builtin("linear2d").unwrap();
        let x = Arc::new(PiecewiseLinearPath::from_increments(&[0.0, 0.0], &vec![vec![0.0, 0.0]; 128]).unwrap());
        let grid = RoughPathGrid::from_skeleton(x, RoughPathGrid::uniform_times(4), AlgebraShape::new(2, 2).unwrap(), 1.0).unwrap();
        let cfg = DavieConfig {
            depth: 2,
            p: 1.0,
            lengths: DavieConfig::dyadic_lengths(),
            windows: WindowPlacement::Dyadic,
            tol: 1e-12,
        };
        match davie_rate_experiment(&v, &grid, &[1.0, 0.0], &cfg) {
            Err(Error::RegressionRefused(msg)) => assert!(msg.contains("all-zero")),
            other => panic!("{other:?}"),
        }
    }
}
