use rayon::prelude::*;
use serde::Serialize;

use super::{ebm_sample_indexed, DEFAULT_FINE_LEVEL, MAX_FINE_LEVEL};
use crate::error::{invalid, Error, Result};
use crate::euler_scheme::{euler_increment_with, iterated_table, IteratedTable, VectorFieldFamily};
use crate::path_signature::PiecewiseLinearPath;
use crate::rde_lab::{check_driver, distance, integrate_segment};
use crate::regression::linear_fit;
use crate::tensor_group::{AlgebraShape, GroupElement};

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval `(lower, upper)` at 95% for `k` successes in `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lower = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lower, upper)
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussTailReport {
    pub samples: usize,
    /// Set when every sample takes the same value.
    pub point_mass: Option<f64>,
    pub thresholds: Vec<f64>,
    pub exceedance: Vec<f64>,
    /// Slope of `ln P(M > m)` against `m^2`; an estimate of `-α`.
    pub log_tail_slope: Option<f64>,
    pub moment_orders: Vec<usize>,
    /// `E[M^q]^{1/q}` for each order.
    pub moments: Vec<f64>,
    /// Slope of `ln E[M^q]^{1/q}` against `ln q`.
    pub moment_growth: Option<f64>,
    pub passes: bool,
}

/// Largest admissible moment-growth exponent (`√q` growth plus slack).
pub const MOMENT_GROWTH_LIMIT: f64 = 0.6;
const MIN_TAIL_SAMPLES: usize = 1000;
const MIN_EXCEEDANCES: usize = 10;

pub fn gauss_tail_probe(samples: &[f64], q_max: usize) -> Result<GaussTailReport> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::RegressionRefused(format!(
            "{} samples is too few for a tail fit, need {MIN_TAIL_SAMPLES}",
            samples.len()
        )));
    }
    if q_max < 2 {
        return Err(invalid("moment growth needs q_max >= 2"));
    }
    if samples.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(invalid("tail samples must be finite and non-negative"));
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let orders: Vec<usize> = (1..=q_max).collect();
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Ok(GaussTailReport {
            samples: n,
            point_mass: Some(hi),
            thresholds: Vec::new(),
            exceedance: Vec::new(),
            log_tail_slope: None,
            moments: vec![hi; orders.len()],
            moment_orders: orders,
            moment_growth: Some(0.0),
            passes: true,
        });
    }

    // Order statistics at levels 1 - 2^{-j}, keeping at least MIN_EXCEEDANCES above.
    let mut thresholds: Vec<f64> = Vec::new();
    let mut exceedance = Vec::new();
    let mut j = 1;
    while n >> j >= MIN_EXCEEDANCES {
        let m = sorted[n - (n >> j) - 1];
        let above = n - sorted.partition_point(|x| *x <= m);
        if above >= MIN_EXCEEDANCES && thresholds.last() != Some(&m) {
            thresholds.push(m);
            exceedance.push(above as f64 / n as f64);
        }
        j += 1;
    }
    let log_tail_slope = if thresholds.len() >= 3 {
        let m2: Vec<f64> = thresholds.iter().map(|m| m * m).collect();
        let lp: Vec<f64> = exceedance.iter().map(|p| p.ln()).collect();
        Some(linear_fit(&m2, &lp)?.slope)
    } else {
        None
    };

    let moments: Vec<f64> = orders
        .iter()
        .map(|&q| (samples.iter().map(|m| m.powi(q as i32)).sum::<f64>() / n as f64).powf(1.0 / q as f64))
        .collect();
    let lq: Vec<f64> = orders.iter().map(|&q| (q as f64).ln()).collect();
    let lm: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let moment_growth = if moments.iter().all(|m| m.is_finite() && *m > 0.0) {
        Some(linear_fit(&lq, &lm)?.slope)
    } else {
        None
    };
    let passes = matches!(log_tail_slope, Some(s) if s < 0.0)
        && matches!(moment_growth, Some(g) if g <= MOMENT_GROWTH_LIMIT);
    Ok(GaussTailReport {
        samples: n,
        point_mass: None,
        thresholds,
        exceedance,
        log_tail_slope,
        moment_orders: orders,
        moments,
        moment_growth,
        passes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AzencottConfig {
    /// Euler depth `N`.
    pub depth: usize,
    pub p: f64,
    pub t_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Skeleton resolution; defaults to [`AzencottConfig::fine_level_for`].
    pub fine_level: usize,
    pub y0: Vec<f64>,
    pub tol: f64,
}

/// Fine cells spanned by the smallest `t`, as a power of two.
const MIN_CELLS_LOG2: usize = 10;

impl AzencottConfig {
    pub fn new(depth: usize, p: f64, t_grid: Vec<f64>, r_grid: Vec<f64>, samples: usize, seed: u64, y0: Vec<f64>) -> Self {
        Self {
            depth,
            p,
            fine_level: Self::fine_level_for(&t_grid),
            t_grid,
            r_grid,
            samples,
            seed,
            y0,
            tol: 1e-12,
        }
    }

    /// Smallest level, at least [`DEFAULT_FINE_LEVEL`], at which the smallest
    /// `t` spans `2^10` fine cells. Coarser meshes undersample the running sup
    /// on short windows and bias their exceedance down.
    pub fn fine_level_for(t_grid: &[f64]) -> usize {
        let t_min = t_grid.iter().copied().fold(1.0f64, f64::min);
        if !(t_min > 0.0) {
            return DEFAULT_FINE_LEVEL;
        }
        let level = MIN_CELLS_LOG2 as f64 - t_min.log2();
        DEFAULT_FINE_LEVEL.max(level.ceil() as usize).min(MAX_FINE_LEVEL)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0 && self.p < 3.0) {
            return Err(invalid(format!("tail experiments need p in (2, 3), got {}", self.p)));
        }
        let floor_p = self.p.floor() as usize;
        if self.depth < floor_p + 1 {
            return Err(invalid(format!("N = {} must be at least [p] + 1 = {}", self.depth, floor_p + 1)));
        }
        if self.samples == 0 {
            return Err(invalid("at least one sample is required"));
        }
        validate_grids(&self.t_grid, &self.r_grid)?;
        if !(self.tol > 0.0) {
            return Err(invalid("integrator tolerance must be positive"));
        }
        Ok(())
    }

    /// Fine steps covering each `t`.
    fn steps(&self) -> Result<Vec<usize>> {
        let scale = (1u64 << self.fine_level) as f64;
        self.t_grid
            .iter()
            .map(|&t| {
                let k = (t * scale).round();
                if k < 1.0 || (k - t * scale).abs() > 1e-9 {
                    Err(invalid(format!("t = {t} is not a multiple of the fine mesh 2^-{}", self.fine_level)))
                } else {
                    Ok(k as usize)
                }
            })
            .collect()
    }
}

fn validate_grids(t_grid: &[f64], r_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(invalid("t grid must be non-empty within (0, 1]"));
    }
    if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) || r_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("R grid must be positive and strictly increasing"));
    }
    Ok(())
}

/// Fit of `ln p = intercept - slope · R^a` on all but the largest `R`,
/// extrapolated to the largest `R`.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeCheck {
    pub a: f64,
    pub intercept: f64,
    pub slope: f64,
    pub predicted: f64,
    pub observed: f64,
    pub dominated: bool,
}

/// Exceedance frequencies `P(D_t > R t^exponent)` on a `t × R` grid.
#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub t_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub samples: usize,
    pub exponent: f64,
    pub counts: Vec<Vec<usize>>,
    pub probabilities: Vec<Vec<f64>>,
    pub ci_halfwidths: Vec<Vec<f64>>,
    /// Upper Wilson bounds; the only informative output when no sample exceeds.
    pub upper_bounds: Vec<Vec<f64>>,
    pub all_zero: bool,
    /// Nonincreasing in `R` for every `t`, within confidence.
    pub monotone: bool,
    /// Intervals overlap across `t` for every `R`.
    pub collapse: bool,
    pub envelope: Vec<Option<EnvelopeCheck>>,
    /// Every testable envelope check holds and at least one was testable.
    pub envelope_dominated: bool,
}

impl TailReport {
    /// `defects[i][j]` is the statistic of sample `i` at `t_grid[j]`.
    pub fn from_defects(
        defects: &[Vec<f64>],
        t_grid: &[f64],
        r_grid: &[f64],
        exponent: f64,
        envelope_a: f64,
    ) -> Result<Self> {
        validate_grids(t_grid, r_grid)?;
        if defects.is_empty() || defects.iter().any(|row| row.len() != t_grid.len()) {
            return Err(invalid("defect table does not match the t grid"));
        }
        let n = defects.len();
        let mut counts = vec![vec![0usize; r_grid.len()]; t_grid.len()];
        for (ti, &t) in t_grid.iter().enumerate() {
            let scale = t.powf(exponent);
            for (ri, &r) in r_grid.iter().enumerate() {
                counts[ti][ri] = defects.iter().filter(|row| row[ti] > r * scale).count();
            }
        }
        let probabilities: Vec<Vec<f64>> = counts
            .iter()
            .map(|row| row.iter().map(|&k| k as f64 / n as f64).collect())
            .collect();
        let intervals: Vec<Vec<(f64, f64)>> = counts
            .iter()
            .map(|row| row.iter().map(|&k| wilson_interval(k, n)).collect())
            .collect();
        let ci_halfwidths: Vec<Vec<f64>> = intervals
            .iter()
            .map(|row| row.iter().map(|(lo, hi)| (hi - lo) / 2.0).collect())
            .collect();
        let upper_bounds: Vec<Vec<f64>> = intervals.iter().map(|row| row.iter().map(|iv| iv.1).collect()).collect();

        let monotone = (0..t_grid.len()).all(|ti| {
            (1..r_grid.len()).all(|ri| {
                probabilities[ti][ri]
                    <= probabilities[ti][ri - 1] + ci_halfwidths[ti][ri] + ci_halfwidths[ti][ri - 1]
            })
        });
        let collapse = (0..r_grid.len()).all(|ri| {
            (0..t_grid.len()).all(|a| {
                (a + 1..t_grid.len()).all(|b| {
                    (probabilities[a][ri] - probabilities[b][ri]).abs() <= ci_halfwidths[a][ri] + ci_halfwidths[b][ri]
                })
            })
        });
        let envelope: Vec<Option<EnvelopeCheck>> = (0..t_grid.len())
            .map(|ti| envelope_check(r_grid, &probabilities[ti], &ci_halfwidths[ti], envelope_a))
            .collect();
        let envelope_dominated =
            envelope.iter().any(Option::is_some) && envelope.iter().flatten().all(|e| e.dominated);
        Ok(Self {
            t_grid: t_grid.to_vec(),
            r_grid: r_grid.to_vec(),
            samples: n,
            exponent,
            all_zero: counts.iter().flatten().all(|&k| k == 0),
            counts,
            probabilities,
            ci_halfwidths,
            upper_bounds,
            monotone,
            collapse,
            envelope,
            envelope_dominated,
        })
    }

    pub fn max_halfwidth(&self) -> f64 {
        self.ci_halfwidths.iter().flatten().copied().fold(0.0, f64::max)
    }
}

fn envelope_check(r_grid: &[f64], p: &[f64], hw: &[f64], a: f64) -> Option<EnvelopeCheck> {
    let last = r_grid.len() - 1;
    let (x, y): (Vec<f64>, Vec<f64>) = (0..last)
        .filter(|&i| p[i] > 0.0)
        .map(|i| (r_grid[i].powf(a), p[i].ln()))
        .unzip();
    if x.len() < 2 {
        return None;
    }
    let fit = linear_fit(&x, &y).ok()?;
    let predicted = fit.at(r_grid[last].powf(a)).exp();
    Some(EnvelopeCheck {
        a,
        intercept: fit.intercept,
        slope: -fit.slope,
        predicted,
        observed: p[last],
        dominated: p[last] <= predicted + hw[last],
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AzencottReport {
    pub config: AzencottConfig,
    /// Normalized by `t^{(N+1)/2}`.
    pub brownian: TailReport,
    /// Normalized by `t^{(N+1)/p}`.
    pub hoelder: TailReport,
}

/// `sup_{0 < s <= t} |y_{0,s} - I[y_0, N, S_N(x)_{0,s}]|` at each requested
/// number of fine steps, following one skeleton.
fn running_defects(
    v: &VectorFieldFamily,
    table: &IteratedTable,
    cfg: &AzencottConfig,
    skeleton: &PiecewiseLinearPath,
    steps: &[usize],
) -> Result<Vec<f64>> {
    let shape = AlgebraShape::new(skeleton.dim(), cfg.depth)?;
    let kmax = steps.iter().copied().max().unwrap_or(0);
    let mut g = GroupElement::identity(shape);
    let mut y = cfg.y0.clone();
    let mut sup: f64 = 0.0;
    let mut at_step = vec![0.0; kmax + 1];
    for k in 0..kmax {
        let inc = skeleton.increment(k);
        g.mul_segment(&inc);
        integrate_segment(v, &mut y, &inc, cfg.tol, skeleton.times()[k])?;
        let euler = euler_increment_with(table, cfg.depth, &g)?;
        let approx: Vec<f64> = cfg.y0.iter().zip(&euler.value).map(|(a, b)| a + b).collect();
        sup = sup.max(distance(&y, &approx));
        at_step[k + 1] = sup;
    }
    Ok(steps.iter().map(|&s| at_step[s]).collect())
}

/// Monte Carlo exceedance probabilities of the step-N Euler defect along EBM
/// under both time normalizations.
pub fn azencott_tail_experiment(v: &VectorFieldFamily, cfg: &AzencottConfig) -> Result<AzencottReport> {
    cfg.validate()?;
    check_driver(v, &cfg.y0, v.driver_dim())?;
    let steps = cfg.steps()?;
    let table = iterated_table(v, cfg.depth, &cfg.y0)?;
    let defects = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let sample = ebm_sample_indexed(v.driver_dim(), cfg.fine_level, cfg.p, cfg.seed, i)?;
            running_defects(v, &table, cfg, &sample.fine_skeleton, &steps)
        })
        .collect::<Result<Vec<_>>>()?;
    let n1 = cfg.depth as f64 + 1.0;
    let a = 2.0 / n1;
    Ok(AzencottReport {
        config: cfg.clone(),
        brownian: TailReport::from_defects(&defects, &cfg.t_grid, &cfg.r_grid, n1 / 2.0, a)?,
        hoelder: TailReport::from_defects(&defects, &cfg.t_grid, &cfg.r_grid, n1 / cfg.p, a)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 10_000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 5e-4);
    }

    #[test]
    fn point_mass_and_refusal() {
        let r = gauss_tail_probe(&[2.0; 1000], 4).unwrap();
        assert_eq!(r.point_mass, Some(2.0));
        assert!(r.passes);
        assert!(matches!(gauss_tail_probe(&[1.0; 999], 4), Err(Error::RegressionRefused(_))));
    }

    #[test]
    fn fine_level_resolves_the_smallest_t() {
        assert_eq!(AzencottConfig::fine_level_for(&[1.0 / 64.0, 1.0 / 16.0]), 16);
        assert_eq!(AzencottConfig::fine_level_for(&[0.5]), DEFAULT_FINE_LEVEL);
        assert_eq!(AzencottConfig::fine_level_for(&[1e-9]), MAX_FINE_LEVEL);
    }

    #[test]
    fn small_r_gives_certain_exceedance() {
        let defects: Vec<Vec<f64>> = (1..=100).map(|i| vec![i as f64 * 1e-3]).collect();
        let r = TailReport::from_defects(&defects, &[0.5], &[1e-9, 1.0], 2.0, 0.5).unwrap();
        assert_eq!(r.probabilities[0][0], 1.0);
        assert!(r.monotone);
    }
}
