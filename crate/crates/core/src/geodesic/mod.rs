//! Paths with prescribed signature and two-sided bounds on the
//! Carnot–Carathéodory norm `‖g‖` (the infimal length of such paths).
//!
//! The lower bound uses `|g^k| <= L^k / k!` for a path of length `L`. The upper
//! bound is the length of an explicit feasible path obtained by penalized
//! length minimization seeded with [`chow_decompose`]. On the Heisenberg group
//! the exact value is available through [`heisenberg_cc_norm`].

mod chow;
mod heisenberg;
mod optimizer;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chow::{chow_decompose, chow_segments, CHOW_TOLERANCE};
pub use heisenberg::{heisenberg_cc_norm, heisenberg_coordinates};

use crate::error::{invalid, Error, Result};
use crate::path_signature::{PiecewiseLinearPath, RoughPathGrid};
use crate::tensor_group::GroupElement;
use optimizer::{LengthProblem, PenaltySchedule};

/// Knobs for the length minimizer and the per-cell length budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicFamilyConfig {
    /// Budget multiplier `K >= 1` in `∫|dx^{s,t}| <= K M (t - s)^{1/p}`.
    pub k_budget: f64,
    /// Number of segments `m` of the optimized paths.
    pub segments: usize,
    /// Per-coefficient signature matching tolerance.
    pub tol: f64,
}

impl Default for GeodesicFamilyConfig {
    fn default() -> Self {
        Self {
            k_budget: 3.0,
            segments: 32,
            tol: 1e-8,
        }
    }
}

impl GeodesicFamilyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_budget >= 1.0) {
            return Err(invalid(format!("K must be >= 1, got {}", self.k_budget)));
        }
        if self.segments == 0 {
            return Err(invalid("segment count m must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("signature tolerance must be positive"));
        }
        Ok(())
    }
}

/// Certified interval `[lower, upper]` for `‖g‖` with the witness path.
#[derive(Clone, Debug)]
pub struct CCBounds {
    pub lower: f64,
    pub upper: f64,
    /// Witness on `[0, 1]` whose length is `upper`.
    pub path: PiecewiseLinearPath,
    pub segments: usize,
    /// Largest coefficient error of the witness signature.
    pub violation: f64,
}

#[derive(Serialize)]
struct CCBoundsRepr<'a> {
    lower: f64,
    upper: f64,
    m: usize,
    path: &'a str,
}

impl CCBounds {
    /// JSON summary; `path_ref` names the CSV file holding the witness.
    pub fn to_json(&self, path_ref: &str) -> String {
        serde_json::to_string(&CCBoundsRepr {
            lower: self.lower,
            upper: self.upper,
            m: self.segments,
            path: path_ref,
        })
        .expect("bounds serialize")
    }
}

/// `max_k (k! |g^k|)^{1/k}`.
pub fn cc_norm_lower(g: &GroupElement) -> f64 {
    let mut factorial = 1.0;
    let mut best: f64 = 0.0;
    for k in 1..=g.shape().depth() {
        factorial *= k as f64;
        best = best.max((factorial * g.series().level_norm(k)).powf(1.0 / k as f64));
    }
    best
}

/// Upper bound on `‖g‖` from an optimized `m`-segment path.
pub fn cc_norm_upper(g: &GroupElement, cfg: &GeodesicFamilyConfig) -> Result<CCBounds> {
    cfg.validate()?;
    let lower = cc_norm_lower(g);
    let d = g.shape().dim();
    if g.is_identity() {
        return Ok(CCBounds {
            lower: 0.0,
            upper: 0.0,
            path: PiecewiseLinearPath::from_increments(&vec![0.0; d], &[])?,
            segments: 0,
            violation: 0.0,
        });
    }
    if !g.is_group_like(1e-8) {
        return Err(invalid("CC norm bounds need a group-like element"));
    }

    // Work at unit scale; the CC norm is homogeneous under dilation.
    let scale = lower;
    let unit = g.dilate(1.0 / scale);
    let seed = chow_segments(&unit)?;
    if seed.len() > cfg.segments {
        return Err(invalid(format!(
            "m = {} is smaller than the {} segments of the Chow seed",
            cfg.segments,
            seed.len()
        )));
    }

    let problem = LengthProblem::new(&unit);
    let unit_segments: Vec<Vec<f64>> = if seed.len() == 1 {
        // A single segment attains the lower bound |g^1| and is optimal.
        seed
    } else {
        let z0 = subdivide(seed, cfg.segments).concat();
        let unit_tol = cfg.tol / scale.max(1.0).powi(g.shape().depth() as i32);
        // At unit scale the lower bound is 1.
        let z = problem.minimize(z0, &PenaltySchedule::default(), unit_tol, 0.5);
        z.chunks(d).map(<[f64]>::to_vec).collect()
    };
    let segments: Vec<Vec<f64>> = unit_segments
        .iter()
        .map(|v| v.iter().map(|c| c * scale).collect())
        .collect();
    let path = PiecewiseLinearPath::from_increments(&vec![0.0; d], &segments)?;
    let witness = LengthProblem::new(g);
    let violation = witness.violation(&segments.concat());
    if violation > cfg.tol {
        return Err(Error::ConstraintViolation {
            achieved: violation,
            tolerance: cfg.tol,
        });
    }
    let upper = path.length();
    if upper < lower * (1.0 - 1e-6) - 1e-9 {
        return Err(Error::Inconsistent(format!(
            "upper bound {upper} below lower bound {lower}"
        )));
    }
    Ok(CCBounds {
        lower,
        upper,
        path,
        segments: segments.len(),
        violation,
    })
}

/// Splits the longest segment in half until there are `m` segments.
fn subdivide(mut segments: Vec<Vec<f64>>, m: usize) -> Vec<Vec<f64>> {
    let norm = |v: &Vec<f64>| v.iter().map(|c| c * c).sum::<f64>();
    while segments.len() < m {
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| norm(a.1).total_cmp(&norm(b.1)))
            .expect("non-empty seed");
        let half: Vec<f64> = segments[idx].iter().map(|c| 0.5 * c).collect();
        segments[idx] = half.clone();
        segments.insert(idx + 1, half);
    }
    segments
}

/// Short path realizing one grid cell increment.
#[derive(Clone, Debug)]
pub struct CellGeodesic {
    pub cell: usize,
    /// Path on the cell interval `[t_i, t_{i+1}]`, started at the origin.
    pub path: Arc<PiecewiseLinearPath>,
    pub length: f64,
    pub budget: f64,
    pub lower: f64,
    /// Set when `length` exceeds `budget`.
    pub flagged: bool,
}

impl CellGeodesic {
    /// The `K` this cell actually achieved, `length / (M (t - s)^{1/p})`.
    pub fn achieved_k(&self, k_budget: f64) -> f64 {
        if self.budget == 0.0 {
            if self.length == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            k_budget * self.length / self.budget
        }
    }
}

/// Per-cell paths `x^{s,t}` with signature `x_{s,t}` and length compared to
/// `K · ‖x‖_{1/p-Höl} · (t - s)^{1/p}`.
pub fn geodesic_family(x: &RoughPathGrid, cfg: &GeodesicFamilyConfig) -> Result<Vec<CellGeodesic>> {
    cfg.validate()?;
    let norm = x.hoelder_norm();
    let times = x.times();
    let inv_p = 1.0 / x.p();
    (0..x.cell_count())
        .into_par_iter()
        .map(|i| {
            let (s, t) = (times[i], times[i + 1]);
            let bounds = cc_norm_upper(&x.increments()[i], cfg)?;
            let path = if bounds.path.segment_count() == 0 {
                PiecewiseLinearPath::from_flat(bounds.path.dim(), vec![s], bounds.path.point(0).to_vec())?
            } else {
                bounds.path.retimed(s, t)?
            };
            let budget = cfg.k_budget * norm * (t - s).powf(inv_p);
            Ok(CellGeodesic {
                cell: i,
                length: bounds.upper,
                lower: bounds.lower,
                budget,
                flagged: bounds.upper > budget * (1.0 + 1e-9),
                path: Arc::new(path),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_group::{AlgebraShape, LieSeries};

    #[test]
    fn lower_bound_examples() {
        let shape = AlgebraShape::new(2, 3).unwrap();
        let g = LieSeries::from_vector(shape, &[3.0, 4.0]).unwrap().exp();
        assert!((cc_norm_lower(&g) - 5.0).abs() < 1e-12);
        let heis = AlgebraShape::new(2, 2).unwrap();
        let area = LieSeries::bracket_generators(heis, 0, 1).unwrap().exp();
        assert!((cc_norm_lower(&area) - 2f64.powf(0.75)).abs() < 1e-12);
        assert_eq!(cc_norm_lower(&GroupElement::identity(shape)), 0.0);
    }

    #[test]
    fn straight_segment_is_optimal() {
        let shape = AlgebraShape::new(2, 3).unwrap();
        let g = LieSeries::from_vector(shape, &[0.3, -1.1]).unwrap().exp();
        let b = cc_norm_upper(&g, &GeodesicFamilyConfig::default()).unwrap();
        assert!((b.upper - b.lower).abs() < 1e-6);
    }

    #[test]
    fn pure_area_upper_near_circle() {
        let shape = AlgebraShape::new(2, 2).unwrap();
        let g = LieSeries::bracket_generators(shape, 0, 1).unwrap().exp();
        let b = cc_norm_upper(&g, &GeodesicFamilyConfig::default()).unwrap();
        let exact = heisenberg_cc_norm(&g).unwrap();
        assert!(b.upper >= exact - 1e-9 && b.upper <= 1.02 * exact, "{} vs {exact}", b.upper);
        assert!(b.lower <= exact);
    }

    #[test]
    fn identity_has_empty_witness() {
        let shape = AlgebraShape::new(2, 2).unwrap();
        let b = cc_norm_upper(&GroupElement::identity(shape), &GeodesicFamilyConfig::default()).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert_eq!(b.path.segment_count(), 0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = GeodesicFamilyConfig::default();
        cfg.k_budget = 0.5;
        assert!(cfg.validate().is_err());
        cfg = GeodesicFamilyConfig { segments: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn subdivide_preserves_total() {
        let segs = subdivide(vec![vec![1.0, 0.0], vec![0.0, 3.0]], 5);
        assert_eq!(segs.len(), 5);
        let total: Vec<f64> = segs.iter().fold(vec![0.0, 0.0], |acc, v| vec![acc[0] + v[0], acc[1] + v[1]]);
        assert_eq!(total, vec![1.0, 3.0]);
    }
}
