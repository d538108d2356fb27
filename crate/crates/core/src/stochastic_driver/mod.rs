//! Enhanced Brownian motion as the step-2 lift of a fine piecewise-linear
//! Brownian path, its dyadic interpolations, and the Monte Carlo experiments
//! built on them.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, index)`,
//! so results do not depend on how samples are spread over threads.

mod lq;
mod tails;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

pub use lq::{lq_convergence_experiment, LqConfig, LqReport};
pub use tails::{
    azencott_tail_experiment, gauss_tail_probe, wilson_interval, AzencottConfig, AzencottReport, EnvelopeCheck, GaussTailReport,
    TailReport, MOMENT_GROWTH_LIMIT,
};

use crate::error::{invalid, Error, Result};
use crate::euler_scheme::VectorFieldFamily;
use crate::geodesic::GeodesicFamilyConfig;
use crate::path_signature::{PiecewiseLinearPath, RoughPathGrid};
use crate::rde_lab::{davie_rate_experiment, scheme_agreement_experiment, DavieConfig, RateReport};
use crate::tensor_group::AlgebraShape;

pub const DEFAULT_FINE_LEVEL: usize = 12;
/// Cells of the attached depth-2 grid are `2^{-GRID_LEVEL}` wide.
pub const GRID_LEVEL: usize = 6;
pub(crate) const MAX_FINE_LEVEL: usize = 20;

/// Independent stream for sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Brownian motion from the origin sampled on `{k 2^{-level}}`, joined linearly.
pub fn brownian_skeleton<R: Rng>(d: usize, level: usize, rng: &mut R) -> Result<PiecewiseLinearPath> {
    let steps = 1usize << level;
    let sd = (1.0 / steps as f64).sqrt();
    let mut flat = Vec::with_capacity((steps + 1) * d);
    flat.extend(std::iter::repeat_n(0.0, d));
    for k in 0..steps {
        for c in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            flat.push(flat[k * d + c] + sd * z);
        }
    }
    PiecewiseLinearPath::from_flat(d, RoughPathGrid::uniform_times(steps), flat)
}

#[derive(Clone, Debug)]
pub struct EBMSample {
    pub fine_skeleton: Arc<PiecewiseLinearPath>,
    /// Depth-2 lift on cells of width `2^{-min(GRID_LEVEL, fine_level)}`.
    pub grid: RoughPathGrid,
    pub seed: u64,
    pub index: u64,
    pub p: f64,
    pub fine_level: usize,
}

impl EBMSample {
    /// Depth-`depth` lift of the skeleton on the dyadic grid of the given level.
    pub fn grid_at(&self, level: usize, depth: usize) -> Result<RoughPathGrid> {
        if level > self.fine_level {
            return Err(Error::Unsupported(format!(
                "grid level {level} is finer than the skeleton level {}",
                self.fine_level
            )));
        }
        let shape = AlgebraShape::new(self.fine_skeleton.dim(), depth)?;
        RoughPathGrid::from_skeleton(self.fine_skeleton.clone(), RoughPathGrid::uniform_times(1 << level), shape, self.p)
    }
}

fn validate_ebm(d: usize, fine_level: usize, p: f64) -> Result<()> {
    if d == 0 {
        return Err(invalid("Brownian dimension must be positive"));
    }
    if !(10..=MAX_FINE_LEVEL).contains(&fine_level) {
        return Err(invalid(format!("fine level must lie in 10..={MAX_FINE_LEVEL}, got {fine_level}")));
    }
    if !(p > 2.0 && p < 3.0) {
        return Err(invalid(format!("enhanced Brownian motion needs p in (2, 3), got {p}")));
    }
    Ok(())
}

pub fn ebm_sample(d: usize, fine_level: usize, p: f64, seed: u64) -> Result<EBMSample> {
    ebm_sample_indexed(d, fine_level, p, seed, 0)
}

/// Sample number `index` of the family seeded by `seed`.
pub fn ebm_sample_indexed(d: usize, fine_level: usize, p: f64, seed: u64, index: u64) -> Result<EBMSample> {
    validate_ebm(d, fine_level, p)?;
    let skeleton = Arc::new(brownian_skeleton(d, fine_level, &mut sample_rng(seed, index))?);
    let level = GRID_LEVEL.min(fine_level);
    let grid = RoughPathGrid::from_skeleton(
        skeleton.clone(),
        RoughPathGrid::uniform_times(1 << level),
        AlgebraShape::new(d, 2)?,
        p,
    )?;
    Ok(EBMSample {
        fine_skeleton: skeleton,
        grid,
        seed,
        index,
        p,
        fine_level,
    })
}

#[derive(Clone, Debug)]
pub struct DyadicApproximation {
    pub level: usize,
    /// Linear interpolation of the skeleton at `D_n = {k 2^{-n}}`.
    pub path: Arc<PiecewiseLinearPath>,
    /// Depth-2 lift of `path` over the cells of `D_n`.
    pub lifted: RoughPathGrid,
}

pub fn dyadic_approximation(sample: &EBMSample, n: usize) -> Result<DyadicApproximation> {
    if n > sample.fine_level {
        return Err(Error::Unsupported(format!(
            "dyadic level {n} is finer than the skeleton level {}",
            sample.fine_level
        )));
    }
    let stride = 1usize << (sample.fine_level - n);
    let skeleton = &sample.fine_skeleton;
    let points: Vec<Vec<f64>> = (0..=1usize << n).map(|k| skeleton.point(k * stride).to_vec()).collect();
    let times = RoughPathGrid::uniform_times(1 << n);
    let path = Arc::new(PiecewiseLinearPath::new(times.clone(), points)?);
    let lifted = RoughPathGrid::from_skeleton(path.clone(), times, AlgebraShape::new(skeleton.dim(), 2)?, sample.p)?;
    Ok(DyadicApproximation { level: n, path, lifted })
}

/// Rate regressions repeated over independent EBM samples.
#[derive(Clone, Debug, Serialize)]
pub struct RateStudy {
    pub samples: usize,
    pub seed: u64,
    pub reports: Vec<RateReport>,
    pub mean_slope: f64,
    /// Euler against geodesic one-step agreement, when requested.
    pub agreement: Option<Vec<RateReport>>,
    pub mean_agreement_slope: Option<f64>,
}

/// Runs [`davie_rate_experiment`] (and optionally the scheme agreement) on
/// `samples` EBM paths with skeletons at `fine_level`.
pub fn ebm_rate_study(
    v: &VectorFieldFamily,
    y0: &[f64],
    cfg: &DavieConfig,
    geo: Option<&GeodesicFamilyConfig>,
    samples: usize,
    seed: u64,
    fine_level: usize,
) -> Result<RateStudy> {
    if samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    let runs = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let sample = ebm_sample_indexed(v.driver_dim(), fine_level, cfg.p, seed, i)?;
            let rate = davie_rate_experiment(v, &sample.grid, y0, cfg)?;
            let agreement = match geo {
                Some(g) => Some(scheme_agreement_experiment(v, &sample.grid, y0, cfg, g)?),
                None => None,
            };
            Ok((rate, agreement))
        })
        .collect::<Result<Vec<_>>>()?;
    let (reports, agreement): (Vec<RateReport>, Vec<Option<RateReport>>) = runs.into_iter().unzip();
    let mean = |rs: &[RateReport]| rs.iter().map(|r| r.fitted_slope).sum::<f64>() / rs.len() as f64;
    let agreement: Option<Vec<RateReport>> = agreement.into_iter().collect();
    Ok(RateStudy {
        samples,
        seed,
        mean_slope: mean(&reports),
        mean_agreement_slope: agreement.as_deref().map(mean),
        reports,
        agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = ebm_sample_indexed(2, 10, 2.5, 7, 3).unwrap();
        let b = ebm_sample_indexed(2, 10, 2.5, 7, 3).unwrap();
        let c = ebm_sample_indexed(2, 10, 2.5, 7, 4).unwrap();
        assert_eq!(a.fine_skeleton.point(1024), b.fine_skeleton.point(1024));
        assert_ne!(a.fine_skeleton.point(1024), c.fine_skeleton.point(1024));
    }

    #[test]
    fn preconditions() {
        assert!(ebm_sample(2, 9, 2.5, 0).is_err());
        assert!(ebm_sample(2, 10, 2.0, 0).is_err());
        assert!(ebm_sample(2, 10, 3.0, 0).is_err());
    }

    #[test]
    fn grid_is_chen_consistent() {
        let s = ebm_sample(2, 10, 2.5, 1).unwrap();
        assert_eq!(s.grid.cell_count(), 64);
        assert!(s.grid.chen_defect().unwrap().unwrap() < 1e-12);
    }

    #[test]
    fn dyadic_knots_are_exact() {
        let s = ebm_sample(2, 10, 2.5, 2).unwrap();
        let x = dyadic_approximation(&s, 4).unwrap();
        for k in 0..=16 {
            assert_eq!(x.path.point(k), s.fine_skeleton.point(k * 64));
        }
        let full = dyadic_approximation(&s, 10).unwrap();
        assert_eq!(full.path.as_ref().to_csv(), s.fine_skeleton.to_csv());
        assert!(matches!(dyadic_approximation(&s, 11), Err(Error::Unsupported(_))));
    }
}
