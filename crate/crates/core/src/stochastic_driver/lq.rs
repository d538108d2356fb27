use rayon::prelude::*;
use serde::Serialize;

use super::tails::{gauss_tail_probe, GaussTailReport};
use super::{dyadic_approximation, ebm_sample_indexed};
use crate::error::{invalid, Result};
use crate::euler_scheme::VectorFieldFamily;
use crate::path_signature::RoughPathGrid;
use crate::rde_lab::{check_driver, states_at};
use crate::regression::linear_fit;

#[derive(Clone, Debug, Serialize)]
pub struct LqConfig {
    pub p: f64,
    pub q_list: Vec<f64>,
    /// Increasing dyadic levels; the last one stands in for the limit.
    pub n_list: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub y0: Vec<f64>,
    /// Skeleton level; at least 10 and at least the finest `n`.
    pub fine_level: usize,
    pub tol: f64,
    /// Largest moment order for the tail probe on `sup_n` Hölder norms.
    pub tail_q_max: usize,
}

impl LqConfig {
    pub fn new(p: f64, q_list: Vec<f64>, n_list: Vec<usize>, samples: usize, seed: u64, y0: Vec<f64>) -> Self {
        let finest = n_list.iter().copied().max().unwrap_or(0);
        Self {
            p,
            q_list,
            n_list,
            samples,
            seed,
            y0,
            fine_level: finest.max(10),
            tol: 1e-10,
            tail_q_max: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0 && self.p < 3.0) {
            return Err(invalid(format!("L^q experiments need p in (2, 3), got {}", self.p)));
        }
        if self.q_list.is_empty() || self.q_list.iter().any(|q| !(*q >= 1.0 && q.is_finite())) {
            return Err(invalid("moment orders must be finite and >= 1"));
        }
        if self.n_list.len() < 2 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_list must hold at least two strictly increasing levels"));
        }
        if *self.n_list.last().expect("non-empty") > self.fine_level {
            return Err(invalid("finest level exceeds the skeleton level"));
        }
        if self.samples < 2 {
            return Err(invalid("at least two samples are required"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("integrator tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LqReport {
    pub config: LqConfig,
    /// `moments[qi][ni] = E[Z_n^q]^{1/q}`.
    pub moments: Vec<Vec<f64>>,
    pub ci_halfwidths: Vec<Vec<f64>>,
    /// Each step in `n` decreases, up to one confidence width.
    pub decreasing: Vec<bool>,
    /// Each step in `n` decreases outright.
    pub strictly_decreasing: Vec<bool>,
    /// Slope of `-log2 E[Z_n^q]^{1/q}` in `n`, over the non-limit levels.
    pub decay_rates: Vec<Option<f64>>,
    /// `max_n` Hölder norm of the lifted `x_n`, per sample.
    pub sup_hoelder_norms: Vec<f64>,
    pub tail: Option<GaussTailReport>,
}

/// `sup_{j<k} |δ_k - δ_j| / (t_k - t_j)^{1/p}` for `δ = a - b` on `times`.
fn hoelder_distance(a: &[Vec<f64>], b: &[Vec<f64>], times: &[f64], p: f64) -> f64 {
    let delta: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(u, v)| u.iter().zip(v).map(|(x, y)| x - y).collect())
        .collect();
    let inv_p = 1.0 / p;
    let mut best: f64 = 0.0;
    for j in 0..times.len() {
        for k in j + 1..times.len() {
            let d = delta[k]
                .iter()
                .zip(&delta[j])
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.max(d / (times[k] - times[j]).powf(inv_p));
        }
    }
    best
}

/// `E[|π(x_n) - π(x_finest)|_{1/p}^q]^{1/q}` along dyadic interpolations of EBM.
pub fn lq_convergence_experiment(v: &VectorFieldFamily, cfg: &LqConfig) -> Result<LqReport> {
    cfg.validate()?;
    check_driver(v, &cfg.y0, v.driver_dim())?;
    let finest = *cfg.n_list.last().expect("validated");
    let common = RoughPathGrid::uniform_times(1 << finest);
    let per_sample = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let sample = ebm_sample_indexed(v.driver_dim(), cfg.fine_level, cfg.p, cfg.seed, i)?;
            let mut solutions = Vec::with_capacity(cfg.n_list.len());
            let mut sup_norm: f64 = 0.0;
            for &n in &cfg.n_list {
                let approx = dyadic_approximation(&sample, n)?;
                sup_norm = sup_norm.max(approx.lifted.hoelder_norm());
                let mut states = vec![cfg.y0.clone()];
                states.extend(states_at(v, &cfg.y0, &approx.path, &common[1..], cfg.tol)?);
                solutions.push(states);
            }
            let limit = solutions.last().expect("non-empty");
            let z: Vec<f64> = solutions
                .iter()
                .map(|s| hoelder_distance(s, limit, &common, cfg.p))
                .collect();
            Ok((z, sup_norm))
        })
        .collect::<Result<Vec<_>>>()?;
    let (z, sup_hoelder_norms): (Vec<Vec<f64>>, Vec<f64>) = per_sample.into_iter().unzip();

    let n_samples = z.len() as f64;
    let mut moments = Vec::with_capacity(cfg.q_list.len());
    let mut ci_halfwidths = Vec::with_capacity(cfg.q_list.len());
    for &q in &cfg.q_list {
        let mut row = Vec::with_capacity(cfg.n_list.len());
        let mut hw_row = Vec::with_capacity(cfg.n_list.len());
        for ni in 0..cfg.n_list.len() {
            let powers: Vec<f64> = z.iter().map(|zs| zs[ni].powf(q)).collect();
            let mean = powers.iter().sum::<f64>() / n_samples;
            let var = powers.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_samples - 1.0);
            let hw_mean = 1.96 * (var / n_samples).sqrt();
            let m = mean.powf(1.0 / q);
            // Delta method through x -> x^{1/q}.
            let hw = if mean > 0.0 { m / (q * mean) * hw_mean } else { 0.0 };
            row.push(m);
            hw_row.push(hw);
        }
        moments.push(row);
        ci_halfwidths.push(hw_row);
    }
    let decreasing = moments
        .iter()
        .zip(&ci_halfwidths)
        .map(|(m, hw)| (1..m.len()).all(|i| m[i] < m[i - 1] + hw[i].max(hw[i - 1])))
        .collect();
    let strictly_decreasing = moments.iter().map(|m| m.windows(2).all(|w| w[1] < w[0])).collect();
    let levels: Vec<f64> = cfg.n_list[..cfg.n_list.len() - 1].iter().map(|&n| n as f64).collect();
    let decay_rates = moments
        .iter()
        .map(|m| {
            let logs: Vec<f64> = m[..m.len() - 1].iter().map(|x| -x.log2()).collect();
            if levels.len() >= 2 && logs.iter().all(|l| l.is_finite()) {
                linear_fit(&levels, &logs).ok().map(|f| f.slope)
            } else {
                None
            }
        })
        .collect();
    let tail = gauss_tail_probe(&sup_hoelder_norms, cfg.tail_q_max).ok();
    Ok(LqReport {
        config: cfg.clone(),
        moments,
        ci_halfwidths,
        decreasing,
        strictly_decreasing,
        decay_rates,
        sup_hoelder_norms,
        tail,
    })
}
