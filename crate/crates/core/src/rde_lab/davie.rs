//! The recursion `Λ(k, b) = a^k Π_{j<k} (1 + b 2^{-pj})`,
//! `Γ(n, b) = Σ_{k<=n} Λ(k, b)`, and its limit bound
//! `Γ_∞(b) <= exp(e / (1 - 2^{-p})) / (1 - a) · exp(3/2 (ln b)^2)` for `b >= e`.
//!
//! All sums run in log space; `Γ_∞(10^6)` overflows `f64` long before the
//! bound does.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::regression::polynomial_fit;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DavieRecursion {
    a: f64,
    p: f64,
    b: f64,
}

impl DavieRecursion {
    /// `a = 2^{1 - (N+1)/p}`, which lies in `(0, 1)` iff `N > p - 1`.
    pub fn new(p: f64, n: usize, b: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("p must be >= 1, got {p}")));
        }
        if !(n as f64 > p - 1.0) {
            return Err(invalid(format!("N = {n} must exceed p - 1 = {}", p - 1.0)));
        }
        Self::with_a(2f64.powf(1.0 - (n as f64 + 1.0) / p), p, b)
    }

    pub fn with_a(a: f64, p: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid(format!("a must lie in (0, 1), got {a}")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid(format!("p must be >= 1, got {p}")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(invalid(format!("b must be finite and >= 0, got {b}")));
        }
        Ok(Self { a, p, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        Self::with_a(self.a, self.p, b)
    }

    fn log_factor(&self, j: usize) -> f64 {
        self.a.ln() + (self.b * 2f64.powf(-self.p * j as f64)).ln_1p()
    }

    pub fn log_lambda(&self, k: usize) -> f64 {
        (0..k).map(|j| self.log_factor(j)).sum()
    }

    pub fn log_gamma(&self, n: usize) -> f64 {
        let mut log_term = 0.0;
        let mut acc = LogSum::default();
        for k in 0..=n {
            acc.add(log_term);
            log_term += self.log_factor(k);
        }
        acc.value()
    }

    /// `ln Γ_∞`, summing until the terms are decreasing and below `1e-15`
    /// of the partial sum.
    pub fn log_gamma_limit(&self) -> f64 {
        let mut log_term = 0.0;
        let mut acc = LogSum::default();
        let cutoff = 1e-15f64.ln();
        for k in 0.. {
            acc.add(log_term);
            let step = self.log_factor(k);
            log_term += step;
            if step < 0.0 && log_term < acc.value() + cutoff {
                break;
            }
        }
        acc.value()
    }

    /// `ln` of the refined bound on `Γ_∞`.
    pub fn log_refined_bound(&self) -> f64 {
        std::f64::consts::E / (1.0 - 2f64.powf(-self.p)) - (1.0 - self.a).ln() + 1.5 * self.b.ln().powi(2)
    }

    /// `ln` of `exp(b / (1 - 2^{-p})) / (1 - a)`.
    pub fn log_naive_bound(&self) -> f64 {
        self.b / (1.0 - 2f64.powf(-self.p)) - (1.0 - self.a).ln()
    }
}

/// Running `ln Σ exp(x_i)`.
#[derive(Default)]
struct LogSum {
    max: f64,
    scaled: f64,
    started: bool,
}

impl LogSum {
    fn add(&mut self, x: f64) {
        if !self.started {
            self.max = x;
            self.scaled = 1.0;
            self.started = true;
        } else if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

/// `(Λ(k, b), Γ(n, b))`; either may be `+inf` when it exceeds `f64`.
pub fn lambda_gamma(recursion: &DavieRecursion, k: usize, n: usize) -> (f64, f64) {
    let factor = |j: usize| recursion.a * (1.0 + recursion.b * 2f64.powf(-recursion.p * j as f64));
    let lambda = (0..k).map(factor).product();
    let mut term = 1.0;
    let mut gamma = 0.0;
    for k in 0..=n {
        gamma += term;
        term *= factor(k);
    }
    (lambda, gamma)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheckRow {
    pub b: f64,
    pub log_gamma_limit: f64,
    pub log_refined_bound: f64,
    pub log_naive_bound: f64,
    pub holds: bool,
    pub refined_beats_naive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheckReport {
    pub a: f64,
    pub p: f64,
    pub rows: Vec<BoundCheckRow>,
    /// Leading coefficient of a quadratic fit of `ln Γ_∞` in `ln b`.
    pub quadratic_coefficient: Option<f64>,
    pub all_hold: bool,
}

/// Compares `Γ_∞(b)` with both bounds on each `b >= e`.
pub fn gamma_limit_bound_check(recursion: &DavieRecursion, b_grid: &[f64]) -> Result<BoundCheckReport> {
    if let Some(bad) = b_grid.iter().find(|b| !(**b >= std::f64::consts::E * (1.0 - 1e-15))) {
        return Err(invalid(format!("the limit bound needs b >= e, got {bad}")));
    }
    let rows: Vec<BoundCheckRow> = b_grid
        .iter()
        .map(|&b| {
            let r = recursion.with_b(b)?;
            let g = r.log_gamma_limit();
            let refined = r.log_refined_bound();
            let naive = r.log_naive_bound();
            Ok(BoundCheckRow {
                b,
                log_gamma_limit: g,
                log_refined_bound: refined,
                log_naive_bound: naive,
                holds: g <= refined,
                refined_beats_naive: refined < naive,
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.b.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.log_gamma_limit).collect();
    let quadratic_coefficient = polynomial_fit(&x, &y, 2).ok().map(|c| c[2]);
    Ok(BoundCheckReport {
        a: recursion.a,
        p: recursion.p,
        all_hold: rows.iter().all(|r| r.holds),
        rows,
        quadratic_coefficient,
    })
}
