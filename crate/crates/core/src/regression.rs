//! Least-squares fits used by the rate and tail experiments.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LineFit {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let c = polynomial_fit(x, y, 1)?;
    Ok(LineFit {
        intercept: c[0],
        slope: c[1],
    })
}

/// Coefficients `c_0..=c_degree` of the least-squares polynomial.
pub fn polynomial_fit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::RegressionRefused("x and y lengths differ".into()));
    }
    if x.len() <= degree {
        return Err(Error::RegressionRefused(format!(
            "{} points cannot determine a degree-{degree} fit",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::RegressionRefused("non-finite data".into()));
    }
    // Center and scale x for conditioning, then map back.
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let spread = x.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread == 0.0 {
        return Err(Error::RegressionRefused("all x values coincide".into()));
    }
    let design = DMatrix::from_fn(x.len(), degree + 1, |r, c| ((x[r] - mean) / spread).powi(c as i32));
    let rhs = DVector::from_column_slice(y);
    let svd = design.svd(true, true);
    let scaled = svd
        .solve(&rhs, 1e-12 * svd.singular_values.max())
        .map_err(|e| Error::RegressionRefused(e.to_string()))?;
    // Expand Σ s_c ((x - mean)/spread)^c in powers of x.
    let mut coeffs = vec![0.0; degree + 1];
    for (c, s) in scaled.iter().enumerate() {
        let factor = s / spread.powi(c as i32);
        let mut binom = 1.0;
        for j in 0..=c {
            // term C(c, j) x^j (-mean)^{c-j}
            coeffs[j] += factor * binom * (-mean).powi((c - j) as i32);
            binom = binom * (c - j) as f64 / (j + 1) as f64;
        }
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_quadratic_off_center() {
        let x = [10.0, 11.0, 12.5, 14.0, 20.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v * v - 3.0 * v + 7.0).collect();
        let c = polynomial_fit(&x, &y, 2).unwrap();
        assert!((c[2] - 0.5).abs() < 1e-9 && (c[1] + 3.0).abs() < 1e-7 && (c[0] - 7.0).abs() < 1e-6, "{c:?}");
    }

    #[test]
    fn refuses_underdetermined() {
        assert!(matches!(polynomial_fit(&[1.0, 2.0], &[1.0, 2.0], 2), Err(Error::RegressionRefused(_))));
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 2.0]).is_err());
    }
}
