//! Tidy CSV (one observation per row) for the report types.

use rplab::rde_lab::{BoundCheckReport, GrowthReport, RateReport};
use rplab::stochastic_driver::{LqReport, RateStudy, TailReport};

/// A report that flattens to a fixed header and numeric rows.
pub trait PlotData {
    fn header(&self) -> &'static [&'static str];
    fn rows(&self) -> Vec<Vec<f64>>;
}

/// Header line plus one line per row, in the report's native order.
pub fn emit_plotdata<R: PlotData + ?Sized>(report: &R) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(report.header()).expect("in-memory write");
    for row in report.rows() {
        writer
            .write_record(row.iter().map(|v| format!("{v:?}")))
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii output")
}

impl PlotData for RateReport {
    fn header(&self) -> &'static [&'static str] {
        &["log_length", "log_error", "fit"]
    }

    /// Lengths with a zero defect have no logarithm and are left out.
    fn rows(&self) -> Vec<Vec<f64>> {
        self.interval_lengths
            .iter()
            .zip(&self.errors)
            .filter(|(_, e)| **e > 0.0)
            .map(|(l, e)| {
                let x = l.ln();
                vec![x, e.ln(), self.fitted_intercept + self.fitted_slope * x]
            })
            .collect()
    }
}

impl PlotData for TailReport {
    fn header(&self) -> &'static [&'static str] {
        &["t", "R", "p_hat", "ci_halfwidth"]
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(self.t_grid.len() * self.r_grid.len());
        for (ti, t) in self.t_grid.iter().enumerate() {
            for (ri, r) in self.r_grid.iter().enumerate() {
                rows.push(vec![*t, *r, self.probabilities[ti][ri], self.ci_halfwidths[ti][ri]]);
            }
        }
        rows
    }
}

impl PlotData for LqReport {
    fn header(&self) -> &'static [&'static str] {
        &["n", "q", "moment", "ci_halfwidth"]
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for (qi, q) in self.config.q_list.iter().enumerate() {
            for (ni, n) in self.config.n_list.iter().enumerate() {
                rows.push(vec![*n as f64, *q, self.moments[qi][ni], self.ci_halfwidths[qi][ni]]);
            }
        }
        rows
    }
}

impl PlotData for BoundCheckReport {
    fn header(&self) -> &'static [&'static str] {
        &["b", "log_gamma_limit", "log_refined_bound", "log_naive_bound"]
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.b, r.log_gamma_limit, r.log_refined_bound, r.log_naive_bound])
            .collect()
    }
}

impl PlotData for GrowthReport {
    fn header(&self) -> &'static [&'static str] {
        &["lambda", "hoelder_norm", "constant"]
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.lambdas.len())
            .map(|i| vec![self.lambdas[i], self.hoelder_norms[i], self.constants[i]])
            .collect()
    }
}

impl PlotData for RateStudy {
    fn header(&self) -> &'static [&'static str] {
        &["sample", "slope", "agreement_slope"]
    }

    /// `agreement_slope` is NaN for samples without an agreement run.
    fn rows(&self) -> Vec<Vec<f64>> {
        self.reports
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let agreement = self
                    .agreement
                    .as_ref()
                    .and_then(|a| a.get(i))
                    .map_or(f64::NAN, |a| a.fitted_slope);
                vec![i as f64, r.fitted_slope, agreement]
            })
            .collect()
    }
}
