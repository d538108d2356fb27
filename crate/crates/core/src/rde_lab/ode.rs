//! Adaptive Dormand–Prince 5(4) integration of `dy = Σ_i V_i(y) dx^i` along
//! piecewise-linear drivers. On a straight piece with increment `Δ` the
//! equation is the autonomous ODE `y' = Σ_i Δ_i V_i(y)` over unit time.

use crate::error::{Error, Result};
use crate::euler_scheme::VectorFieldFamily;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MIN_STEP: f64 = 1e-12;

/// Integrates across one straight piece with increment `delta`; `time` is
/// only used for diagnostics.
pub(crate) fn integrate_segment(
    v: &VectorFieldFamily,
    y: &mut [f64],
    delta: &[f64],
    tol: f64,
    time: f64,
) -> Result<()> {
    if delta.iter().all(|c| *c == 0.0) {
        return Ok(());
    }
    let e = y.len();
    let f = |y: &[f64], out: &mut [f64]| v.eval_along(delta, y, out);
    let mut k = vec![vec![0.0; e]; 7];
    let mut tmp = vec![0.0; e];
    let mut y5 = vec![0.0; e];
    let mut tau = 0.0;
    let mut h: f64 = 0.5;
    f(y, &mut k[0]);
    while tau < 1.0 {
        if 1.0 - tau < h {
            h = 1.0 - tau;
        }
        let stage = |tmp: &mut [f64], k: &[Vec<f64>], coeffs: &[f64]| {
            for c in 0..e {
                let mut acc = y[c];
                for (j, a) in coeffs.iter().enumerate() {
                    acc += h * a * k[j][c];
                }
                tmp[c] = acc;
            }
        };
        stage(&mut tmp, &k, &[A21]);
        f(&tmp, &mut k[1]);
        stage(&mut tmp, &k, &[A31, A32]);
        f(&tmp, &mut k[2]);
        stage(&mut tmp, &k, &[A41, A42, A43]);
        f(&tmp, &mut k[3]);
        stage(&mut tmp, &k, &[A51, A52, A53, A54]);
        f(&tmp, &mut k[4]);
        stage(&mut tmp, &k, &[A61, A62, A63, A64, A65]);
        f(&tmp, &mut k[5]);
        stage(&mut y5, &k, &[B1, 0.0, B3, B4, B5, B6]);
        f(&y5, &mut k[6]);

        let mut err: f64 = 0.0;
        for c in 0..e {
            let est = h * (E1 * k[0][c] + E3 * k[2][c] + E4 * k[3][c] + E5 * k[4][c] + E6 * k[5][c] + E7 * k[6][c]);
            let scale = tol * (1.0 + y[c].abs().max(y5[c].abs()));
            err = err.max(est.abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Stiffness { time, step: h });
        }
        if err <= 1.0 {
            tau += h;
            y.copy_from_slice(&y5);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < MIN_STEP && tau < 1.0 {
            return Err(Error::Stiffness { time, step: h });
        }
    }
    Ok(())
}
