//! Length minimization over `m`-segment paths with a signature constraint.
//!
//! Quadratic penalty on the signature residual with a ×10 weight schedule,
//! a BFGS inner solver on adjoint gradients, and a final Gauss–Newton projection
//! back onto the constraint set.

use nalgebra::{DMatrix, DVector};

use crate::tensor_group::{GroupElement, TensorSeries};

pub(crate) struct PenaltySchedule {
    pub initial_weight: f64,
    pub growth: f64,
    pub rounds: usize,
    pub max_inner_iterations: usize,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial_weight: 10.0,
            growth: 10.0,
            rounds: 5,
            max_inner_iterations: 400,
        }
    }
}

/// Signature-constrained length problem over flattened segment vectors.
pub(crate) struct LengthProblem<'a> {
    target: &'a GroupElement,
    dim: usize,
}

impl<'a> LengthProblem<'a> {
    pub fn new(target: &'a GroupElement) -> Self {
        Self {
            target,
            dim: target.shape().dim(),
        }
    }

    pub fn length(&self, z: &[f64]) -> f64 {
        z.chunks(self.dim)
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .sum()
    }

    pub fn signature(&self, z: &[f64]) -> GroupElement {
        let mut g = GroupElement::identity(self.target.shape());
        for v in z.chunks(self.dim) {
            g.mul_segment(v);
        }
        g
    }

    /// Residual `S(z) - target` on levels `1..=N`.
    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let s = self.signature(z);
        s.series().coeffs()[1..]
            .iter()
            .zip(&self.target.series().coeffs()[1..])
            .map(|(a, b)| a - b)
            .collect()
    }

    pub fn violation(&self, z: &[f64]) -> f64 {
        self.residual(z).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    fn penalized(&self, z: &[f64], weight: f64) -> f64 {
        let r2: f64 = self.residual(z).iter().map(|r| r * r).sum();
        self.length(z) + 0.5 * weight * r2
    }

    /// Gradient of [`Self::penalized`] by one forward and one backward
    /// sweep: with `S = P_j ⊗ exp(v_j) ⊗ Q_j`, the residual term contributes
    /// `<P_j ⊲ R ⊳ Q_j, d exp(v_j)>`.
    fn penalized_gradient(&self, z: &[f64], weight: f64) -> Vec<f64> {
        let d = self.dim;
        let shape = self.target.shape();
        let m = z.len() / d;
        let mut prefix = Vec::with_capacity(m + 1);
        let mut acc = GroupElement::identity(shape);
        prefix.push(acc.clone());
        for v in z.chunks(d) {
            acc.mul_segment(v);
            prefix.push(acc.clone());
        }
        let residual = prefix[m]
            .series()
            .sub(self.target.series())
            .expect("same shape");

        let mut grad = vec![0.0; z.len()];
        let mut suffix = TensorSeries::unit(shape);
        for j in (0..m).rev() {
            let v = &z[j * d..(j + 1) * d];
            let inner = contract_left(prefix[j].series(), &contract_right(&residual, &suffix));
            let g = &mut grad[j * d..(j + 1) * d];
            exp_pullback(&inner, v, g);
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            for (gi, vi) in g.iter_mut().zip(v) {
                *gi *= weight;
                if norm > 0.0 {
                    *gi += vi / norm;
                }
            }
            let mut seg = GroupElement::identity(shape);
            seg.mul_segment(v);
            suffix = seg.series().tensor_mul(&suffix).expect("same shape");
        }
        grad
    }

    /// Runs the penalty rounds starting from `z`, then projects onto the
    /// constraint set. Returns the final segment vector.
    ///
    /// A round whose result is shorter than `min_length` has collapsed towards
    /// the origin, where the residual has no gradient; it is discarded and the
    /// next, heavier weight restarts from the previous iterate.
    pub fn minimize(&self, mut z: Vec<f64>, schedule: &PenaltySchedule, tol: f64, min_length: f64) -> Vec<f64> {
        let mut weight = schedule.initial_weight;
        for _ in 0..schedule.rounds {
            let next = bfgs(
                |v| self.penalized(v, weight),
                |v| self.penalized_gradient(v, weight),
                z.clone(),
                schedule.max_inner_iterations,
            );
            if self.length(&next) >= min_length {
                z = next;
            }
            weight *= schedule.growth;
        }
        self.project(z, 0.01 * tol)
    }

    /// Gauss–Newton projection with minimal-norm steps.
    pub fn project(&self, mut z: Vec<f64>, tol: f64) -> Vec<f64> {
        let n = z.len();
        for _ in 0..30 {
            let r = self.residual(&z);
            let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst <= tol {
                break;
            }
            let rows = r.len();
            let mut jac = DMatrix::<f64>::zeros(rows, n);
            for j in 0..n {
                let h = 1e-7 * (1.0 + z[j].abs());
                let orig = z[j];
                z[j] = orig + h;
                let plus = self.residual(&z);
                z[j] = orig - h;
                let minus = self.residual(&z);
                z[j] = orig;
                for i in 0..rows {
                    jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
                }
            }
            let rhs = DVector::from_vec(r.iter().map(|v| -v).collect());
            let svd = jac.svd(true, true);
            // Level k > 1 repeats level-1 information (shuffle relations), so
            // the Jacobian is rank deficient; cut relative to the top value.
            let cutoff = 1e-7 * svd.singular_values.max();
            let Ok(step) = svd.solve(&rhs, cutoff) else {
                break;
            };
            let mut improved = false;
            let mut t = 1.0;
            for _ in 0..8 {
                let candidate: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
                if self.violation(&candidate) < worst {
                    z = candidate;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        z
    }
}

/// `(R ⊳ B)^i = Σ_k R^{i+k} · B^k`, contracting the trailing `k` indices.
fn contract_right(r: &TensorSeries, b: &TensorSeries) -> TensorSeries {
    let shape = r.shape();
    let depth = shape.depth();
    let mut out = TensorSeries::zeros(shape);
    for i in 0..=depth {
        let rows = shape.level_len(i);
        let dst = out.level_mut(i);
        for k in 0..=depth - i {
            let cols = shape.level_len(k);
            let src = r.level(i + k);
            let bk = b.level(k);
            for (row, o) in dst.iter_mut().enumerate().take(rows) {
                *o += dot(&src[row * cols..(row + 1) * cols], bk);
            }
        }
    }
    out
}

/// `(A ⊲ T)^i = Σ_k A^k · T^{k+i}`, contracting the leading `k` indices.
fn contract_left(a: &TensorSeries, t: &TensorSeries) -> TensorSeries {
    let shape = t.shape();
    let depth = shape.depth();
    let mut out = TensorSeries::zeros(shape);
    for i in 0..=depth {
        let cols = shape.level_len(i);
        for k in 0..=depth - i {
            let src = t.level(k + i);
            for (row, &ak) in a.level(k).iter().enumerate() {
                if ak == 0.0 {
                    continue;
                }
                for (o, s) in out.level_mut(i).iter_mut().zip(&src[row * cols..(row + 1) * cols]) {
                    *o += ak * s;
                }
            }
        }
    }
    out
}

/// Adds `<M, ∂ exp(v) / ∂v_c>` to `out[c]`, where level `k` of `exp(v)` is
/// `v^{⊗k}/k!` and its derivative places `e_c` in each of the `k` slots.
fn exp_pullback(m: &TensorSeries, v: &[f64], out: &mut [f64]) {
    let d = v.len();
    let mut factorial = 1.0;
    for k in 1..=m.shape().depth() {
        factorial *= k as f64;
        let block = m.level(k);
        for before in 0..k {
            let after = k - 1 - before;
            let mut cur = block.to_vec();
            for _ in 0..after {
                cur = cur.chunks(d).map(|c| dot(c, v)).collect();
            }
            for _ in 0..before {
                let rest = cur.len() / d;
                let mut next = vec![0.0; rest];
                for (a, va) in v.iter().enumerate() {
                    for (n, c) in next.iter_mut().zip(&cur[a * rest..(a + 1) * rest]) {
                        *n += va * c;
                    }
                }
                cur = next;
            }
            for (o, c) in out.iter_mut().zip(&cur) {
                *o += c / factorial;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking.
pub(crate) fn bfgs<F, G>(f: F, grad: G, mut x: Vec<f64>, max_iter: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut stalls = 0;
    for _ in 0..max_iter {
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < 1e-10 {
            break;
        }
        let gv = DVector::from_column_slice(&g);
        let mut dir: Vec<f64> = (-(&h_inv * &gv)).iter().copied().collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let ft = f(&trial);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = grad(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            let sv = DVector::from_vec(s);
            let yv = DVector::from_vec(y);
            let rho = 1.0 / sy;
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            // H' = H - ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv -= (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
            h_inv += (&sv * sv.transpose()) * (rho * rho * yhy + rho);
        }
        let improvement = fx - f_new;
        x = x_new;
        g = g_new;
        if improvement <= 1e-15 * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= 5 {
                break;
            }
        } else {
            stalls = 0;
        }
        fx = f_new;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_group::AlgebraShape;

    #[test]
    fn bfgs_minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let grad = |x: &[f64]| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        };
        let x = bfgs(f, grad, vec![-1.2, 1.0], 500);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5, "{x:?}");
    }

    #[test]
    fn adjoint_gradient_matches_differences() {
        let shape = AlgebraShape::new(3, 3).unwrap();
        let mut target = GroupElement::identity(shape);
        target.mul_segment(&[0.4, -0.2, 0.9]);
        target.mul_segment(&[-0.3, 0.5, 0.1]);
        let problem = LengthProblem::new(&target);
        let z = vec![0.1, 0.7, -0.4, 0.3, 0.2, 0.5, -0.6, 0.1, 0.25];
        let g = problem.penalized_gradient(&z, 7.0);
        for i in 0..z.len() {
            let h = 1e-6;
            let mut zp = z.clone();
            zp[i] += h;
            let mut zm = z.clone();
            zm[i] -= h;
            let fd = (problem.penalized(&zp, 7.0) - problem.penalized(&zm, 7.0)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }
}
