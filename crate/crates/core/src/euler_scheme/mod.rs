//! Vector-field families, the iterated operators `V_{i_1} ⋯ V_{i_k} H` and
//! the step-N Euler increment
//!
//! ```text
//! I[y, N, g] = Σ_{k=1}^{N} Σ_{i_1..i_k} V_{i_1} ⋯ V_{i_k} H(y) g^{k, i_1..i_k}.
//! ```
//!
//! Indices are 0-based. Operators are composed right to left: with
//! `W_1 = V_{i_k}` and `W_{j+1} = DW_j · V_{i_{k-j}}`, the value is `W_k(y)`.
//! Linear-affine and polynomial families use exact Taylor jets; generic
//! families use nested central differences.

mod family;
mod jet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use family::{FieldFn, FieldKind, VectorFieldFamily, ANALYTIC_ORDER};
use jet::Jet;

use crate::error::{invalid, Error, Result};
use crate::tensor_group::GroupElement;

/// Values of every iterated operator of length `1..=depth` at one point.
#[derive(Clone, Debug)]
pub struct IteratedTable {
    state_dim: usize,
    driver_dim: usize,
    /// `levels[k - 1]` holds `d^k` row-major words, `e` entries each.
    levels: Vec<Vec<f64>>,
}

impl IteratedTable {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `V_{w_1} ⋯ V_{w_k} H(y)`.
    pub fn get(&self, word: &[usize]) -> &[f64] {
        let d = self.driver_dim;
        let idx = word.iter().fold(0, |acc, &i| acc * d + i);
        let e = self.state_dim;
        &self.levels[word.len() - 1][idx * e..(idx + 1) * e]
    }

    /// Contribution `Σ_w V_w H(y) g^{k,w}` of level `k`.
    pub fn contract_level(&self, k: usize, block: &[f64]) -> Vec<f64> {
        let e = self.state_dim;
        let mut out = vec![0.0; e];
        for (w, &c) in block.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.levels[k - 1][w * e..(w + 1) * e]) {
                *o += c * v;
            }
        }
        out
    }
}

fn check_word(v: &VectorFieldFamily, word: &[usize]) -> Result<()> {
    if word.is_empty() {
        return Err(invalid("iterated operator needs at least one index"));
    }
    if let Some(&bad) = word.iter().find(|&&i| i >= v.driver_dim()) {
        return Err(invalid(format!("field index {bad} out of range for d = {}", v.driver_dim())));
    }
    check_order(v, word.len())
}

fn check_order(v: &VectorFieldFamily, k: usize) -> Result<()> {
    if k > v.order() + 1 {
        return Err(Error::Unsupported(format!(
            "operators of length {k} need derivative order {} but the family declares {}",
            k - 1,
            v.order()
        )));
    }
    Ok(())
}

fn check_state(v: &VectorFieldFamily, y: &[f64]) -> Result<()> {
    if y.len() != v.state_dim() {
        return Err(invalid(format!("state has length {}, expected e = {}", y.len(), v.state_dim())));
    }
    Ok(())
}

/// `V_{w_1} ⋯ V_{w_k} H(y)` for a single word.
pub fn iterated_apply(v: &VectorFieldFamily, word: &[usize], y: &[f64]) -> Result<Vec<f64>> {
    check_word(v, word)?;
    check_state(v, y)?;
    if v.is_generic() {
        let h = difference_step(word.len() - 1);
        return Ok(generic_apply(v, word, y, h));
    }
    let order = word.len() - 1;
    let mut w = v.jet(word[word.len() - 1], y, order);
    for &i in word[..word.len() - 1].iter().rev() {
        w = push_field(v, &w, i, y, order);
    }
    Ok(w.iter().map(Jet::value).collect())
}

/// `DW · V_i` as a jet.
fn push_field(v: &VectorFieldFamily, w: &[Jet], i: usize, y: &[f64], order: usize) -> Vec<Jet> {
    let vi = v.jet(i, y, order);
    w.iter()
        .map(|wc| {
            let mut acc = Jet::zero(v.state_dim(), order);
            for (l, vl) in vi.iter().enumerate() {
                acc.add_assign(&wc.derivative(l).mul(vl));
            }
            acc
        })
        .collect()
}

/// Relative step for `r` nested central differences, `ε^{1/(r+2)}`.
fn difference_step(r: usize) -> f64 {
    f64::EPSILON.powf(1.0 / (r as f64 + 2.0))
}

fn generic_apply(v: &VectorFieldFamily, word: &[usize], y: &[f64], h: f64) -> Vec<f64> {
    if word.len() == 1 {
        return v.eval(word[0], y);
    }
    let dir = v.eval(word[0], y);
    let speed = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
    if speed == 0.0 {
        return vec![0.0; y.len()];
    }
    let scale = 1.0 + y.iter().map(|c| c * c).sum::<f64>().sqrt();
    let step = h * scale;
    let shifted = |sign: f64| -> Vec<f64> {
        y.iter()
            .zip(&dir)
            .map(|(yc, dc)| yc + sign * step * dc / speed)
            .collect()
    };
    let plus = generic_apply(v, &word[1..], &shifted(1.0), h);
    let minus = generic_apply(v, &word[1..], &shifted(-1.0), h);
    plus.iter()
        .zip(&minus)
        .map(|(p, m)| speed * (p - m) / (2.0 * step))
        .collect()
}

/// All iterated operators up to length `depth` at `y`.
pub fn iterated_table(v: &VectorFieldFamily, depth: usize, y: &[f64]) -> Result<IteratedTable> {
    check_state(v, y)?;
    check_order(v, depth)?;
    let (e, d) = (v.state_dim(), v.driver_dim());
    let mut levels = Vec::with_capacity(depth);
    if v.is_generic() {
        for k in 1..=depth {
            let h = difference_step(k - 1);
            let mut level = Vec::with_capacity(d.pow(k as u32) * e);
            for idx in 0..d.pow(k as u32) {
                let word = digits(idx, d, k);
                level.extend(generic_apply(v, &word, y, h));
            }
            levels.push(level);
        }
    } else if depth > 0 {
        // Jets are indexed like the words they realize; prepending index i
        // to a word w of length k gives i·d^k + w.
        let top = depth - 1;
        let mut jets: Vec<Vec<Jet>> = (0..d).map(|i| v.jet(i, y, top)).collect();
        let fields: Vec<Vec<Jet>> = jets.clone();
        levels.push(jets.iter().flat_map(|w| w.iter().map(Jet::value)).collect());
        for k in 2..=depth {
            let block = jets.len();
            let mut next = Vec::with_capacity(block * d);
            for field in &fields {
                for w in &jets {
                    next.push(
                        w.iter()
                            .map(|wc| {
                                let mut acc = Jet::zero(e, top);
                                for (l, vl) in field.iter().enumerate() {
                                    acc.add_assign(&wc.derivative(l).mul(vl));
                                }
                                acc
                            })
                            .collect::<Vec<_>>(),
                    );
                }
            }
            jets = next;
            debug_assert_eq!(jets.len(), d.pow(k as u32));
            levels.push(jets.iter().flat_map(|w| w.iter().map(Jet::value)).collect());
        }
    }
    Ok(IteratedTable {
        state_dim: e,
        driver_dim: d,
        levels,
    })
}

fn digits(mut idx: usize, d: usize, k: usize) -> Vec<usize> {
    let mut word = vec![0; k];
    for slot in word.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
    word
}

/// `I[y, N, g]` with its per-level contributions.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerIncrement {
    pub value: Vec<f64>,
    /// `per_level[k - 1]` is the level-`k` term.
    pub per_level: Vec<Vec<f64>>,
}

fn check_increment(v: &VectorFieldFamily, n: usize, g: &GroupElement) -> Result<()> {
    if n == 0 {
        return Err(invalid("Euler depth N must be >= 1"));
    }
    if g.shape().depth() < n {
        return Err(Error::Unsupported(format!(
            "step-{n} increment needs a depth >= {n} signature, got {}",
            g.shape()
        )));
    }
    if g.shape().dim() != v.driver_dim() {
        return Err(invalid(format!(
            "driver dimension {} does not match d = {}",
            g.shape().dim(),
            v.driver_dim()
        )));
    }
    Ok(())
}

pub fn euler_increment(v: &VectorFieldFamily, n: usize, g: &GroupElement, y: &[f64]) -> Result<EulerIncrement> {
    check_increment(v, n, g)?;
    let table = iterated_table(v, n, y)?;
    Ok(contract(&table, n, g))
}

/// Increment from a precomputed table, for repeated use at one point.
pub fn euler_increment_with(table: &IteratedTable, n: usize, g: &GroupElement) -> Result<EulerIncrement> {
    if table.depth() < n || g.shape().depth() < n || g.shape().dim() != table.driver_dim {
        return Err(invalid("table or signature too shallow for the requested depth"));
    }
    Ok(contract(table, n, g))
}

fn contract(table: &IteratedTable, n: usize, g: &GroupElement) -> EulerIncrement {
    let per_level: Vec<Vec<f64>> = (1..=n).map(|k| table.contract_level(k, g.level(k))).collect();
    let mut value = vec![0.0; table.state_dim];
    for level in &per_level {
        for (v, c) in value.iter_mut().zip(level) {
            *v += c;
        }
    }
    EulerIncrement { value, per_level }
}

/// Result of comparing increments started at two points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sensitivity {
    pub gap: f64,
    pub bound: f64,
    /// Empirical constant `C`.
    pub constant: f64,
}

impl Sensitivity {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound
    }
}

/// Empirical Lipschitz constant of `y ↦ (V_w H(y))_{|w| = k}` (Frobenius over
/// words) for each `k`, from random pairs in the ball `B(center, radius)`
/// and any extra pairs supplied.
pub fn iterated_lipschitz(
    v: &VectorFieldFamily,
    n: usize,
    center: &[f64],
    radius: f64,
    pairs: usize,
    seed: u64,
    extra: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<f64>> {
    check_state(v, center)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = v.state_dim();
    let mut points: Vec<(Vec<f64>, Vec<f64>)> = extra.to_vec();
    for _ in 0..pairs {
        let a: Vec<f64> = center.iter().map(|c| c + radius * rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|c| c + 0.1 * radius * rng.random_range(-1.0..1.0)).collect();
        points.push((a, b));
    }
    let mut consts = vec![0.0f64; n];
    for (a, b) in &points {
        let dist = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        let ta = iterated_table(v, n, a)?;
        let tb = iterated_table(v, n, b)?;
        for k in 1..=n {
            let diff = ta.levels[k - 1]
                .iter()
                .zip(&tb.levels[k - 1])
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            consts[k - 1] = consts[k - 1].max(diff / dist);
        }
    }
    debug_assert!(consts.iter().all(|c| c.is_finite()) || e == 0);
    Ok(consts)
}

/// `|I[y,N,g] − I[ỹ,N,g]|` against `C |y − ỹ| (n + n^N)` with
/// `n = |||g|||` and `C = Σ_k L_k`, the `L_k` sampled on a ball covering both
/// points (the pair itself included).
pub fn initial_point_sensitivity(
    v: &VectorFieldFamily,
    n: usize,
    g: &GroupElement,
    y: &[f64],
    y_tilde: &[f64],
) -> Result<Sensitivity> {
    check_increment(v, n, g)?;
    check_state(v, y_tilde)?;
    let a = euler_increment(v, n, g, y)?.value;
    let b = euler_increment(v, n, g, y_tilde)?.value;
    let gap = a.iter().zip(&b).map(|(x, z)| (x - z).powi(2)).sum::<f64>().sqrt();
    let dist = y.iter().zip(y_tilde).map(|(x, z)| (x - z).powi(2)).sum::<f64>().sqrt();
    if dist == 0.0 {
        return Ok(Sensitivity {
            gap,
            bound: 0.0,
            constant: 0.0,
        });
    }
    let center: Vec<f64> = y.iter().zip(y_tilde).map(|(x, z)| 0.5 * (x + z)).collect();
    let lips = iterated_lipschitz(v, n, &center, dist.max(1e-3), 64, 0x5eed, &[(y.to_vec(), y_tilde.to_vec())])?;
    let constant: f64 = lips.iter().sum();
    let norm = g.project(n)?.homogeneous_norm();
    let bound = constant * dist * (norm + norm.powi(n as i32));
    // Level k contributes at most L_k |g^k| |y − ỹ| ≤ L_k n^k |y − ỹ|; the
    // tiny slack absorbs rounding in the two sums.
    Ok(Sensitivity {
        gap,
        bound: bound * (1.0 + 1e-12) + 1e-15,
        constant,
    })
}
