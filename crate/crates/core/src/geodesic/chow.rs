//! Explicit paths with a prescribed step-N signature.
//!
//! Level 1 is matched with one straight segment. A Lie defect at level `k` is
//! expanded through the Dynkin map into right-nested brackets
//! `[e_{w1}, [e_{w2}, ..., e_{wk}]]`, each realized by a nested group
//! commutator of straight segments ("commutator gadget"). A gadget for a word of
//! length `k` scaled by `s` has log-signature `s^k r(w)` plus terms of degree
//! `> k`, so each level is matched exactly and only deeper levels are disturbed.

use crate::error::{Error, Result};
use crate::path_signature::PiecewiseLinearPath;
use crate::tensor_group::GroupElement;

/// Per-coefficient signature defect accepted by [`chow_decompose`].
pub const CHOW_TOLERANCE: f64 = 1e-8;
const MAX_ROUNDS: usize = 200;
const TARGET_DEFECT: f64 = 1e-13;

/// Straight segments whose concatenated signature equals `g`.
pub fn chow_segments(g: &GroupElement) -> Result<Vec<Vec<f64>>> {
    let shape = g.shape();
    let d = shape.dim();
    let mut segments: Vec<Vec<f64>> = Vec::new();
    let mut current = GroupElement::identity(shape);
    let scale = 1.0 + g.homogeneous_norm();

    for _ in 0..MAX_ROUNDS {
        let defect = current.series().max_abs_diff(g.series())?;
        if defect <= TARGET_DEFECT * scale.powi(shape.depth() as i32) {
            return Ok(segments);
        }
        let residual = current.inverse().multiply(g)?.log();
        // Lowest level carrying a non-negligible defect.
        let threshold = 1e-15 * scale.powi(shape.depth() as i32);
        let Some(k) = (1..=shape.depth())
            .find(|&k| residual.level(k).iter().any(|c| c.abs() > threshold))
        else {
            return Ok(segments);
        };
        let before = segments.len();
        if k == 1 {
            segments.push(residual.level(1).to_vec());
        } else {
            let level = residual.level(k);
            for (idx, _) in level.iter().enumerate() {
                let a = (idx / d) % d;
                let b = idx % d;
                if a >= b {
                    continue;
                }
                let swapped = idx - a * d - b + b * d + a;
                let coeff = (level[idx] - level[swapped]) / k as f64;
                if coeff.abs() <= threshold {
                    continue;
                }
                let word = word_digits(idx, d, k);
                push_gadget(&mut segments, &word, coeff, d);
            }
        }
        for seg in &segments[before..] {
            current.mul_segment(seg);
        }
    }
    let defect = current.series().max_abs_diff(g.series())?;
    if defect <= CHOW_TOLERANCE {
        Ok(segments)
    } else {
        Err(Error::ConstructionFailure {
            iterations: MAX_ROUNDS,
            defect,
        })
    }
}

/// Path on `[0, 1]` (uniformly timed) with signature `g` up to
/// [`CHOW_TOLERANCE`] per coefficient.
pub fn chow_decompose(g: &GroupElement) -> Result<PiecewiseLinearPath> {
    if !g.is_group_like(1e-8) {
        return Err(Error::InvalidInput(
            "chow decomposition needs a group-like element".into(),
        ));
    }
    let segments = chow_segments(g)?;
    PiecewiseLinearPath::from_increments(&vec![0.0; g.shape().dim()], &segments)
}

/// Digits `(i_1, ..., i_k)` of a row-major multi-index.
fn word_digits(mut idx: usize, d: usize, k: usize) -> Vec<usize> {
    let mut word = vec![0; k];
    for slot in word.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
    word
}

/// Appends segments whose signature is `exp(coeff · r(word))` up to terms of
/// degree greater than `word.len()`.
fn push_gadget(out: &mut Vec<Vec<f64>>, word: &[usize], coeff: f64, d: usize) {
    let k = word.len() as i32;
    let s = coeff.abs().powf(1.0 / k as f64);
    let gadget = commutator(word, s, coeff.signum(), d);
    out.extend(gadget);
}

fn commutator(word: &[usize], s: f64, sign: f64, d: usize) -> Vec<Vec<f64>> {
    let mut lead = vec![0.0; d];
    lead[word[0]] = sign * s;
    if word.len() == 1 {
        return vec![lead];
    }
    let inner = commutator(&word[1..], s, 1.0, d);
    let mut out = Vec::with_capacity(2 * inner.len() + 2);
    out.push(lead.clone());
    out.extend(inner.iter().cloned());
    out.push(lead.iter().map(|c| -c).collect());
    out.extend(inner.iter().rev().map(|v| v.iter().map(|c| -c).collect()));
    out
}
