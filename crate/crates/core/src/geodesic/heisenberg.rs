//! Exact Carnot–Carathéodory norm on the Heisenberg group `G^2(R^2)`.
//!
//! An element is described by its increment `w` and its Lévy area `a` (the
//! antisymmetric part of the level-2 logarithm). Length minimizers are circular
//! arcs: an arc over the chord `w` with central angle `φ` has length
//! `|w| φ / (2 sin(φ/2))` and sweeps the area `|w|^2 (φ - sin φ) / (8 sin^2(φ/2))`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor_group::GroupElement;

const BISECTION_TOL: f64 = 1e-12;

/// Increment and Lévy area of a Heisenberg element.
pub fn heisenberg_coordinates(g: &GroupElement) -> Result<([f64; 2], f64)> {
    let shape = g.shape();
    if shape.dim() != 2 || shape.depth() != 2 {
        return Err(Error::Unsupported(format!(
            "exact CC norm is only available for d = 2, N = 2 (got {shape})"
        )));
    }
    let w = [g.level(1)[0], g.level(1)[1]];
    let log = g.log();
    let l2 = log.level(2);
    Ok((w, 0.5 * (l2[1] - l2[2])))
}

pub fn heisenberg_cc_norm(g: &GroupElement) -> Result<f64> {
    let (w, area) = heisenberg_coordinates(g)?;
    let chord = w[0].hypot(w[1]);
    let area = area.abs();
    if area == 0.0 {
        return Ok(chord);
    }
    if chord == 0.0 || chord < 1e-14 * area.sqrt() {
        return Ok(2.0 * (PI * area).sqrt());
    }
    let target = area / (chord * chord);
    let phi = solve_arc_angle(target);
    Ok(chord * arc_stretch(phi))
}

/// `φ / (2 sin(φ/2))`, the ratio of arc length to chord.
fn arc_stretch(phi: f64) -> f64 {
    if phi < 1e-8 {
        1.0 + phi * phi / 24.0
    } else {
        phi / (2.0 * (0.5 * phi).sin())
    }
}

/// Swept area per squared chord, increasing from 0 to ∞ on `(0, 2π)`.
fn area_ratio(phi: f64) -> f64 {
    if phi < 1e-4 {
        // (φ - sin φ) / (8 sin²(φ/2)) = φ/12 + φ³/720 + O(φ⁵)
        phi / 12.0 + phi.powi(3) / 720.0
    } else {
        let half = (0.5 * phi).sin();
        (phi - phi.sin()) / (8.0 * half * half)
    }
}

/// Unique `φ ∈ (0, 2π)` with `area_ratio(φ) = target`.
fn solve_arc_angle(target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 2.0 * PI);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if area_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_group::{AlgebraShape, LieSeries};

    fn heis() -> AlgebraShape {
        AlgebraShape::new(2, 2).unwrap()
    }

    #[test]
    fn straight_line() {
        let g = LieSeries::from_vector(heis(), &[3.0, -4.0]).unwrap().exp();
        assert_eq!(heisenberg_cc_norm(&g).unwrap(), 5.0);
    }

    #[test]
    fn pure_area_is_a_circle() {
        let g = LieSeries::bracket_generators(heis(), 0, 1).unwrap().exp();
        let n = heisenberg_cc_norm(&g).unwrap();
        assert!((n - 2.0 * PI.sqrt()).abs() < 1e-12);
        assert!((n - 3.544908).abs() < 1e-6);
    }

    #[test]
    fn half_circle() {
        // Semicircle over a chord of length 2: area π/2, length π.
        let mut l = LieSeries::from_vector(heis(), &[2.0, 0.0]).unwrap();
        l = l
            .add(&LieSeries::bracket_generators(heis(), 0, 1).unwrap().scale(PI / 2.0))
            .unwrap();
        let n = heisenberg_cc_norm(&l.exp()).unwrap();
        assert!((n - PI).abs() < 1e-9, "{n}");
    }

    #[test]
    fn rejects_other_shapes() {
        let g = GroupElement::identity(AlgebraShape::new(2, 3).unwrap());
        assert!(matches!(heisenberg_cc_norm(&g), Err(Error::Unsupported(_))));
    }

    #[test]
    fn area_ratio_is_monotone() {
        let mut prev = 0.0;
        for i in 1..1000 {
            let phi = i as f64 * 2.0 * PI / 1000.0;
            let a = area_ratio(phi);
            assert!(a > prev);
            prev = a;
        }
    }
}
