//! Truncated tensor algebra `T^(N)(R^d)` and the free nilpotent group
//! `G^N(R^d) = exp(L^N(R^d))` inside it.
//!
//! Coefficients are stored densely, one contiguous block per level. Level `k`
//! holds `d^k` entries indexed by multi-indices `(i_1, ..., i_k)` in row-major
//! order, so `i_1` is the most significant digit. Multiplication is the
//! truncated tensor product
//!
//! ```text
//! (a ⊗ b)^k = Σ_{i=0..k} a^i ⊗ b^{k-i}
//! ```
//!
//! and `exp`, `log` and `inverse` are finite Horner sums because every element
//! with vanishing scalar part is nilpotent of order `N + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Ambient dimension `d` and truncation depth `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AlgebraShape {
    dim: usize,
    depth: usize,
}

impl AlgebraShape {
    /// Upper bound on the total number of coefficients of a series.
    pub const MAX_COEFFICIENTS: usize = 1 << 22;

    pub fn new(dim: usize, depth: usize) -> Result<Self> {
        if dim == 0 || depth == 0 {
            return Err(invalid(format!(
                "algebra shape needs d >= 1 and N >= 1 (got d = {dim}, N = {depth})"
            )));
        }
        let mut total: usize = 0;
        let mut block: usize = 1;
        for k in 0..=depth {
            if k > 0 {
                block = block
                    .checked_mul(dim)
                    .ok_or_else(|| invalid("algebra shape too large"))?;
            }
            total = total
                .checked_add(block)
                .filter(|t| *t <= Self::MAX_COEFFICIENTS)
                .ok_or_else(|| invalid(format!("algebra shape d = {dim}, N = {depth} too large")))?;
        }
        Ok(Self { dim, depth })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of entries `d^k` of level `k`.
    #[inline]
    pub fn level_len(&self, k: usize) -> usize {
        self.dim.pow(k as u32)
    }

    /// Offset of level `k` inside the flat coefficient vector.
    #[inline]
    pub fn level_offset(&self, k: usize) -> usize {
        (0..k).map(|j| self.level_len(j)).sum()
    }

    /// Total number of coefficients over levels `0..=N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.level_offset(self.depth + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        Self::new(self.dim, depth)
    }

    pub(crate) fn ensure_same(&self, other: &AlgebraShape) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

impl fmt::Display for AlgebraShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(d={}, N={})", self.dim, self.depth)
    }
}

/// Dense element of `T^(N)(R^d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeries {
    shape: AlgebraShape,
    coeffs: Vec<f64>,
}

impl TensorSeries {
    pub fn zeros(shape: AlgebraShape) -> Self {
        Self {
            shape,
            coeffs: vec![0.0; shape.len()],
        }
    }

    /// The unit `1 + 0 + ... + 0`.
    pub fn unit(shape: AlgebraShape) -> Self {
        let mut s = Self::zeros(shape);
        s.coeffs[0] = 1.0;
        s
    }

    /// Builds a series from a flat coefficient vector (levels concatenated).
    pub fn from_flat(shape: AlgebraShape, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != shape.len() {
            return Err(invalid(format!(
                "expected {} coefficients for shape {shape}, got {}",
                shape.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("tensor coefficients must be finite"));
        }
        Ok(Self { shape, coeffs })
    }

    /// Builds a series from per-level blocks (`levels[0]` has length one).
    pub fn from_levels(shape: AlgebraShape, levels: &[Vec<f64>]) -> Result<Self> {
        if levels.len() != shape.depth() + 1 {
            return Err(invalid(format!(
                "expected {} levels, got {}",
                shape.depth() + 1,
                levels.len()
            )));
        }
        let mut coeffs = Vec::with_capacity(shape.len());
        for (k, block) in levels.iter().enumerate() {
            if block.len() != shape.level_len(k) {
                return Err(invalid(format!(
                    "level {k} must have {} entries, got {}",
                    shape.level_len(k),
                    block.len()
                )));
            }
            coeffs.extend_from_slice(block);
        }
        Self::from_flat(shape, coeffs)
    }

    /// Series with only a level-1 component.
    pub fn from_vector(shape: AlgebraShape, v: &[f64]) -> Result<Self> {
        if v.len() != shape.dim() {
            return Err(invalid(format!(
                "vector of length {} does not match d = {}",
                v.len(),
                shape.dim()
            )));
        }
        let mut s = Self::zeros(shape);
        s.level_mut(1).copy_from_slice(v);
        Ok(s)
    }

    #[inline]
    pub fn shape(&self) -> AlgebraShape {
        self.shape
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn scalar(&self) -> f64 {
        self.coeffs[0]
    }

    #[inline]
    pub fn level(&self, k: usize) -> &[f64] {
        let start = self.shape.level_offset(k);
        &self.coeffs[start..start + self.shape.level_len(k)]
    }

    #[inline]
    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let start = self.shape.level_offset(k);
        let len = self.shape.level_len(k);
        &mut self.coeffs[start..start + len]
    }

    pub fn levels(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..=self.shape.depth()).map(move |k| self.level(k))
    }

    /// Frobenius norm of level `k`.
    pub fn level_norm(&self, k: usize) -> f64 {
        frobenius(self.level(k))
    }

    pub fn add(&self, other: &TensorSeries) -> Result<TensorSeries> {
        self.shape.ensure_same(&other.shape)?;
        Ok(Self {
            shape: self.shape,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &TensorSeries) -> Result<TensorSeries> {
        self.shape.ensure_same(&other.shape)?;
        Ok(Self {
            shape: self.shape,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, factor: f64) -> TensorSeries {
        Self {
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Truncated tensor product.
    pub fn tensor_mul(&self, other: &TensorSeries) -> Result<TensorSeries> {
        self.shape.ensure_same(&other.shape)?;
        let mut out = TensorSeries::zeros(self.shape);
        mul_into(self, other, &mut out);
        Ok(out)
    }

    /// Restriction to levels `0..=depth` (the canonical projection).
    pub fn project(&self, depth: usize) -> Result<TensorSeries> {
        if depth > self.shape.depth() {
            return Err(invalid(format!(
                "cannot project depth {} onto deeper depth {depth}",
                self.shape.depth()
            )));
        }
        let shape = self.shape.with_depth(depth)?;
        Ok(Self {
            shape,
            coeffs: self.coeffs[..shape.len()].to_vec(),
        })
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &TensorSeries) -> Result<f64> {
        self.shape.ensure_same(&other.shape)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Euclidean norm of all coefficients of levels `1..=N`.
    pub fn graded_norm(&self) -> f64 {
        frobenius(&self.coeffs[1..])
    }
}

#[inline]
pub(crate) fn frobenius(block: &[f64]) -> f64 {
    block.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `out = a ⊗ b`; `out` must be zeroed and share the shape.
fn mul_into(a: &TensorSeries, b: &TensorSeries, out: &mut TensorSeries) {
    let shape = a.shape;
    let depth = shape.depth();
    for k in 0..=depth {
        let out_start = shape.level_offset(k);
        for i in 0..=k {
            let j = k - i;
            let lhs = a.level(i);
            let rhs = b.level(j);
            let stride = rhs.len();
            for (ia, &x) in lhs.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let base = out_start + ia * stride;
                for (o, &y) in out.coeffs[base..base + stride].iter_mut().zip(rhs) {
                    *o += x * y;
                }
            }
        }
    }
}

/// Element of `T_1^(N)`: level 0 equal to one.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(TensorSeries);

/// Element of `T_0^(N)`: level 0 equal to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LieSeries(TensorSeries);

impl GroupElement {
    /// The neutral element `e = 1 + 0 + ... + 0`.
    pub fn identity(shape: AlgebraShape) -> Self {
        Self(TensorSeries::unit(shape))
    }

    pub fn from_series(series: TensorSeries) -> Result<Self> {
        if series.scalar() != 1.0 {
            return Err(invalid(format!(
                "group element needs level 0 equal to 1, got {}",
                series.scalar()
            )));
        }
        Ok(Self(series))
    }

    pub fn from_levels(shape: AlgebraShape, levels: &[Vec<f64>]) -> Result<Self> {
        Self::from_series(TensorSeries::from_levels(shape, levels)?)
    }

    #[inline]
    pub fn series(&self) -> &TensorSeries {
        &self.0
    }

    pub fn into_series(self) -> TensorSeries {
        self.0
    }

    #[inline]
    pub fn shape(&self) -> AlgebraShape {
        self.0.shape
    }

    #[inline]
    pub fn level(&self, k: usize) -> &[f64] {
        self.0.level(k)
    }

    pub fn is_identity(&self) -> bool {
        self.0.coeffs[1..].iter().all(|c| *c == 0.0)
    }

    pub fn multiply(&self, other: &GroupElement) -> Result<GroupElement> {
        Ok(Self(self.0.tensor_mul(&other.0)?))
    }

    /// `(1 + x)^{-1} = Σ_m (-x)^m`, truncated at level `N`.
    pub fn inverse(&self) -> GroupElement {
        let x = self.nilpotent_part();
        let shape = self.shape();
        let mut r = TensorSeries::unit(shape);
        let mut tmp = TensorSeries::zeros(shape);
        for _ in 0..shape.depth() {
            tmp.coeffs.iter_mut().for_each(|c| *c = 0.0);
            mul_into(&x, &r, &mut tmp);
            for (ri, ti) in r.coeffs.iter_mut().zip(&tmp.coeffs) {
                *ri = -ti;
            }
            r.coeffs[0] = 1.0;
        }
        Self(r)
    }

    /// `log(1 + x) = Σ_m (-1)^{m+1} x^m / m`, truncated at level `N`.
    pub fn log(&self) -> LieSeries {
        let x = self.nilpotent_part();
        let shape = self.shape();
        let depth = shape.depth();
        let coef = |m: usize| if m % 2 == 1 { 1.0 / m as f64 } else { -1.0 / m as f64 };
        let mut r = TensorSeries::zeros(shape);
        r.coeffs[0] = coef(depth);
        let mut tmp = TensorSeries::zeros(shape);
        for m in (1..depth).rev() {
            tmp.coeffs.iter_mut().for_each(|c| *c = 0.0);
            mul_into(&x, &r, &mut tmp);
            std::mem::swap(&mut r, &mut tmp);
            r.coeffs[0] += coef(m);
        }
        tmp.coeffs.iter_mut().for_each(|c| *c = 0.0);
        mul_into(&x, &r, &mut tmp);
        tmp.coeffs[0] = 0.0;
        LieSeries(tmp)
    }

    /// Dilation `δ_λ`: level `k` scaled by `λ^k`.
    pub fn dilate(&self, lambda: f64) -> GroupElement {
        let mut out = self.0.clone();
        let mut factor = 1.0;
        for k in 1..=self.shape().depth() {
            factor *= lambda;
            out.level_mut(k).iter_mut().for_each(|c| *c *= factor);
        }
        Self(out)
    }

    /// `max_k |g^k|^{1/k}` with the Frobenius norm on each level.
    pub fn homogeneous_norm(&self) -> f64 {
        (1..=self.shape().depth())
            .map(|k| self.0.level_norm(k).powf(1.0 / k as f64))
            .fold(0.0, f64::max)
    }

    /// Membership test for `G^N`: every homogeneous level of `log(g)` must be
    /// fixed by the Dynkin projection, `|r(L_k) - k L_k| <= tol (1 + |L_k|)`.
    pub fn is_group_like(&self, tol: f64) -> bool {
        let log = self.log();
        let shape = self.shape();
        (2..=shape.depth()).all(|k| {
            let level = log.0.level(k);
            let bracketed = right_bracket(level, shape.dim(), k);
            let defect: f64 = bracketed
                .iter()
                .zip(level)
                .map(|(r, l)| (r - k as f64 * l).powi(2))
                .sum::<f64>()
                .sqrt();
            defect <= tol * (1.0 + frobenius(level))
        })
    }

    /// Right multiplication by the signature of a straight segment:
    /// `self ← self ⊗ exp(v)`, in place.
    pub fn mul_segment(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.shape().dim());
        let shape = self.shape();
        let d = shape.dim();
        let depth = shape.depth();
        let mut acc = Vec::with_capacity(shape.level_len(depth));
        let mut next = Vec::with_capacity(shape.level_len(depth));
        for k in (1..=depth).rev() {
            // Horner in j: h_j = g^j + (h_{j-1} ⊗ v) / (k - j + 1).
            acc.clear();
            acc.push(self.0.coeffs[0]);
            for j in 1..=k {
                let inv = 1.0 / (k - j + 1) as f64;
                next.clear();
                let g_j = self.0.level(j);
                for (a_idx, &a) in acc.iter().enumerate() {
                    let scaled = a * inv;
                    for (c, &vc) in v.iter().enumerate() {
                        next.push(g_j[a_idx * d + c] + scaled * vc);
                    }
                }
                std::mem::swap(&mut acc, &mut next);
            }
            self.0.level_mut(k).copy_from_slice(&acc);
        }
    }

    pub fn project(&self, depth: usize) -> Result<GroupElement> {
        Ok(Self(self.0.project(depth)?))
    }

    fn nilpotent_part(&self) -> TensorSeries {
        let mut x = self.0.clone();
        x.coeffs[0] = 0.0;
        x
    }
}

impl LieSeries {
    pub fn zero(shape: AlgebraShape) -> Self {
        Self(TensorSeries::zeros(shape))
    }

    pub fn from_series(series: TensorSeries) -> Result<Self> {
        if series.scalar() != 0.0 {
            return Err(invalid(format!(
                "Lie series needs level 0 equal to 0, got {}",
                series.scalar()
            )));
        }
        Ok(Self(series))
    }

    /// The generator `v ∈ R^d` seen as a degree-one Lie element.
    pub fn from_vector(shape: AlgebraShape, v: &[f64]) -> Result<Self> {
        Ok(Self(TensorSeries::from_vector(shape, v)?))
    }

    /// Degree-two bracket `[e_i, e_j] = e_i ⊗ e_j - e_j ⊗ e_i` (0-based indices).
    pub fn bracket_generators(shape: AlgebraShape, i: usize, j: usize) -> Result<Self> {
        let d = shape.dim();
        if i >= d || j >= d || shape.depth() < 2 {
            return Err(invalid("generator bracket outside the algebra"));
        }
        let mut s = TensorSeries::zeros(shape);
        let lvl = s.level_mut(2);
        lvl[i * d + j] += 1.0;
        lvl[j * d + i] -= 1.0;
        Ok(Self(s))
    }

    /// Projects the levels `1..=N` of an arbitrary series onto the free Lie
    /// algebra via the Dynkin map `L_k ↦ r(L_k) / k`.
    pub fn dynkin_projection(series: &TensorSeries) -> Self {
        let shape = series.shape();
        let mut out = TensorSeries::zeros(shape);
        out.level_mut(1).copy_from_slice(series.level(1));
        for k in 2..=shape.depth() {
            let r = right_bracket(series.level(k), shape.dim(), k);
            for (o, v) in out.level_mut(k).iter_mut().zip(r) {
                *o = v / k as f64;
            }
        }
        Self(out)
    }

    #[inline]
    pub fn series(&self) -> &TensorSeries {
        &self.0
    }

    #[inline]
    pub fn shape(&self) -> AlgebraShape {
        self.0.shape
    }

    #[inline]
    pub fn level(&self, k: usize) -> &[f64] {
        self.0.level(k)
    }

    pub fn scale(&self, factor: f64) -> LieSeries {
        Self(self.0.scale(factor))
    }

    pub fn add(&self, other: &LieSeries) -> Result<LieSeries> {
        Ok(Self(self.0.add(&other.0)?))
    }

    /// `exp(x) = 1 + x (1 + x/2 (1 + ... (1 + x/N)))`.
    pub fn exp(&self) -> GroupElement {
        let shape = self.shape();
        let mut r = TensorSeries::unit(shape);
        let mut tmp = TensorSeries::zeros(shape);
        for m in (1..=shape.depth()).rev() {
            tmp.coeffs.iter_mut().for_each(|c| *c = 0.0);
            mul_into(&self.0, &r, &mut tmp);
            let inv = 1.0 / m as f64;
            for (ri, ti) in r.coeffs.iter_mut().zip(&tmp.coeffs) {
                *ri = ti * inv;
            }
            r.coeffs[0] = 1.0;
        }
        GroupElement(r)
    }
}

/// Dynkin right bracketing of a homogeneous degree-`k` tensor:
/// `r(e_{i1} ⊗ ... ⊗ e_{ik}) = [e_{i1}, [e_{i2}, ..., [e_{ik-1}, e_{ik}]]]`.
pub fn right_bracket(level: &[f64], dim: usize, k: usize) -> Vec<f64> {
    debug_assert_eq!(level.len(), dim.pow(k as u32));
    if k <= 1 {
        return level.to_vec();
    }
    let tail_len = dim.pow(k as u32 - 1);
    let mut out = vec![0.0; level.len()];
    for i in 0..dim {
        let inner = right_bracket(&level[i * tail_len..(i + 1) * tail_len], dim, k - 1);
        for (t, &val) in inner.iter().enumerate() {
            if val == 0.0 {
                continue;
            }
            // e_i ⊗ T - T ⊗ e_i
            out[i * tail_len + t] += val;
            out[t * dim + i] -= val;
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LevelRepr {
    Scalar(f64),
    Block(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupElementRepr {
    d: usize,
    #[serde(rename = "N")]
    depth: usize,
    levels: Vec<LevelRepr>,
}

impl Serialize for GroupElement {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let shape = self.shape();
        let levels = (0..=shape.depth())
            .map(|k| {
                if k == 0 {
                    LevelRepr::Scalar(self.0.scalar())
                } else {
                    LevelRepr::Block(self.level(k).to_vec())
                }
            })
            .collect();
        GroupElementRepr {
            d: shape.dim(),
            depth: shape.depth(),
            levels,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = GroupElementRepr::deserialize(deserializer)?;
        group_from_repr(repr).map_err(serde::de::Error::custom)
    }
}

fn group_from_repr(repr: GroupElementRepr) -> Result<GroupElement> {
    let shape = AlgebraShape::new(repr.d, repr.depth)?;
    if repr.levels.len() != shape.depth() + 1 {
        return Err(invalid(format!(
            "expected {} levels, got {}",
            shape.depth() + 1,
            repr.levels.len()
        )));
    }
    let mut levels = Vec::with_capacity(repr.levels.len());
    for (k, level) in repr.levels.into_iter().enumerate() {
        match (k, level) {
            (0, LevelRepr::Scalar(s)) => levels.push(vec![s]),
            (0, LevelRepr::Block(_)) => return Err(invalid("level 0 must be a scalar")),
            (_, LevelRepr::Block(b)) => levels.push(b),
            (_, LevelRepr::Scalar(_)) => {
                return Err(invalid(format!("level {k} must be an array")))
            }
        }
    }
    GroupElement::from_levels(shape, &levels)
}

impl GroupElement {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("group element serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(d: usize, n: usize) -> AlgebraShape {
        AlgebraShape::new(d, n).unwrap()
    }

    fn generator(shape: AlgebraShape, i: usize) -> LieSeries {
        let mut v = vec![0.0; shape.dim()];
        v[i] = 1.0;
        LieSeries::from_vector(shape, &v).unwrap()
    }

    #[test]
    fn shape_rejects_degenerate_and_huge() {
        assert!(AlgebraShape::new(0, 2).is_err());
        assert!(AlgebraShape::new(2, 0).is_err());
        assert!(AlgebraShape::new(1000, 1000).is_err());
        let s = shape(3, 4);
        assert_eq!(s.len(), 1 + 3 + 9 + 27 + 81);
        assert_eq!(s.level_offset(2), 4);
    }

    #[test]
    fn exp_of_generator_d2_n3() {
        let s = shape(2, 3);
        let g = generator(s, 0).exp();
        assert_eq!(g.level(1), &[1.0, 0.0]);
        assert_eq!(g.level(2), &[0.5, 0.0, 0.0, 0.0]);
        assert!((g.level(3)[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!(g.level(3)[1..].iter().all(|c| *c == 0.0));
    }

    #[test]
    fn product_of_generators() {
        let s = shape(2, 2);
        let g = generator(s, 0).exp().multiply(&generator(s, 1).exp()).unwrap();
        assert_eq!(g.level(1), &[1.0, 1.0]);
        assert_eq!(g.level(2), &[0.5, 1.0, 0.0, 0.5]);
        let log = g.log();
        assert_eq!(log.level(1), &[1.0, 1.0]);
        let l2 = log.level(2);
        for (got, want) in l2.iter().zip([0.0, 0.5, -0.5, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = GroupElement::identity(shape(2, 2));
        let b = GroupElement::identity(shape(2, 3));
        assert!(matches!(a.multiply(&b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn inverse_of_product_reverses_order() {
        let s = shape(2, 4);
        let a = generator(s, 0).exp();
        let b = generator(s, 1).exp();
        let lhs = a.multiply(&b).unwrap().inverse();
        let rhs = b.inverse().multiply(&a.inverse()).unwrap();
        assert!(lhs.series().max_abs_diff(rhs.series()).unwrap() < 1e-12);
        let rhs2 = generator(s, 1)
            .scale(-1.0)
            .exp()
            .multiply(&generator(s, 0).scale(-1.0).exp())
            .unwrap();
        assert!(lhs.series().max_abs_diff(rhs2.series()).unwrap() < 1e-12);
    }

    #[test]
    fn dilation_examples() {
        let s = shape(2, 3);
        let g = generator(s, 0).exp();
        assert_eq!(g.dilate(2.0).level(2)[0], 2.0);
        assert_eq!(g.dilate(0.0), GroupElement::identity(s));
        assert_eq!(g.dilate(1.0), g);
    }

    #[test]
    fn homogeneous_norm_examples() {
        let s = shape(2, 3);
        assert_eq!(GroupElement::identity(s).homogeneous_norm(), 0.0);
        let g = generator(s, 0).scale(2.0).exp();
        assert!((g.homogeneous_norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_level_two_is_not_group_like() {
        let s = shape(2, 2);
        let g = GroupElement::from_levels(s, &[vec![1.0], vec![0.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]])
            .unwrap();
        assert_eq!(g.log().level(2), &[0.0, 1.0, 1.0, 0.0]);
        assert!(!g.is_group_like(1e-8));
        assert!(generator(s, 1).exp().is_group_like(1e-12));
    }

    #[test]
    fn right_bracket_degree_two() {
        // r(e1⊗e2) = e1⊗e2 - e2⊗e1
        let r = right_bracket(&[0.0, 1.0, 0.0, 0.0], 2, 2);
        assert_eq!(r, vec![0.0, 1.0, -1.0, 0.0]);
    }

    #[test]
    fn mul_segment_matches_general_product() {
        let s = shape(3, 4);
        let mut g = LieSeries::dynkin_projection(
            &TensorSeries::from_flat(s, (0..s.len()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 7.0).collect())
                .unwrap(),
        )
        .exp();
        let v = [0.3, -0.7, 0.2];
        let expected = g
            .multiply(&LieSeries::from_vector(s, &v).unwrap().exp())
            .unwrap();
        g.mul_segment(&v);
        assert!(g.series().max_abs_diff(expected.series()).unwrap() < 1e-13);
    }

    #[test]
    fn json_layout() {
        let s = shape(2, 2);
        let g = generator(s, 0).exp();
        assert_eq!(
            g.to_json(),
            r#"{"d":2,"N":2,"levels":[1.0,[1.0,0.0],[0.5,0.0,0.0,0.0]]}"#
        );
        let back = GroupElement::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn json_rejects_malformed() {
        for bad in [
            r#"{"d":2,"N":1,"levels":[0.5,[1.0,0.0]]}"#,
            r#"{"d":2,"N":1,"levels":[1.0,[1.0]]}"#,
            r#"{"d":2,"N":2,"levels":[1.0,[1.0,0.0]]}"#,
            r#"{"d":2,"N":1,"levels":[[1.0],[1.0,0.0]]}"#,
            r#"{"d":0,"N":1,"levels":[1.0]}"#,
            r#"{"d":2,"N":1,"levels":[1.0,3.0]}"#,
        ] {
            assert!(GroupElement::from_json(bad).is_err(), "{bad}");
        }
    }
}
