//! Piecewise-linear paths, their step-N signatures, and `G^N`-valued paths on
//! a dissection of `[0, 1]` with Hölder-type norms and metrics.
//!
//! All Hölder quantities use the Hölder modulus `ω(s, t) = t - s` and the
//! homogeneous norm of [`GroupElement::homogeneous_norm`] as the norm on the
//! group. Suprema run over pairs of grid points only.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor_group::{AlgebraShape, GroupElement, LieSeries};

/// Relative slack used when comparing interval lengths against a scale.
const LENGTH_SLACK: f64 = 1e-12;

/// Continuous piecewise-linear path in `R^d` with breakpoints at `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearPath {
    dim: usize,
    times: Vec<f64>,
    /// Breakpoints, flattened row-major (`times.len() * dim` entries).
    points: Vec<f64>,
}

impl PiecewiseLinearPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("path needs at least one breakpoint"))?;
        if points.iter().any(|p| p.len() != dim) {
            return Err(invalid("all breakpoints must have the same dimension"));
        }
        Self::from_flat(dim, times, points.concat())
    }

    pub fn from_flat(dim: usize, times: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("path dimension must be positive"));
        }
        if times.is_empty() {
            return Err(invalid("path needs at least one breakpoint"));
        }
        if points.len() != times.len() * dim {
            return Err(invalid(format!(
                "{} times but {} coordinates for dimension {dim}",
                times.len(),
                points.len()
            )));
        }
        if times.iter().chain(&points).any(|v| !v.is_finite()) {
            return Err(invalid("path values must be finite"));
        }
        if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("path times must lie in [0, 1]"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("path times must be strictly increasing"));
        }
        Ok(Self { dim, times, points })
    }

    /// Straight path from `start` to `end` over `[t0, t1]`.
    pub fn segment(t0: f64, t1: f64, start: &[f64], end: &[f64]) -> Result<Self> {
        Self::new(vec![t0, t1], vec![start.to_vec(), end.to_vec()])
    }

    /// Path on `[0, 1]` through `origin + cumulative increments`, uniformly timed.
    pub fn from_increments(origin: &[f64], increments: &[Vec<f64>]) -> Result<Self> {
        let m = increments.len();
        let times = if m == 0 {
            vec![0.0]
        } else {
            (0..=m).map(|i| i as f64 / m as f64).collect()
        };
        let mut points = vec![origin.to_vec()];
        let mut current = origin.to_vec();
        for inc in increments {
            if inc.len() != origin.len() {
                return Err(invalid("increment dimension mismatch"));
            }
            current.iter_mut().zip(inc).for_each(|(c, v)| *c += v);
            points.push(current.clone());
        }
        Self::new(times, points)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    #[inline]
    pub fn breakpoint_count(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn segment_count(&self) -> usize {
        self.times.len() - 1
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// `x_{t_{i+1}} - x_{t_i}`.
    pub fn increment(&self, i: usize) -> Vec<f64> {
        let a = self.point(i);
        let b = self.point(i + 1);
        b.iter().zip(a).map(|(b, a)| b - a).collect()
    }

    /// Total variation `∫ |dx|`.
    pub fn length(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| {
                let a = self.point(i);
                let b = self.point(i + 1);
                a.iter().zip(b).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
            })
            .sum()
    }

    /// Value at `t`, held constant outside `[t_0, t_m]`.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        if t <= self.start_time() {
            return self.point(0).to_vec();
        }
        if t >= self.end_time() {
            return self.point(self.segment_count()).to_vec();
        }
        let j = self.segment_index(t);
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let w = (t - t0) / (t1 - t0);
        self.point(j)
            .iter()
            .zip(self.point(j + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Index `j` of the segment `[t_j, t_{j+1})` containing `t`.
    fn segment_index(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.saturating_sub(1).min(self.segment_count().saturating_sub(1))
    }

    /// Same trace run backwards on the same time interval.
    pub fn reversed(&self) -> PiecewiseLinearPath {
        let (t0, t1) = (self.start_time(), self.end_time());
        let n = self.breakpoint_count();
        let times = self.times.iter().rev().map(|t| t0 + t1 - t).collect::<Vec<_>>();
        let mut points = Vec::with_capacity(self.points.len());
        for i in (0..n).rev() {
            points.extend_from_slice(self.point(i));
        }
        // Reflection can perturb the end points by an ulp.
        let mut times = times;
        times[0] = t0;
        times[n - 1] = t1;
        Self {
            dim: self.dim,
            times,
            points,
        }
    }

    /// The path `λ x`.
    pub fn scaled(&self, lambda: f64) -> PiecewiseLinearPath {
        Self {
            dim: self.dim,
            times: self.times.clone(),
            points: self.points.iter().map(|p| p * lambda).collect(),
        }
    }

    /// Moment curve `x^i(t) = t^i / i!` sampled on `2^level` uniform cells.
    /// Every signature level of it is nonzero.
    pub fn moment_curve(d: usize, level: usize) -> Result<PiecewiseLinearPath> {
        let times = RoughPathGrid::uniform_times(1 << level);
        let points = times
            .iter()
            .map(|t| {
                let mut term = 1.0;
                (1..=d)
                    .map(|i| {
                        term *= t / i as f64;
                        term
                    })
                    .collect()
            })
            .collect();
        Self::new(times, points)
    }

    /// Same path with additional breakpoints inserted at `extra` times.
    pub fn with_breakpoints(&self, extra: &[f64]) -> Result<PiecewiseLinearPath> {
        let mut times: Vec<f64> = self
            .times
            .iter()
            .copied()
            .chain(extra.iter().copied().filter(|t| {
                *t > self.start_time() && *t < self.end_time()
            }))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let points = times.iter().flat_map(|&t| self.value_at(t)).collect();
        Self::from_flat(self.dim, times, points)
    }

    /// Reparametrizes the path affinely onto `[s, t]`.
    pub fn retimed(&self, s: f64, t: f64) -> Result<PiecewiseLinearPath> {
        if !(s < t) {
            return Err(invalid("retimed interval must be non-degenerate"));
        }
        let (t0, t1) = (self.start_time(), self.end_time());
        let n = self.breakpoint_count();
        if n == 1 {
            return Self::from_flat(self.dim, vec![s], self.points.clone());
        }
        let mut times: Vec<f64> = self
            .times
            .iter()
            .map(|u| s + (u - t0) / (t1 - t0) * (t - s))
            .collect();
        times[0] = s;
        times[n - 1] = t;
        Self::from_flat(self.dim, times, self.points.clone())
    }

    /// Parses the `t,x1,...,xd` CSV layout.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let dim = header.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| {
            Error::Parse("path header must be t,x1,...,xd with d >= 1".into())
        })?;
        if &header[0] != "t"
            || (1..=dim).any(|i| header[i] != format!("x{i}"))
        {
            return Err(Error::Parse(format!(
                "unexpected path header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != dim + 1 {
                return Err(Error::Parse("ragged path row".into()));
            }
            let mut values = record.iter().map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number {f:?}: {e}")))
            });
            times.push(values.next().expect("non-empty record")?);
            for v in values {
                points.push(v?);
            }
        }
        Self::from_flat(dim, times, points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.dim {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:?}"));
            for v in self.point(i) {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Step-N signature of a straight segment: `exp(Δx)`.
pub fn segment_signature(delta: &[f64], shape: AlgebraShape) -> Result<GroupElement> {
    Ok(LieSeries::from_vector(shape, delta)?.exp())
}

/// `S_N(x)_{s,t}` as the Chen product of the (partial) segment signatures.
pub fn path_signature(
    x: &PiecewiseLinearPath,
    s: f64,
    t: f64,
    shape: AlgebraShape,
) -> Result<GroupElement> {
    if x.dim() != shape.dim() {
        return Err(invalid(format!(
            "path dimension {} does not match d = {}",
            x.dim(),
            shape.dim()
        )));
    }
    if !(s.is_finite() && t.is_finite()) || s > t || s < 0.0 || t > 1.0 {
        return Err(invalid(format!("need 0 <= s <= t <= 1, got s = {s}, t = {t}")));
    }
    let mut g = GroupElement::identity(shape);
    if s == t || x.segment_count() == 0 {
        return Ok(g);
    }
    let lo = s.max(x.start_time());
    let hi = t.min(x.end_time());
    if lo >= hi {
        return Ok(g);
    }
    let mut delta = vec![0.0; x.dim()];
    let first = x.segment_index(lo);
    for j in first..x.segment_count() {
        let (t0, t1) = (x.times[j], x.times[j + 1]);
        if t0 >= hi {
            break;
        }
        let a = lo.max(t0);
        let b = hi.min(t1);
        if b <= a {
            continue;
        }
        let inc = x.increment(j);
        if a == t0 && b == t1 {
            delta.copy_from_slice(&inc);
        } else {
            let w = (b - a) / (t1 - t0);
            delta.iter_mut().zip(&inc).for_each(|(d, v)| *d = w * v);
        }
        g.mul_segment(&delta);
    }
    Ok(g)
}

/// Signatures `S_N(x)_{t_0, t_i}` for every breakpoint `t_i`.
pub fn prefix_signatures(x: &PiecewiseLinearPath, shape: AlgebraShape) -> Result<Vec<GroupElement>> {
    if x.dim() != shape.dim() {
        return Err(invalid("path dimension does not match the algebra"));
    }
    let mut out = Vec::with_capacity(x.breakpoint_count());
    let mut g = GroupElement::identity(shape);
    out.push(g.clone());
    for j in 0..x.segment_count() {
        g.mul_segment(&x.increment(j));
        out.push(g.clone());
    }
    Ok(out)
}

/// `G^N`-valued path on a dissection of `[0, 1]`, stored through its cell
/// increments `x_{t_i, t_{i+1}}`.
#[derive(Clone, Debug)]
pub struct RoughPathGrid {
    shape: AlgebraShape,
    times: Vec<f64>,
    increments: Vec<GroupElement>,
    p: f64,
    skeleton: Option<Arc<PiecewiseLinearPath>>,
}

impl RoughPathGrid {
    pub fn new(
        times: Vec<f64>,
        increments: Vec<GroupElement>,
        p: f64,
        skeleton: Option<Arc<PiecewiseLinearPath>>,
    ) -> Result<Self> {
        validate_dissection(&times)?;
        if increments.len() + 1 != times.len() {
            return Err(invalid(format!(
                "{} grid times need {} increments, got {}",
                times.len(),
                times.len() - 1,
                increments.len()
            )));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(invalid(format!("roughness p must be >= 1, got {p}")));
        }
        let shape = increments[0].shape();
        for g in &increments {
            shape.ensure_same(&g.shape())?;
        }
        if let Some(sk) = &skeleton {
            if sk.dim() != shape.dim() {
                return Err(invalid("skeleton dimension does not match the increments"));
            }
        }
        Ok(Self {
            shape,
            times,
            increments,
            p,
            skeleton,
        })
    }

    /// Grid whose increments are the signatures of `skeleton` over the cells.
    pub fn from_skeleton(
        skeleton: Arc<PiecewiseLinearPath>,
        times: Vec<f64>,
        shape: AlgebraShape,
        p: f64,
    ) -> Result<Self> {
        validate_dissection(&times)?;
        let increments = times
            .windows(2)
            .map(|w| path_signature(&skeleton, w[0], w[1], shape))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, increments, p, Some(skeleton))
    }

    /// Uniform dissection `{k / cells}` of `[0, 1]`.
    pub fn uniform_times(cells: usize) -> Vec<f64> {
        (0..=cells).map(|k| k as f64 / cells as f64).collect()
    }

    #[inline]
    pub fn shape(&self) -> AlgebraShape {
        self.shape
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn increments(&self) -> &[GroupElement] {
        &self.increments
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.times.clone(), self.increments.clone(), p, self.skeleton.clone())
    }

    pub fn skeleton(&self) -> Option<&Arc<PiecewiseLinearPath>> {
        self.skeleton.as_ref()
    }

    pub fn cell_count(&self) -> usize {
        self.increments.len()
    }

    /// `x_{t_i, t_j}` as the Chen product of cells `i..j`.
    pub fn increment_between(&self, i: usize, j: usize) -> Result<GroupElement> {
        if i > j || j >= self.times.len() {
            return Err(invalid(format!("bad grid index pair ({i}, {j})")));
        }
        let mut g = GroupElement::identity(self.shape);
        for inc in &self.increments[i..j] {
            g = g.multiply(inc)?;
        }
        Ok(g)
    }

    /// Largest Chen defect `|x_{t_0,t_i} ⊗ x_{t_i,t_j} - x_{t_0,t_j}|` against
    /// the skeleton signatures, if a skeleton is attached.
    pub fn chen_defect(&self) -> Result<Option<f64>> {
        let Some(sk) = &self.skeleton else {
            return Ok(None);
        };
        let mut worst: f64 = 0.0;
        let mut running = GroupElement::identity(self.shape);
        for (i, inc) in self.increments.iter().enumerate() {
            running = running.multiply(inc)?;
            let direct = path_signature(sk, self.times[0], self.times[i + 1], self.shape)?;
            worst = worst.max(running.series().max_abs_diff(direct.series())?);
        }
        Ok(Some(worst))
    }

    /// Restriction of every increment to levels `0..=depth`.
    pub fn project(&self, depth: usize) -> Result<RoughPathGrid> {
        let increments = self
            .increments
            .iter()
            .map(|g| g.project(depth))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), increments, self.p, self.skeleton.clone())
    }

    /// Canonical lift to depth `depth`, recomputed from the piecewise-linear skeleton.
    pub fn lift(&self, depth: usize) -> Result<RoughPathGrid> {
        if depth <= self.shape.depth() {
            return Err(invalid(format!(
                "lift target depth {depth} must exceed current depth {}",
                self.shape.depth()
            )));
        }
        let skeleton = self.skeleton.clone().ok_or_else(|| {
            Error::Unsupported("lift requires a piecewise-linear skeleton".into())
        })?;
        Self::from_skeleton(skeleton, self.times.clone(), self.shape.with_depth(depth)?, self.p)
    }

    /// Grid of `δ_λ x`, with the skeleton scaled by `λ`.
    pub fn dilate(&self, lambda: f64) -> Result<RoughPathGrid> {
        let increments = self.increments.iter().map(|g| g.dilate(lambda)).collect();
        let skeleton = self.skeleton.as_ref().map(|s| Arc::new(s.scaled(lambda)));
        Self::new(self.times.clone(), increments, self.p, skeleton)
    }

    /// `max over grid pairs s < t of |||x_{s,t}||| / (t - s)^{1/p}`.
    pub fn hoelder_norm(&self) -> f64 {
        self.restricted_sup(f64::INFINITY)
    }

    /// `r(δ; x)`: the Hölder supremum over grid pairs with `t - s <= δ`.
    pub fn small_scale_modulus(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(invalid(format!("modulus scale must be in (0, 1], got {delta}")));
        }
        Ok(self.restricted_sup(delta))
    }

    fn restricted_sup(&self, delta: f64) -> f64 {
        let inv_p = 1.0 / self.p;
        let n = self.times.len();
        (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut g = GroupElement::identity(self.shape);
                let mut best: f64 = 0.0;
                for j in i + 1..n {
                    let width = self.times[j] - self.times[i];
                    if width > delta * (1.0 + LENGTH_SLACK) {
                        break;
                    }
                    g = g.multiply(&self.increments[j - 1]).expect("shared shape");
                    best = best.max(g.homogeneous_norm() / width.powf(inv_p));
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }

    fn ensure_comparable(&self, other: &RoughPathGrid) -> Result<()> {
        self.shape.ensure_same(&other.shape)?;
        if self.times != other.times {
            return Err(invalid("rough paths live on different grids"));
        }
        Ok(())
    }

    /// `sup over grid pairs of |||x_{s,t}^{-1} ⊗ x̃_{s,t}||| / (t - s)^{1/p}`.
    pub fn hoelder_distance(&self, other: &RoughPathGrid) -> Result<f64> {
        self.ensure_comparable(other)?;
        let inv_p = 1.0 / self.p;
        Ok(self.pairwise_max(other, |dist, width| dist / width.powf(inv_p)))
    }

    /// `d_∞(x, x̃) = sup over grid pairs of |||x_{s,t}^{-1} ⊗ x̃_{s,t}|||`.
    pub fn sup_distance(&self, other: &RoughPathGrid) -> Result<f64> {
        self.ensure_comparable(other)?;
        Ok(self.pairwise_max(other, |dist, _| dist))
    }

    fn pairwise_max<F>(&self, other: &RoughPathGrid, weight: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let n = self.times.len();
        (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut a = GroupElement::identity(self.shape);
                let mut b = GroupElement::identity(self.shape);
                let mut best: f64 = 0.0;
                for j in i + 1..n {
                    a = a.multiply(&self.increments[j - 1]).expect("shared shape");
                    b = b.multiply(&other.increments[j - 1]).expect("shared shape");
                    let dist = a.inverse().multiply(&b).expect("shared shape").homogeneous_norm();
                    best = best.max(weight(dist, self.times[j] - self.times[i]));
                }
                best
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Serializes to the grid JSON layout; `skeleton_ref` names the path file.
    pub fn to_json(&self, skeleton_ref: Option<&str>) -> String {
        let repr = GridRepr {
            p: self.p,
            times: self.times.clone(),
            increments: self.increments.clone(),
            skeleton: skeleton_ref.map(str::to_owned),
        };
        serde_json::to_string(&repr).expect("grid serializes")
    }

    /// Parses the grid JSON layout. A skeleton reference is handed to
    /// `resolve`; pass `|_| Ok(None)` to ignore it.
    pub fn from_json<F>(text: &str, resolve: F) -> Result<Self>
    where
        F: FnOnce(&str) -> Result<Option<PiecewiseLinearPath>>,
    {
        let repr: GridRepr = serde_json::from_str(text)?;
        if repr.increments.is_empty() {
            return Err(invalid("grid needs at least one increment"));
        }
        let skeleton = match &repr.skeleton {
            Some(r) => resolve(r)?.map(Arc::new),
            None => None,
        };
        Self::new(repr.times, repr.increments, repr.p, skeleton)
    }

    /// Loads a grid file, resolving the skeleton relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, |r| PiecewiseLinearPath::load_csv(&base.join(r)).map(Some))
    }
}

fn validate_dissection(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(invalid("a dissection needs at least two times"));
    }
    if times.iter().any(|t| !t.is_finite() || !(0.0..=1.0).contains(t)) {
        return Err(invalid("dissection times must lie in [0, 1]"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("dissection times must be strictly increasing"));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    p: f64,
    times: Vec<f64>,
    increments: Vec<GroupElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    skeleton: Option<String>,
}
