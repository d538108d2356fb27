use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::jet::Jet;
use crate::error::{invalid, Result};

/// Derivative order assumed for analytic kinds; their jets are exact.
pub const ANALYTIC_ORDER: usize = 16;

pub type FieldFn = dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync;

/// How the fields `V_1, ..., V_d` are represented.
#[derive(Clone)]
pub enum FieldKind {
    /// `V_i(y) = A_i y + b_i`; `a[i]` is row-major `e × e`.
    LinearAffine { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    /// `V_i(y)_c = Σ_k Σ_l T_{i,k}[c, l_1..l_k] y_{l_1} ⋯ y_{l_k}`;
    /// `coefficients[i][k]` is row-major `e × e^k`.
    Polynomial { coefficients: Vec<Vec<Vec<f64>>> },
    /// Black box; derivatives by central differences.
    Generic(Arc<FieldFn>),
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::LinearAffine { a, b } => f
                .debug_struct("LinearAffine")
                .field("a", a)
                .field("b", b)
                .finish(),
            FieldKind::Polynomial { coefficients } => f
                .debug_struct("Polynomial")
                .field("coefficients", coefficients)
                .finish(),
            FieldKind::Generic(_) => f.write_str("Generic(..)"),
        }
    }
}

/// `d` vector fields on `R^e`.
#[derive(Clone, Debug)]
pub struct VectorFieldFamily {
    name: Option<String>,
    state_dim: usize,
    driver_dim: usize,
    kind: FieldKind,
    order: usize,
}

impl VectorFieldFamily {
    pub fn linear_affine(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let d = a.len();
        if d == 0 || b.len() != d {
            return Err(invalid("linear-affine family needs d >= 1 matrices and as many offsets"));
        }
        let e = b[0].len();
        if e == 0 {
            return Err(invalid("state dimension must be >= 1"));
        }
        for (ai, bi) in a.iter().zip(&b) {
            if ai.len() != e * e || bi.len() != e {
                return Err(invalid(format!("expected {e}x{e} matrices and length-{e} offsets")));
            }
        }
        check_finite(a.iter().chain(&b).flatten())?;
        Ok(Self {
            name: None,
            state_dim: e,
            driver_dim: d,
            kind: FieldKind::LinearAffine { a, b },
            order: ANALYTIC_ORDER,
        })
    }

    pub fn polynomial(state_dim: usize, coefficients: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let e = state_dim;
        if e == 0 || coefficients.is_empty() {
            return Err(invalid("polynomial family needs e >= 1 and d >= 1"));
        }
        for field in &coefficients {
            for (k, block) in field.iter().enumerate() {
                if block.len() != e.pow(k as u32 + 1) {
                    return Err(invalid(format!(
                        "degree-{k} block must have e^{} = {} entries, got {}",
                        k + 1,
                        e.pow(k as u32 + 1),
                        block.len()
                    )));
                }
            }
        }
        check_finite(coefficients.iter().flatten().flatten())?;
        Ok(Self {
            name: None,
            state_dim: e,
            driver_dim: coefficients.len(),
            kind: FieldKind::Polynomial { coefficients },
            order: ANALYTIC_ORDER,
        })
    }

    /// `eval(i, y)` returns `V_i(y)`; `order` is the derivative order the
    /// caller vouches for.
    pub fn generic<F>(state_dim: usize, driver_dim: usize, order: usize, eval: F) -> Result<Self>
    where
        F: Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if state_dim == 0 || driver_dim == 0 {
            return Err(invalid("generic family needs e >= 1 and d >= 1"));
        }
        Ok(Self {
            name: None,
            state_dim,
            driver_dim,
            kind: FieldKind::Generic(Arc::new(eval)),
            order,
        })
    }

    /// Same fields seen as a black box (derivatives by differences).
    pub fn to_generic(&self, order: usize) -> Self {
        let inner = self.clone();
        let mut out = Self::generic(self.state_dim, self.driver_dim, order, move |i, y| inner.eval(i, y))
            .expect("dimensions already validated");
        out.name = self.name.clone();
        out
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn driver_dim(&self) -> usize {
        self.driver_dim
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_generic(&self) -> bool {
        matches!(self.kind, FieldKind::Generic(_))
    }

    /// `V_i(y)` for a 0-based field index.
    pub fn eval(&self, i: usize, y: &[f64]) -> Vec<f64> {
        let e = self.state_dim;
        match &self.kind {
            FieldKind::LinearAffine { a, b } => (0..e)
                .map(|r| b[i][r] + (0..e).map(|c| a[i][r * e + c] * y[c]).sum::<f64>())
                .collect(),
            FieldKind::Polynomial { coefficients } => {
                let mut out = vec![0.0; e];
                let mut monomials = vec![1.0];
                for block in &coefficients[i] {
                    let cols = monomials.len();
                    for (r, o) in out.iter_mut().enumerate() {
                        *o += block[r * cols..(r + 1) * cols]
                            .iter()
                            .zip(&monomials)
                            .map(|(t, m)| t * m)
                            .sum::<f64>();
                    }
                    monomials = monomials.iter().flat_map(|m| y.iter().map(move |v| m * v)).collect();
                }
                out
            }
            FieldKind::Generic(f) => f(i, y),
        }
    }

    /// Sum `Σ_i u_i V_i(y)`, the autonomous field along direction `u`.
    pub fn eval_along(&self, u: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.eval(i, y)) {
                *o += ui * v;
            }
        }
    }

    /// Taylor jet of `V_i` at `y` up to `order` (analytic kinds only).
    pub(crate) fn jet(&self, i: usize, y: &[f64], order: usize) -> Vec<Jet> {
        let e = self.state_dim;
        let coords: Vec<Jet> = (0..e).map(|l| Jet::coordinate(e, order, l, y[l])).collect();
        match &self.kind {
            FieldKind::LinearAffine { a, b } => (0..e)
                .map(|r| {
                    let mut j = Jet::constant(e, order, b[i][r]);
                    for c in 0..e {
                        j.add_scaled(&coords[c], a[i][r * e + c]);
                    }
                    j
                })
                .collect(),
            FieldKind::Polynomial { coefficients } => {
                let mut out = vec![Jet::zero(e, order); e];
                let mut monomials = vec![Jet::constant(e, order, 1.0)];
                for block in &coefficients[i] {
                    let cols = monomials.len();
                    for (r, o) in out.iter_mut().enumerate() {
                        for (t, m) in block[r * cols..(r + 1) * cols].iter().zip(&monomials) {
                            if *t != 0.0 {
                                o.add_scaled(m, *t);
                            }
                        }
                    }
                    monomials = monomials
                        .iter()
                        .flat_map(|m| coords.iter().map(move |c| m.mul(c)))
                        .collect();
                }
                out
            }
            FieldKind::Generic(_) => unreachable!("generic fields have no jets"),
        }
    }

    /// Parses a JSON description, either `{"registry": name}` or an explicit
    /// `linear-affine` / `polynomial` family.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("registry").is_some() {
            let named: RegistrySpec = serde_json::from_value(value)?;
            return Self::builtin(&named.registry);
        }
        match serde_json::from_value::<ExplicitSpec>(value)? {
            ExplicitSpec::LinearAffine { e, d, a, b, name } => {
                let b = b.unwrap_or_else(|| vec![vec![0.0; e]; d]);
                if a.len() != d {
                    return Err(invalid(format!("declared d = {d} but {} matrices given", a.len())));
                }
                let fam = Self::linear_affine(a, b)?;
                if fam.state_dim != e {
                    return Err(invalid(format!("declared e = {e} but offsets have length {}", fam.state_dim)));
                }
                Ok(match name {
                    Some(n) => fam.with_name(n),
                    None => fam,
                })
            }
            ExplicitSpec::Polynomial {
                e,
                d,
                coefficients,
                name,
            } => {
                if coefficients.len() != d {
                    return Err(invalid(format!("declared d = {d} but {} fields given", coefficients.len())));
                }
                let fam = Self::polynomial(e, coefficients)?;
                Ok(match name {
                    Some(n) => fam.with_name(n),
                    None => fam,
                })
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Built-in families by registry name.
    pub fn builtin(name: &str) -> Result<Self> {
        let fam = match name {
            // V(y) = y on R.
            "linear1d" => Self::linear_affine(vec![vec![1.0]], vec![vec![0.0]])?,
            // Two non-commuting linear fields on R^2.
            "linear2d" => Self::linear_affine(
                vec![vec![0.3, 1.2, -0.8, 0.1], vec![-0.2, 0.5, 1.0, 0.4]],
                vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            )?,
            // Rotations of R^3 about the x and y axes.
            "rotation2d" => Self::linear_affine(
                vec![
                    vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
                ],
                vec![vec![0.0; 3], vec![0.0; 3]],
            )?,
            "constant2d" => Self::linear_affine(
                vec![vec![0.0; 4], vec![0.0; 4]],
                vec![vec![1.0, -0.5], vec![0.25, 2.0]],
            )?,
            // V_1 = (1 - y1^2, y2 / 2), V_2 = (y1 y2 / 2, 1 - y2^2).
            "polynomial_saturating" => Self::polynomial(
                2,
                vec![
                    vec![vec![1.0, 0.0], vec![0.0, 0.0, 0.0, 0.5], vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]],
                    vec![vec![0.0, 1.0], vec![0.0; 4], vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]],
                ],
            )?,
            // V_1 = sin(y), V_2 = cos(y) on R, derivatives by differences.
            "trig_generic" => Self::generic(1, 2, 4, |i, y| {
                vec![if i == 0 { y[0].sin() } else { y[0].cos() }]
            })?,
            other => return Err(invalid(format!("unknown vector field family '{other}'"))),
        };
        Ok(fam.with_name(name))
    }
}

fn check_finite<'a>(mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.any(|v| !v.is_finite()) {
        Err(invalid("vector field coefficients must be finite"))
    } else {
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum ExplicitSpec {
    #[serde(rename = "linear-affine")]
    LinearAffine {
        e: usize,
        d: usize,
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Option<Vec<Vec<f64>>>,
        name: Option<String>,
    },
    #[serde(rename = "polynomial")]
    Polynomial {
        e: usize,
        d: usize,
        coefficients: Vec<Vec<Vec<f64>>>,
        name: Option<String>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistrySpec {
    registry: String,
}
