//! Truncated multivariate Taylor polynomials in `e` variables.
//!
//! Coefficients are stored densely by exponent vector in mixed radix
//! `order + 1`; entries of total degree above `order` stay zero, so adding
//! exponent vectors never carries.

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Jet {
    vars: usize,
    order: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(vars: usize, order: usize) -> Self {
        Self {
            vars,
            order,
            coeffs: vec![0.0; (order + 1).pow(vars as u32)],
        }
    }

    pub fn constant(vars: usize, order: usize, c: f64) -> Self {
        let mut j = Self::zero(vars, order);
        j.coeffs[0] = c;
        j
    }

    /// `y_l + h_l`, the jet of a coordinate function at `y`.
    pub fn coordinate(vars: usize, order: usize, l: usize, y_l: f64) -> Self {
        let mut j = Self::constant(vars, order, y_l);
        if order >= 1 {
            j.coeffs[(order + 1).pow(l as u32)] = 1.0;
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn degree_of(&self, mut idx: usize) -> usize {
        let base = self.order + 1;
        let mut total = 0;
        for _ in 0..self.vars {
            total += idx % base;
            idx /= base;
        }
        total
    }

    fn support(&self) -> Vec<(usize, usize, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, &c)| (i, self.degree_of(i), c))
            .collect()
    }

    pub fn add_assign(&mut self, other: &Jet) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &Jet, s: f64) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let mut out = Jet::zero(self.vars, self.order);
        let rhs = other.support();
        for (ia, da, ca) in self.support() {
            for &(ib, db, cb) in &rhs {
                if da + db <= self.order {
                    out.coeffs[ia + ib] += ca * cb;
                }
            }
        }
        out
    }

    /// `∂/∂y_l`; the top degree becomes zero.
    pub fn derivative(&self, l: usize) -> Jet {
        let base = self.order + 1;
        let stride = base.pow(l as u32);
        let mut out = Jet::zero(self.vars, self.order);
        for (idx, deg, _) in self.support() {
            let exp_l = (idx / stride) % base;
            if exp_l == 0 || deg == 0 {
                continue;
            }
            out.coeffs[idx - stride] += exp_l as f64 * self.coeffs[idx];
        }
        out
    }
}
