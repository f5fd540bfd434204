//! Truncated power-series arithmetic backing the kernel calculus.
//!
//! Two representations are used. [`EvenSeries`] stores an even function of the
//! wavenumber as a polynomial in y = xi^2 and carries the exact Taylor data of
//! the built-in and composed symbols. [`Jet`] is a full truncated Taylor
//! expansion in xi used to expand parsed symbol expressions at the origin.

use crate::error::{Error, Result};

/// Even power series: `coeffs[m]` is the coefficient of xi^(2m).
#[derive(Debug, Clone, PartialEq)]
pub struct EvenSeries {
    coeffs: Vec<f64>,
}

impl EvenSeries {
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zero(len: usize) -> Self {
        Self::from_coeffs(vec![0.0; len.max(1)])
    }

    pub fn one(len: usize) -> Self {
        let mut s = Self::zero(len);
        s.coeffs[0] = 1.0;
        s
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coefficient of xi^(2m); zero beyond the stored truncation order.
    pub fn coeff(&self, m: usize) -> f64 {
        self.coeffs.get(m).copied().unwrap_or(0.0)
    }

    pub fn add_scaled(&self, other: &EvenSeries, scale: f64) -> EvenSeries {
        let len = self.len().max(other.len());
        let coeffs = (0..len)
            .map(|m| self.coeff(m) + scale * other.coeff(m))
            .collect();
        Self::from_coeffs(coeffs)
    }

    /// Product truncated to `len` terms.
    pub fn mul(&self, other: &EvenSeries, len: usize) -> EvenSeries {
        let mut coeffs = vec![0.0; len.max(1)];
        for (m, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..=m {
                acc += self.coeff(i) * other.coeff(m - i);
            }
            *c = acc;
        }
        Self::from_coeffs(coeffs)
    }

    /// Argument scaling xi -> c*xi, i.e. y -> c^2 * y.
    pub fn scale_arg(&self, c: f64) -> EvenSeries {
        let c2 = c * c;
        let mut factor = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| {
                let v = a * factor;
                factor *= c2;
                v
            })
            .collect();
        Self::from_coeffs(coeffs)
    }

    /// Multiplication by y^k (a shift of the coefficients).
    pub fn shift(&self, k: usize) -> EvenSeries {
        let mut coeffs = vec![0.0; self.len() + k];
        for (m, a) in self.coeffs.iter().enumerate() {
            coeffs[m + k] = *a;
        }
        Self::from_coeffs(coeffs)
    }

    /// Reciprocal series truncated to `len` terms; requires a nonzero constant term.
    pub fn invert(&self, len: usize) -> Result<EvenSeries> {
        let a0 = self.coeff(0);
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::InvalidKernel {
                reason: "series has vanishing constant term, cannot invert".into(),
            });
        }
        let mut b = vec![0.0; len.max(1)];
        b[0] = 1.0 / a0;
        for m in 1..b.len() {
            let mut acc = 0.0;
            for i in 1..=m {
                acc += self.coeff(i) * b[m - i];
            }
            b[m] = -acc / a0;
        }
        Ok(EvenSeries::from_coeffs(b))
    }
}

/// Truncated Taylor expansion in xi about 0: `c[k]` is the coefficient of xi^k.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, len: usize) -> Self {
        let mut c = vec![0.0; len.max(1)];
        c[0] = value;
        Self { c }
    }

    pub fn variable(len: usize) -> Self {
        let mut c = vec![0.0; len.max(2)];
        c[1] = 1.0;
        Self { c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.c.get(k).copied().unwrap_or(0.0)
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Jet {
        Jet {
            c: self.c.iter().map(|a| -a).collect(),
        }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let len = self.len().max(other.len());
        Jet {
            c: (0..len).map(|k| f(self.coeff(k), other.coeff(k))).collect(),
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let len = self.len().max(other.len());
        let mut c = vec![0.0; len];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += self.coeff(i) * other.coeff(k - i);
            }
            *ck = acc;
        }
        Jet { c }
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        let b0 = other.coeff(0);
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::ExprParse(
                "division by an expression vanishing at xi = 0".into(),
            ));
        }
        let len = self.len().max(other.len());
        let mut c = vec![0.0; len];
        for k in 0..len {
            let mut acc = self.coeff(k);
            for i in 0..k {
                acc -= c[i] * other.coeff(k - i);
            }
            c[k] = acc / b0;
        }
        Ok(Jet { c })
    }

    pub fn exp(&self) -> Jet {
        let len = self.len();
        let mut c = vec![0.0; len];
        c[0] = self.coeff(0).exp();
        for k in 1..len {
            let mut acc = 0.0;
            for i in 1..=k {
                acc += i as f64 * self.coeff(i) * c[k - i];
            }
            c[k] = acc / k as f64;
        }
        Jet { c }
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a0 = self.coeff(0);
        if a0 <= 0.0 {
            return Err(Error::ExprParse(
                "sqrt of an expression non-positive at xi = 0".into(),
            ));
        }
        let len = self.len();
        let mut c = vec![0.0; len];
        c[0] = a0.sqrt();
        for k in 1..len {
            let mut acc = self.coeff(k);
            for i in 1..k {
                acc -= c[i] * c[k - i];
            }
            c[k] = acc / (2.0 * c[0]);
        }
        Ok(Jet { c })
    }

    pub fn ln(&self) -> Result<Jet> {
        let a0 = self.coeff(0);
        if a0 <= 0.0 {
            return Err(Error::ExprParse(
                "log of an expression non-positive at xi = 0".into(),
            ));
        }
        let len = self.len();
        let mut c = vec![0.0; len];
        c[0] = a0.ln();
        for k in 1..len {
            let mut acc = k as f64 * self.coeff(k);
            for i in 1..k {
                acc -= i as f64 * c[i] * self.coeff(k - i);
            }
            c[k] = acc / (k as f64 * a0);
        }
        Ok(Jet { c })
    }

    pub fn powi(&self, n: i64) -> Result<Jet> {
        match n {
            0 => Ok(Jet::constant(1.0, self.len())),
            n if n > 0 => {
                let mut acc = self.clone();
                for _ in 1..n {
                    acc = acc.mul(self);
                }
                Ok(acc)
            }
            n => {
                let pos = self.powi(-n)?;
                Jet::constant(1.0, self.len()).div(&pos)
            }
        }
    }

    pub fn powf(&self, e: f64) -> Result<Jet> {
        if e.fract() == 0.0 && e.abs() < 64.0 {
            return self.powi(e as i64);
        }
        let scaled = self.ln()?.mul(&Jet::constant(e, self.len()));
        Ok(scaled.exp())
    }

    /// Fold a jet of an even function into an [`EvenSeries`] with `terms` coefficients.
    ///
    /// Odd coefficients below `odd_tol` are discarded; a larger odd coefficient
    /// means the expression is not an even symbol.
    pub fn fold_even(&self, terms: usize, odd_tol: f64) -> Result<EvenSeries> {
        for k in (1..self.len()).step_by(2) {
            if self.coeff(k).abs() > odd_tol {
                return Err(Error::InvalidKernel {
                    reason: format!(
                        "symbol expansion has odd term of order {k} with coefficient {:.3e}",
                        self.coeff(k)
                    ),
                });
            }
        }
        let coeffs = (0..terms).map(|m| self.coeff(2 * m)).collect();
        Ok(EvenSeries::from_coeffs(coeffs))
    }
}
