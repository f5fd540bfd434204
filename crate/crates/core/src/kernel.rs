//! Kernel calculus: symbols, moments, matching orders and kernel constructors.
//!
//! A kernel is represented by its Fourier symbol, an even real function of the
//! wavenumber normalized to 1 at the origin. The solver only ever consumes the
//! symbol (the convolution acts as a Fourier multiplier), so densities never
//! appear here; quadrature against densities lives in the test oracles.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::series::EvenSeries;

/// Default absolute tolerance for moment comparisons.
pub const DEFAULT_MOMENT_TOL: f64 = 1e-9;
/// Highest even moment probed when deciding a matching order.
pub const DEFAULT_PROBE_ORDER: u32 = 8;
/// Default wavenumber range on which constructed symbols are checked.
pub const WORKING_XI_MAX: f64 = 20.0;
/// Sample count for ellipticity scans over the working range.
pub const ELLIPTICITY_SAMPLES: usize = 2001;

/// Finite-difference step for symbols without a series route.
const FD_STEP: f64 = 1e-2;

type SymbolFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Symbol {
    Dirac,
    Exponential,
    Gaussian,
    /// 1 / (1 + g[0] y + g[1] y^2 + ...) with y = xi^2.
    RationalEven(Vec<f64>),
    Expr(Arc<ParsedSymbol>),
    Opaque(SymbolFn),
    Mix {
        base: Arc<Symbol>,
        phi: Arc<Symbol>,
        nu: f64,
    },
    Mollify {
        base: Arc<Symbol>,
        phi: Arc<Symbol>,
        nu: f64,
    },
    HighDeriv {
        base: Arc<Symbol>,
        phi: Arc<Symbol>,
        amplitude: f64,
        order: u32,
    },
}

struct ParsedSymbol {
    ast: Expr,
    src: String,
}

impl Symbol {
    fn eval(&self, xi: f64) -> f64 {
        match self {
            Symbol::Dirac => 1.0,
            Symbol::Exponential => 1.0 / (1.0 + xi * xi),
            Symbol::Gaussian => (-0.5 * xi * xi).exp(),
            Symbol::RationalEven(g) => {
                let y = xi * xi;
                let mut poly = 0.0;
                for c in g.iter().rev() {
                    poly = (poly + c) * y;
                }
                1.0 / (1.0 + poly)
            }
            Symbol::Expr(p) => p.ast.eval(xi),
            Symbol::Opaque(f) => f(xi),
            Symbol::Mix { base, phi, nu } => (1.0 - nu) * base.eval(xi) + nu * phi.eval(xi),
            Symbol::Mollify { base, phi, nu } => phi.eval(nu * xi) * base.eval(xi),
            Symbol::HighDeriv {
                base,
                phi,
                amplitude,
                order,
            } => {
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                base.eval(xi) + amplitude * sign * xi.powi(2 * *order as i32) * phi.eval(xi)
            }
        }
    }

    /// Exact even Taylor series with `terms` coefficients, when one exists.
    fn even_series(&self, terms: usize) -> Result<EvenSeries> {
        match self {
            Symbol::Dirac => Ok(EvenSeries::one(terms)),
            Symbol::Exponential => Ok(EvenSeries::from_coeffs(
                (0..terms)
                    .map(|m| if m % 2 == 0 { 1.0 } else { -1.0 })
                    .collect(),
            )),
            Symbol::Gaussian => {
                let mut c = vec![0.0; terms];
                let mut acc = 1.0;
                for (m, cm) in c.iter_mut().enumerate() {
                    *cm = acc;
                    acc *= -0.5 / (m as f64 + 1.0);
                }
                Ok(EvenSeries::from_coeffs(c))
            }
            Symbol::RationalEven(g) => {
                let mut denom = vec![0.0; terms.max(g.len() + 1)];
                denom[0] = 1.0;
                for (j, gj) in g.iter().enumerate() {
                    if j + 1 < denom.len() {
                        denom[j + 1] = *gj;
                    }
                }
                EvenSeries::from_coeffs(denom).invert(terms)
            }
            Symbol::Expr(p) => {
                let jet = p.ast.jet(2 * terms.max(1))?;
                jet.fold_even(terms, 1e-9)
            }
            Symbol::Opaque(_) => Err(Error::InvalidKernel {
                reason: "opaque symbol has no closed-form expansion".into(),
            }),
            Symbol::Mix { base, phi, nu } => {
                let b = base.even_series(terms)?;
                let f = phi.even_series(terms)?;
                let mut out = EvenSeries::zero(terms);
                out = out.add_scaled(&b, 1.0 - nu);
                out = out.add_scaled(&f, *nu);
                Ok(out)
            }
            Symbol::Mollify { base, phi, nu } => {
                let b = base.even_series(terms)?;
                let f = phi.even_series(terms)?.scale_arg(*nu);
                Ok(f.mul(&b, terms))
            }
            Symbol::HighDeriv {
                base,
                phi,
                amplitude,
                order,
            } => {
                let b = base.even_series(terms)?;
                let f = phi.even_series(terms)?.shift(*order as usize);
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                Ok(b.add_scaled(&f, amplitude * sign))
            }
        }
    }

    fn describe(&self) -> Option<String> {
        match self {
            Symbol::Dirac => Some("1".into()),
            Symbol::Exponential => Some("1/(1+xi^2)".into()),
            Symbol::Gaussian => Some("exp(-xi^2/2)".into()),
            Symbol::RationalEven(g) => {
                let mut s = String::from("1/(1");
                for (j, gj) in g.iter().enumerate() {
                    s.push_str(&format!(" + {}*xi^{}", gj, 2 * (j + 1)));
                }
                s.push(')');
                Some(s)
            }
            Symbol::Expr(p) => Some(p.src.clone()),
            _ => None,
        }
    }
}

/// Perturbation recipes applied at the symbol level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbMode {
    /// Convex mixture `(1-nu) * base + nu * phi`.
    Mix { nu: f64 },
    /// Mollification: symbol `phi(nu*xi) * base(xi)`.
    Mollify { nu: f64 },
    /// High-order derivative bump: `base + a * (-1)^k * xi^(2k) * phi`.
    HighDeriv { amplitude: f64, order: u32 },
}

/// An even convolution kernel described by its Fourier symbol.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    symbol: Symbol,
    smoothness_order: u32,
    declared_bounds: Option<(f64, f64)>,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("smoothness_order", &self.smoothness_order)
            .field("declared_bounds", &self.declared_bounds)
            .finish()
    }
}

impl KernelSpec {
    /// Dirac measure: symbol identically 1 (the classical, non-dispersive case).
    pub fn dirac() -> Self {
        Self {
            name: "dirac".into(),
            symbol: Symbol::Dirac,
            smoothness_order: u32::MAX,
            declared_bounds: Some((1.0, 1.0)),
        }
    }

    /// Exponential kernel (1/2) e^{-|x|}, symbol 1/(1+xi^2).
    pub fn exponential() -> Self {
        Self {
            name: "exponential".into(),
            symbol: Symbol::Exponential,
            smoothness_order: u32::MAX,
            declared_bounds: None,
        }
    }

    /// Unit-variance Gaussian kernel, symbol e^{-xi^2/2}.
    pub fn gaussian() -> Self {
        Self {
            name: "gaussian".into(),
            symbol: Symbol::Gaussian,
            smoothness_order: u32::MAX,
            declared_bounds: None,
        }
    }

    /// Look up a built-in kernel by catalog name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "dirac" => Some(Self::dirac()),
            "exponential" => Some(Self::exponential()),
            "gaussian" => Some(Self::gaussian()),
            "gaussian_bq2" => boussinesq_approximant(&Self::gaussian(), 2).ok(),
            _ => None,
        }
    }

    /// Names of the built-in catalog, in listing order.
    pub fn catalog_names() -> &'static [&'static str] {
        &["dirac", "exponential", "gaussian", "gaussian_bq2"]
    }

    /// Parse a symbol expression over `xi` and validate it as a kernel symbol.
    pub fn from_expr(name: &str, src: &str) -> Result<Self> {
        let ast = Expr::parse(src)?;
        let spec = Self {
            name: name.into(),
            symbol: Symbol::Expr(Arc::new(ParsedSymbol {
                ast,
                src: src.to_string(),
            })),
            smoothness_order: u32::MAX,
            declared_bounds: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Wrap an arbitrary function as a symbol.
    ///
    /// `smoothness_order` caps the derivative order trusted at the origin;
    /// moments fall back to Richardson-extrapolated central differences.
    pub fn from_fn(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        smoothness_order: u32,
        declared_bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            symbol: Symbol::Opaque(Arc::new(f)),
            smoothness_order,
            declared_bounds,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn smoothness_order(&self) -> u32 {
        self.smoothness_order
    }

    pub fn declared_bounds(&self) -> Option<(f64, f64)> {
        self.declared_bounds
    }

    /// Human-readable symbol formula, when the kernel has one.
    pub fn expression(&self) -> Option<String> {
        self.symbol.describe()
    }

    /// Evaluate the Fourier symbol at wavenumber `xi`.
    pub fn eval(&self, xi: f64) -> f64 {
        self.symbol.eval(xi)
    }

    /// Square root of the symbol, the dispersion factor of the evolution.
    pub fn sqrt_symbol(&self, xi: f64) -> Result<f64> {
        let v = self.eval(xi);
        if v < 0.0 {
            return Err(Error::NegativeSymbol { xi, value: v });
        }
        Ok(v.sqrt())
    }

    /// Even moments m_0, m_2, ..., m_max of the kernel density.
    ///
    /// Uses the duality m_{2j} = (-1)^j (2j)! [xi^{2j}] beta_hat; symbols with
    /// a series route get exact coefficients, opaque symbols use central
    /// finite differences with Richardson extrapolation.
    pub fn moments(&self, max_even_order: u32) -> Result<MomentVector> {
        let max = max_even_order - max_even_order % 2;
        if max > self.smoothness_order {
            return Err(Error::InsufficientSmoothness {
                requested: max,
                available: self.smoothness_order,
            });
        }
        let terms = (max / 2 + 1) as usize;
        let even_moments = match self.symbol.even_series(terms) {
            Ok(series) => (0..terms)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * factorial(2 * j) * series.coeff(j)
                })
                .collect(),
            Err(_) => (0..terms)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * fd_derivative_at_zero(|xi| self.eval(xi), 2 * j)
                })
                .collect(),
        };
        Ok(MomentVector { even_moments })
    }

    /// Taylor coefficients of the symbol in y = xi^2, when a series route exists.
    pub fn even_taylor(&self, terms: usize) -> Result<EvenSeries> {
        self.symbol.even_series(terms)
    }

    /// Structural checks: evenness, normalization, declared bounds, finiteness.
    pub fn validate(&self) -> Result<()> {
        let at_zero = self.eval(0.0);
        if !(at_zero - 1.0).abs().is_finite() || (at_zero - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidKernel {
                reason: format!("symbol(0) = {at_zero}, expected 1 (kernel not normalized)"),
            });
        }
        let samples = 101;
        for i in 0..samples {
            let xi = WORKING_XI_MAX * i as f64 / (samples - 1) as f64;
            let plus = self.eval(xi);
            let minus = self.eval(-xi);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::InvalidKernel {
                    reason: format!("symbol not finite at xi = {xi}"),
                });
            }
            if (plus - minus).abs() > 1e-14 {
                return Err(Error::InvalidKernel {
                    reason: format!(
                        "symbol is not even at xi = {xi}: {plus} vs {minus}",
                    ),
                });
            }
            if let Some((c1_sq, c2_sq)) = self.declared_bounds {
                if plus < c1_sq - 1e-12 || plus > c2_sq + 1e-12 {
                    return Err(Error::InvalidKernel {
                        reason: format!(
                            "symbol value {plus} at xi = {xi} violates declared bounds [{c1_sq}, {c2_sq}]",
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    fn with_symbol(name: String, symbol: Symbol, smoothness_order: u32) -> Self {
        Self {
            name,
            symbol,
            smoothness_order,
            declared_bounds: None,
        }
    }
}

/// Even moments of a kernel; odd moments vanish identically and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    even_moments: Vec<f64>,
}

impl MomentVector {
    /// Moment of the given even order, if probed.
    pub fn get(&self, even_order: u32) -> Option<f64> {
        self.even_moments.get((even_order / 2) as usize).copied()
    }

    /// All stored moments as (order, value) pairs.
    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.even_moments
            .iter()
            .enumerate()
            .map(|(j, m)| (2 * j as u32, *m))
    }

    pub fn max_order(&self) -> u32 {
        2 * (self.even_moments.len() as u32 - 1)
    }
}

/// Outcome of comparing the moment sequences of two kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingOrder {
    /// Even moments agree through order 2k-2 and differ at order 2k.
    Order(u32),
    /// All probed moments agree; the kernels are indistinguishable at this tolerance.
    IdenticalToTolerance,
}

impl MatchingOrder {
    /// The convergence rate 2k predicted for a matched pair, when finite.
    pub fn predicted_rate(&self) -> Option<f64> {
        match self {
            MatchingOrder::Order(k) => Some(2.0 * *k as f64),
            MatchingOrder::IdenticalToTolerance => None,
        }
    }

    pub fn order(&self) -> Option<u32> {
        match self {
            MatchingOrder::Order(k) => Some(*k),
            MatchingOrder::IdenticalToTolerance => None,
        }
    }
}

impl fmt::Display for MatchingOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchingOrder::Order(k) => write!(f, "k = {k}"),
            MatchingOrder::IdenticalToTolerance => write!(f, "identical-to-tolerance"),
        }
    }
}

/// Largest k such that the even moments of `a` and `b` agree through order 2k-2.
///
/// Odd moments of even kernels vanish, so agreement of even moments through
/// order 2k-2 is exactly the condition that makes the symbol difference
/// O(xi^{2k}) at the origin.
pub fn matching_order(a: &KernelSpec, b: &KernelSpec, tol: f64) -> Result<MatchingOrder> {
    let probe = DEFAULT_PROBE_ORDER
        .min(a.smoothness_order)
        .min(b.smoothness_order);
    let ma = a.moments(probe)?;
    let mb = b.moments(probe)?;
    let m0_a = ma.get(0).unwrap();
    let m0_b = mb.get(0).unwrap();
    if (m0_a - m0_b).abs() > tol {
        return Err(Error::NoMatch { m0_a, m0_b });
    }
    for j in 1..=(probe / 2) {
        let va = ma.get(2 * j).unwrap();
        let vb = mb.get(2 * j).unwrap();
        if (va - vb).abs() > tol {
            return Ok(MatchingOrder::Order(j));
        }
    }
    Ok(MatchingOrder::IdenticalToTolerance)
}

/// Rational kernel whose inverse symbol is the Taylor polynomial of
/// 1/beta_hat through order 2(k-1); matches the input to order k.
pub fn boussinesq_approximant(kernel: &KernelSpec, k: u32) -> Result<KernelSpec> {
    if k == 0 {
        return Err(Error::InvalidConfig {
            reason: "approximant order k must be >= 1".into(),
        });
    }
    if 2 * (k - 1) > kernel.smoothness_order {
        return Err(Error::InsufficientSmoothness {
            requested: 2 * (k - 1),
            available: kernel.smoothness_order,
        });
    }
    let terms = k as usize;
    let series = kernel.even_taylor(terms)?;
    let inv = series.invert(terms)?;
    let gamma: Vec<f64> = (1..terms).map(|j| inv.coeff(j)).collect();

    // The truncated inverse polynomial must stay positive on the working range.
    let name = format!("{}_bq{}", kernel.name, k);
    let candidate = KernelSpec::with_symbol(name, Symbol::RationalEven(gamma), u32::MAX);
    verify_ellipticity(&candidate, WORKING_XI_MAX, ELLIPTICITY_SAMPLES)?;
    Ok(candidate)
}

/// Build a perturbed kernel at the symbol level and verify it is elliptic.
pub fn perturb(base: &KernelSpec, phi: &KernelSpec, mode: PerturbMode) -> Result<KernelSpec> {
    let (symbol, name) = match mode {
        PerturbMode::Mix { nu } => {
            if !(0.0..=1.0).contains(&nu) {
                return Err(Error::InvalidConfig {
                    reason: format!("mix weight nu = {nu} outside [0, 1]"),
                });
            }
            (
                Symbol::Mix {
                    base: Arc::new(base.symbol.clone()),
                    phi: Arc::new(phi.symbol.clone()),
                    nu,
                },
                format!("{}_mix_{}_{}", base.name, phi.name, nu),
            )
        }
        PerturbMode::Mollify { nu } => {
            if nu < 0.0 {
                return Err(Error::InvalidConfig {
                    reason: format!("mollifier scale nu = {nu} must be >= 0"),
                });
            }
            (
                Symbol::Mollify {
                    base: Arc::new(base.symbol.clone()),
                    phi: Arc::new(phi.symbol.clone()),
                    nu,
                },
                format!("{}_mollify_{}_{}", base.name, phi.name, nu),
            )
        }
        PerturbMode::HighDeriv { amplitude, order } => {
            if amplitude == 0.0 {
                return Err(Error::InvalidConfig {
                    reason: "high-derivative amplitude must be nonzero".into(),
                });
            }
            if order == 0 {
                return Err(Error::InvalidConfig {
                    reason: "high-derivative order must be >= 1".into(),
                });
            }
            (
                Symbol::HighDeriv {
                    base: Arc::new(base.symbol.clone()),
                    phi: Arc::new(phi.symbol.clone()),
                    amplitude,
                    order,
                },
                format!("{}_hd{}_{}_{}", base.name, order, phi.name, amplitude),
            )
        }
    };
    let candidate = KernelSpec::with_symbol(
        name,
        symbol,
        base.smoothness_order.min(phi.smoothness_order),
    );
    verify_ellipticity(&candidate, WORKING_XI_MAX, ELLIPTICITY_SAMPLES)?;
    Ok(candidate)
}

/// Sampled ellipticity bounds (min, max) of the symbol on [0, xi_max].
pub fn verify_ellipticity(
    kernel: &KernelSpec,
    xi_max: f64,
    n_samples: usize,
) -> Result<(f64, f64)> {
    assert!(xi_max > 0.0 && n_samples >= 2);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut min_xi = 0.0;
    for i in 0..n_samples {
        let xi = xi_max * i as f64 / (n_samples - 1) as f64;
        let v = kernel.eval(xi);
        if !v.is_finite() {
            return Err(Error::NonElliptic { xi, value: v });
        }
        if v < min {
            min = v;
            min_xi = xi;
        }
        max = max.max(v);
    }
    if min <= 0.0 {
        return Err(Error::NonElliptic {
            xi: min_xi,
            value: min,
        });
    }
    Ok((min, max))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// 2j-th derivative at 0 by central differences, two Richardson levels.
fn fd_derivative_at_zero(f: impl Fn(f64) -> f64, order: usize) -> f64 {
    if order == 0 {
        return f(0.0);
    }
    let stencil = |h: f64| -> f64 {
        let j = (order / 2) as i64;
        let mut acc = 0.0;
        for i in 0..=order as i64 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binomial(order, i as usize) * f((i - j) as f64 * h);
        }
        acc / h.powi(order as i32)
    };
    let d0 = stencil(FD_STEP);
    let d1 = stencil(FD_STEP / 2.0);
    let d2 = stencil(FD_STEP / 4.0);
    let r0 = (4.0 * d1 - d0) / 3.0;
    let r1 = (4.0 * d2 - d1) / 3.0;
    (16.0 * r1 - r0) / 15.0
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dirac_symbol_is_one_everywhere() {
        let k = KernelSpec::dirac();
        assert_eq!(k.eval(3.7), 1.0);
        assert_eq!(k.eval(-3.7), 1.0);
        assert_eq!(k.sqrt_symbol(123.0).unwrap(), 1.0);
    }

    #[test]
    fn exponential_symbol_values() {
        let k = KernelSpec::exponential();
        assert_relative_eq!(k.eval(1.0), 0.5);
        assert_relative_eq!(k.sqrt_symbol(1.0).unwrap(), 1.0 / 2.0_f64.sqrt());
        assert_relative_eq!(k.sqrt_symbol(0.0).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_normalized_at_origin() {
        let k = KernelSpec::gaussian();
        assert_eq!(k.eval(0.0), 1.0);
    }

    #[test]
    fn sqrt_symbol_squares_back() {
        for kernel in [
            KernelSpec::dirac(),
            KernelSpec::exponential(),
            KernelSpec::gaussian(),
        ] {
            for i in 0..50 {
                let xi = 0.4 * i as f64;
                let s = kernel.sqrt_symbol(xi).unwrap();
                assert_relative_eq!(s * s, kernel.eval(xi), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn negative_symbol_rejected_by_sqrt() {
        let k = KernelSpec::from_fn("parabola", |xi| 1.0 - xi * xi, 8, None).unwrap();
        match k.sqrt_symbol(2.0) {
            Err(Error::NegativeSymbol { value, .. }) => assert!(value < 0.0),
            other => panic!("expected NegativeSymbol, got {other:?}"),
        }
    }

    #[test]
    fn moments_exponential() {
        let m = KernelSpec::exponential().moments(4).unwrap();
        assert_relative_eq!(m.get(0).unwrap(), 1.0);
        assert_relative_eq!(m.get(2).unwrap(), 2.0);
        assert_relative_eq!(m.get(4).unwrap(), 24.0);
    }

    #[test]
    fn moments_dirac_vanish() {
        let m = KernelSpec::dirac().moments(4).unwrap();
        assert_eq!(m.get(0).unwrap(), 1.0);
        assert_eq!(m.get(2).unwrap(), 0.0);
        assert_eq!(m.get(4).unwrap(), 0.0);
    }

    #[test]
    fn moments_gaussian() {
        let m = KernelSpec::gaussian().moments(4).unwrap();
        assert_relative_eq!(m.get(0).unwrap(), 1.0);
        assert_relative_eq!(m.get(2).unwrap(), 1.0);
        assert_relative_eq!(m.get(4).unwrap(), 3.0);
    }

    #[test]
    fn moments_from_expression_match_builtin() {
        let e = KernelSpec::from_expr("expo", "1/(1+xi^2)").unwrap();
        let m = e.moments(6).unwrap();
        assert_relative_eq!(m.get(0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.get(2).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(m.get(4).unwrap(), 24.0, epsilon = 1e-10);
        assert_relative_eq!(m.get(6).unwrap(), 720.0, epsilon = 1e-8);
    }

    #[test]
    fn opaque_moments_via_finite_differences() {
        let k = KernelSpec::from_fn("fd_exponential", |xi| 1.0 / (1.0 + xi * xi), 4, None)
            .unwrap();
        let m = k.moments(4).unwrap();
        assert_relative_eq!(m.get(0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.get(2).unwrap(), 2.0, epsilon = 1e-8);
        // Fourth derivative by differences carries visible roundoff.
        assert_relative_eq!(m.get(4).unwrap(), 24.0, epsilon = 1e-4);
    }

    #[test]
    fn insufficient_smoothness_is_flagged() {
        let k = KernelSpec::from_fn("blunt", |xi| 1.0 / (1.0 + xi * xi), 2, None).unwrap();
        match k.moments(4) {
            Err(Error::InsufficientSmoothness {
                requested,
                available,
            }) => {
                assert_eq!(requested, 4);
                assert_eq!(available, 2);
            }
            other => panic!("expected InsufficientSmoothness, got {other:?}"),
        }
    }

    #[test]
    fn matching_exponential_vs_dirac() {
        let m = matching_order(
            &KernelSpec::exponential(),
            &KernelSpec::dirac(),
            DEFAULT_MOMENT_TOL,
        )
        .unwrap();
        assert_eq!(m, MatchingOrder::Order(1));
        assert_eq!(m.predicted_rate(), Some(2.0));
    }

    #[test]
    fn matching_self_is_sentinel() {
        for kernel in [
            KernelSpec::dirac(),
            KernelSpec::exponential(),
            KernelSpec::gaussian(),
        ] {
            let m = matching_order(&kernel, &kernel, DEFAULT_MOMENT_TOL).unwrap();
            assert_eq!(m, MatchingOrder::IdenticalToTolerance);
        }
    }

    #[test]
    fn matching_gaussian_vs_rational_is_two() {
        let rational = KernelSpec::from_expr("soft", "1/(1+xi^2/2)").unwrap();
        let m = matching_order(&KernelSpec::gaussian(), &rational, DEFAULT_MOMENT_TOL).unwrap();
        assert_eq!(m, MatchingOrder::Order(2));
    }

    #[test]
    fn matching_is_symmetric() {
        let pairs = [
            (KernelSpec::exponential(), KernelSpec::dirac()),
            (KernelSpec::gaussian(), KernelSpec::exponential()),
            (
                KernelSpec::gaussian(),
                KernelSpec::from_expr("soft", "1/(1+xi^2/2)").unwrap(),
            ),
        ];
        for (a, b) in pairs {
            let ab = matching_order(&a, &b, DEFAULT_MOMENT_TOL).unwrap();
            let ba = matching_order(&b, &a, DEFAULT_MOMENT_TOL).unwrap();
            assert_eq!(ab, ba);
        }
    }

    #[test]
    fn matching_rejects_unnormalized() {
        let k = KernelSpec {
            name: "short".into(),
            symbol: Symbol::Opaque(Arc::new(|_| 0.9)),
            smoothness_order: 8,
            declared_bounds: None,
        };
        match matching_order(&KernelSpec::dirac(), &k, DEFAULT_MOMENT_TOL) {
            Err(Error::NoMatch { .. }) => {}
            other => panic!("expected NoMatch, got {other:?}"),
        }
    }

    #[test]
    fn approximant_of_exponential_is_itself() {
        let base = KernelSpec::exponential();
        let a = boussinesq_approximant(&base, 2).unwrap();
        for i in 0..200 {
            let xi = 0.1 * i as f64;
            assert_eq!(a.eval(xi), base.eval(xi), "xi = {xi}");
        }
    }

    #[test]
    fn approximant_order_one_is_dirac_symbol() {
        let a = boussinesq_approximant(&KernelSpec::gaussian(), 1).unwrap();
        assert_eq!(a.eval(5.0), 1.0);
    }

    #[test]
    fn approximant_of_gaussian_order_two() {
        let a = boussinesq_approximant(&KernelSpec::gaussian(), 2).unwrap();
        for i in 0..100 {
            let xi = 0.2 * i as f64;
            assert_relative_eq!(a.eval(xi), 1.0 / (1.0 + xi * xi / 2.0), max_relative = 1e-15);
        }
    }

    #[test]
    fn approximant_matches_base_to_requested_order() {
        for kernel in [KernelSpec::exponential(), KernelSpec::gaussian()] {
            for k in 1..=3 {
                let a = boussinesq_approximant(&kernel, k).unwrap();
                let m = matching_order(&kernel, &a, DEFAULT_MOMENT_TOL).unwrap();
                match m {
                    MatchingOrder::Order(got) => assert!(got >= k, "{}: got {got} < {k}", kernel.name),
                    MatchingOrder::IdenticalToTolerance => {}
                }
            }
        }
    }

    #[test]
    fn approximant_with_negative_curvature_fails_ellipticity() {
        // Symbol rising at the origin makes the truncated inverse go negative.
        let k = KernelSpec::from_expr("rising", "2 - 1/(1+xi^2)").unwrap();
        match boussinesq_approximant(&k, 2) {
            Err(Error::NonElliptic { .. }) => {}
            other => panic!("expected NonElliptic, got {other:?}"),
        }
    }

    #[test]
    fn perturb_mix_zero_weight_is_base() {
        let base = KernelSpec::exponential();
        let phi = KernelSpec::gaussian();
        let p = perturb(&base, &phi, PerturbMode::Mix { nu: 0.0 }).unwrap();
        for i in 0..100 {
            let xi = 0.2 * i as f64;
            assert_relative_eq!(p.eval(xi), base.eval(xi), max_relative = 1e-15);
        }
    }

    #[test]
    fn perturb_mollify_of_dirac_is_phi() {
        let p = perturb(
            &KernelSpec::dirac(),
            &KernelSpec::gaussian(),
            PerturbMode::Mollify { nu: 1.0 },
        )
        .unwrap();
        let phi = KernelSpec::gaussian();
        for i in 0..100 {
            let xi = 0.2 * i as f64;
            assert_relative_eq!(p.eval(xi), phi.eval(xi), max_relative = 1e-15);
        }
    }

    #[test]
    fn perturb_high_deriv_matches_to_order_two() {
        let base = KernelSpec::exponential();
        let phi = KernelSpec::gaussian();
        let p = perturb(
            &base,
            &phi,
            PerturbMode::HighDeriv {
                amplitude: 0.1,
                order: 2,
            },
        )
        .unwrap();
        let xi = 1.3_f64;
        let expect = 1.0 / (1.0 + xi * xi) + 0.1 * xi.powi(4) * (-xi * xi / 2.0).exp();
        assert_relative_eq!(p.eval(xi), expect, max_relative = 1e-15);
        let m = matching_order(&base, &p, DEFAULT_MOMENT_TOL).unwrap();
        assert_eq!(m, MatchingOrder::Order(2));
    }

    #[test]
    fn perturb_mix_changes_second_moment() {
        let p = perturb(
            &KernelSpec::exponential(),
            &KernelSpec::gaussian(),
            PerturbMode::Mix { nu: 0.1 },
        )
        .unwrap();
        let m = p.moments(2).unwrap();
        assert_relative_eq!(m.get(2).unwrap(), 1.9, epsilon = 1e-12);
        let order = matching_order(&KernelSpec::exponential(), &p, DEFAULT_MOMENT_TOL).unwrap();
        assert_eq!(order, MatchingOrder::Order(1));
    }

    #[test]
    fn perturb_mollify_changes_second_moment() {
        let p = perturb(
            &KernelSpec::exponential(),
            &KernelSpec::gaussian(),
            PerturbMode::Mollify { nu: 0.1 },
        )
        .unwrap();
        let m = p.moments(2).unwrap();
        assert_relative_eq!(m.get(2).unwrap(), 2.01, epsilon = 1e-12);
    }

    #[test]
    fn mix_symbol_stays_within_nu_band() {
        let base = KernelSpec::exponential();
        let phi = KernelSpec::gaussian();
        let nu = 0.07;
        let p = perturb(&base, &phi, PerturbMode::Mix { nu }).unwrap();
        let mut sup = 0.0_f64;
        for i in 0..400 {
            let xi = 0.05 * i as f64;
            sup = sup.max((phi.eval(xi) - base.eval(xi)).abs());
        }
        for i in 0..400 {
            let xi = 0.05 * i as f64;
            assert!((p.eval(xi) - base.eval(xi)).abs() <= nu * sup + 1e-15);
        }
    }

    #[test]
    fn ellipticity_dirac_tight() {
        let (lo, hi) = verify_ellipticity(&KernelSpec::dirac(), 15.0, 64).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
    }

    #[test]
    fn ellipticity_exponential_range() {
        let (lo, hi) = verify_ellipticity(&KernelSpec::exponential(), 10.0, 1001).unwrap();
        assert_relative_eq!(lo, 1.0 / 101.0, max_relative = 1e-14);
        assert_relative_eq!(hi, 1.0);
    }

    #[test]
    fn strong_negative_bump_is_not_elliptic() {
        match perturb(
            &KernelSpec::exponential(),
            &KernelSpec::gaussian(),
            PerturbMode::HighDeriv {
                amplitude: -10.0,
                order: 2,
            },
        ) {
            Err(Error::NonElliptic { .. }) => {}
            other => panic!("expected NonElliptic, got {other:?}"),
        }
    }

    #[test]
    fn constructed_symbols_are_even() {
        let kernels = [
            boussinesq_approximant(&KernelSpec::gaussian(), 3).unwrap(),
            perturb(
                &KernelSpec::exponential(),
                &KernelSpec::gaussian(),
                PerturbMode::Mix { nu: 0.3 },
            )
            .unwrap(),
            perturb(
                &KernelSpec::exponential(),
                &KernelSpec::gaussian(),
                PerturbMode::Mollify { nu: 0.5 },
            )
            .unwrap(),
        ];
        for k in kernels {
            for i in 0..200 {
                let xi = 0.1 * i as f64;
                assert!((k.eval(xi) - k.eval(-xi)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn validate_rejects_odd_expression() {
        assert!(KernelSpec::from_expr("odd", "1 + xi/(1+xi^2)").is_err());
    }

    #[test]
    fn validate_rejects_unnormalized_expression() {
        assert!(KernelSpec::from_expr("big", "2/(1+xi^2)").is_err());
    }

    #[test]
    fn catalog_lookup() {
        for name in KernelSpec::catalog_names() {
            let k = KernelSpec::by_name(name).unwrap();
            assert_eq!(&k.name(), name);
        }
        assert!(KernelSpec::by_name("nope").is_none());
    }
}
