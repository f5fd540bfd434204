//! Periodic grid, discrete transform conventions, Fourier multipliers and
//! discrete Sobolev norms.
//!
//! Transform convention: forward unnormalized, inverse scaled by 1/n. The
//! grid covers [-L, L) with n uniformly spaced points; bin b of the transform
//! carries wavenumber pi*j/L with j = b for b < n/2 and j = b - n otherwise,
//! so the unpaired mode at j = -n/2 is the Nyquist mode.

use std::io::{self, Write};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Fraction of the spectrum kept by the 2/3 dealiasing rule.
pub const DEALIAS_FRACTION: f64 = 2.0 / 3.0;

/// Uniform periodic grid on [-L, L) with a power-of-two point count.
pub struct PeriodicGrid {
    n: usize,
    half_length: f64,
    points: Vec<f64>,
    wavenumbers: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n", &self.n)
            .field("half_length", &self.half_length)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(n: usize, half_length: f64) -> Result<Arc<Self>> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidConfig {
                reason: format!("grid size {n} must be a power of two >= 8"),
            });
        }
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::InvalidConfig {
                reason: format!("half length {half_length} must be positive"),
            });
        }
        let dx = 2.0 * half_length / n as f64;
        let points = (0..n).map(|i| -half_length + i as f64 * dx).collect();
        let wavenumbers = (0..n)
            .map(|b| {
                let j = if b < n / 2 { b as i64 } else { b as i64 - n as i64 };
                std::f64::consts::PI * j as f64 / half_length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Self {
            n,
            half_length,
            points,
            wavenumbers,
            fwd,
            inv,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Signed wavenumbers in transform bin order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest resolved wavenumber magnitude, pi*(n/2)/L.
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * (self.n / 2) as f64 / self.half_length
    }

    fn nyquist_bin(&self) -> usize {
        self.n / 2
    }

    pub fn same_as(&self, other: &PeriodicGrid) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

/// Real field on a periodic grid with a lazily cached spectrum.
pub struct GridField {
    grid: Arc<PeriodicGrid>,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Clone for GridField {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.clone(),
            spectrum,
        }
    }
}

impl std::fmt::Debug for GridField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridField")
            .field("grid", &self.grid)
            .field("cached_spectrum", &self.spectrum.get().is_some())
            .finish()
    }
}

impl GridField {
    pub fn zeros(grid: &Arc<PeriodicGrid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.n()],
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_fn(grid: &Arc<PeriodicGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        Self {
            grid: Arc::clone(grid),
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_values(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch {
                lhs: grid.n(),
                rhs: values.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
            spectrum: OnceLock::new(),
        })
    }

    /// Build a field from spectral coefficients (unnormalized forward convention).
    ///
    /// The caller is responsible for handing in a conjugate-symmetric spectrum;
    /// the imaginary residue of the inverse transform is discarded.
    pub fn from_spectrum(grid: &Arc<PeriodicGrid>, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.n() {
            return Err(Error::GridMismatch {
                lhs: grid.n(),
                rhs: spectrum.len(),
            });
        }
        let n = grid.n() as f64;
        let mut buf = spectrum.clone();
        grid.inv.process(&mut buf);
        let values = buf.iter().map(|c| c.re / n).collect();
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Ok(Self {
            grid: Arc::clone(grid),
            values,
            spectrum: cell,
        })
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Unnormalized forward transform of the values, cached after first use.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut buf: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.grid.fwd.process(&mut buf);
            buf
        })
    }

    /// Apply a real-valued Fourier multiplier m(xi) to the field.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> f64) -> Result<GridField> {
        let spec = self.spectrum();
        let mut out = Vec::with_capacity(spec.len());
        for (b, &c) in spec.iter().enumerate() {
            let xi = self.grid.wavenumbers[b];
            let w = m(xi);
            if !w.is_finite() {
                return Err(Error::NonFiniteMultiplier { xi });
            }
            out.push(c * w);
        }
        GridField::from_spectrum(&self.grid, out)
    }

    /// Spectral derivative; the unpaired Nyquist mode is zeroed to keep the
    /// output real.
    pub fn derivative(&self) -> GridField {
        let spec = self.spectrum();
        let nyq = self.grid.nyquist_bin();
        let mut out = Vec::with_capacity(spec.len());
        for (b, &c) in spec.iter().enumerate() {
            if b == nyq {
                out.push(Complex64::new(0.0, 0.0));
            } else {
                let xi = self.grid.wavenumbers[b];
                out.push(c * Complex64::new(0.0, xi));
            }
        }
        GridField::from_spectrum(&self.grid, out).expect("same grid")
    }

    /// Zero all modes above two thirds of the maximum wavenumber.
    pub fn dealias(&self) -> GridField {
        let cutoff = DEALIAS_FRACTION * self.grid.max_wavenumber();
        let spec = self.spectrum();
        let out = spec
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                if self.grid.wavenumbers[b].abs() > cutoff {
                    Complex64::new(0.0, 0.0)
                } else {
                    c
                }
            })
            .collect();
        GridField::from_spectrum(&self.grid, out).expect("same grid")
    }

    /// Discrete Sobolev norm of order `s` of the trigonometric interpolant.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let spec = self.spectrum();
        let n = self.grid.n() as f64;
        let two_l = 2.0 * self.grid.half_length;
        let integer_s = s.fract() == 0.0 && s.abs() < 64.0;
        let mut acc = 0.0;
        for (b, c) in spec.iter().enumerate() {
            let xi = self.grid.wavenumbers[b];
            let base = 1.0 + xi * xi;
            let weight = if s == 0.0 {
                1.0
            } else if integer_s {
                base.powi(s as i32)
            } else {
                base.powf(s)
            };
            acc += weight * c.norm_sqr();
        }
        (two_l * acc / (n * n)).sqrt()
    }

    /// L2 norm computed from the values by the trapezoid rule.
    pub fn l2_norm_values(&self) -> f64 {
        let dx = self.grid.spacing();
        (dx * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Integral of the field (the continuum zero mode), by the trapezoid rule.
    pub fn mean_integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// Pointwise difference; fields must share a grid.
    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch {
                lhs: self.grid.n(),
                rhs: other.grid.n(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
            spectrum: OnceLock::new(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Write the field as CSV with columns x, value (17 significant digits).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "x,value")?;
        for (x, v) in self.grid.points().iter().zip(&self.values) {
            writeln!(w, "{x:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Weighted spectral inner product <f, g>_s used by the comparison energy.
pub fn sobolev_inner_product(f: &GridField, g: &GridField, s: f64) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::GridMismatch {
            lhs: f.grid.n(),
            rhs: g.grid.n(),
        });
    }
    let fs = f.spectrum();
    let gs = g.spectrum();
    let n = f.grid.n() as f64;
    let two_l = 2.0 * f.grid.half_length;
    let integer_s = s.fract() == 0.0 && s.abs() < 64.0;
    let mut acc = 0.0;
    for (b, (cf, cg)) in fs.iter().zip(gs).enumerate() {
        let xi = f.grid.wavenumbers[b];
        let base = 1.0 + xi * xi;
        let weight = if s == 0.0 {
            1.0
        } else if integer_s {
            base.powi(s as i32)
        } else {
            base.powf(s)
        };
        acc += weight * (cf * cg.conj()).re;
    }
    Ok(two_l * acc / (n * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize, l: f64) -> Arc<PeriodicGrid> {
        PeriodicGrid::new(n, l).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(PeriodicGrid::new(7, 1.0).is_err());
        assert!(PeriodicGrid::new(24, 1.0).is_err());
        assert!(PeriodicGrid::new(64, 0.0).is_err());
    }

    #[test]
    fn wavenumbers_symmetric_except_nyquist() {
        let g = grid(16, 2.0);
        let k = g.wavenumbers();
        for b in 1..8 {
            assert_relative_eq!(k[b], -k[16 - b]);
        }
        assert_relative_eq!(k[8], -g.max_wavenumber());
    }

    #[test]
    fn roundtrip_transform_is_tight() {
        let g = grid(128, 5.0);
        let f = GridField::from_fn(&g, |x| (0.7 * x).sin() * (-x * x / 4.0).exp());
        let back = f.apply_multiplier(|_| 1.0).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_multiplier_keeps_field() {
        let g = grid(64, PI);
        let f = GridField::from_fn(&g, |x| x.sin());
        let out = f.apply_multiplier(|_| 1.0).unwrap();
        for (a, b) in f.values().iter().zip(out.values()) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let g = grid(64, PI);
        let f = GridField::from_fn(&g, |x| x.sin());
        let d = f.derivative();
        for (x, v) in g.points().iter().zip(d.values()) {
            assert!((v - x.cos()).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivative_of_higher_mode() {
        let g = grid(64, PI);
        let f = GridField::from_fn(&g, |x| (3.0 * x).sin());
        let d = f.derivative();
        for (x, v) in g.points().iter().zip(d.values()) {
            assert!((v - 3.0 * (3.0 * x).cos()).abs() <= 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(32, 4.0);
        let f = GridField::from_fn(&g, |_| 2.5);
        assert!(f.derivative().max_abs() <= 1e-14);
    }

    #[test]
    fn spectral_accuracy_collapses_superalgebraically() {
        // Gaussian derivative error must fall by orders of magnitude when the
        // resolved band doubles, until it hits the roundoff floor.
        let l = 32.0;
        let err = |n: usize| -> f64 {
            let g = grid(n, l);
            let f = GridField::from_fn(&g, |x| (-x * x).exp());
            let d = f.derivative();
            g.points()
                .iter()
                .zip(d.values())
                .map(|(x, v)| (v - (-2.0 * x * (-x * x).exp())).abs())
                .fold(0.0_f64, f64::max)
        };
        let coarse = err(128);
        let fine = err(256);
        assert!(
            coarse / fine > 100.0,
            "expected superalgebraic collapse, got {coarse:.3e} -> {fine:.3e}"
        );
    }

    #[test]
    fn sobolev_norm_of_zero_field() {
        let g = grid(32, 1.0);
        assert_eq!(GridField::zeros(&g).sobolev_norm(2.0), 0.0);
    }

    #[test]
    fn sobolev_norm_of_sine_matches_quadrature() {
        let g = grid(64, PI);
        let f = GridField::from_fn(&g, |x| x.sin());
        // Oracle: trapezoid quadrature of sin^2 and sin^2 + cos^2 on [-pi, pi).
        let dx = g.spacing();
        let l2_sq: f64 = g.points().iter().map(|x| x.sin() * x.sin() * dx).sum();
        let h1_sq: f64 = g
            .points()
            .iter()
            .map(|x| (x.sin() * x.sin() + x.cos() * x.cos()) * dx)
            .sum();
        assert_relative_eq!(f.sobolev_norm(0.0), l2_sq.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(f.sobolev_norm(1.0), h1_sq.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(f.sobolev_norm(0.0), PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(f.sobolev_norm(1.0), (2.0 * PI).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn parseval_ties_values_to_spectrum() {
        let g = grid(256, 7.0);
        let f = GridField::from_fn(&g, |x| (1.3 * x).sin() * (-0.2 * x * x).exp() + 0.1);
        assert_relative_eq!(f.l2_norm_values(), f.sobolev_norm(0.0), max_relative = 1e-10);
    }

    #[test]
    fn multiplier_composition_collapses() {
        let g = grid(128, 3.0);
        let f = GridField::from_fn(&g, |x| (-x * x).exp());
        let m1 = |xi: f64| 1.0 / (1.0 + xi * xi);
        let m2 = |xi: f64| (1.0 + 0.5 * xi * xi).sqrt();
        let a = f
            .apply_multiplier(m1)
            .unwrap()
            .apply_multiplier(m2)
            .unwrap();
        let b = f.apply_multiplier(|xi| m1(xi) * m2(xi)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn inverse_multiplier_roundtrip() {
        let g = grid(128, 8.0);
        let f = GridField::from_fn(&g, |x| (-x * x / 3.0).exp() * (0.9 * x).cos());
        let delta = 0.5;
        let k = |xi: f64| (1.0 / (1.0 + delta * delta * xi * xi)).sqrt();
        let there = f.apply_multiplier(|xi| 1.0 / k(xi)).unwrap();
        let back = there.apply_multiplier(k).unwrap();
        for (x, y) in f.values().iter().zip(back.values()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn dealias_is_idempotent_and_contracting() {
        let g = grid(64, 2.0);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let values: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = GridField::from_values(&g, values).unwrap();
        let once = f.dealias();
        let twice = once.dealias();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() <= 1e-14);
        }
        assert!(once.sobolev_norm(0.0) <= f.sobolev_norm(0.0) + 1e-15);
        // Modes with |j| > n/3 are zeroed: j in {22..31} and {-32..-22}.
        let zeroed = once
            .spectrum()
            .iter()
            .enumerate()
            .filter(|(b, c)| {
                g.wavenumbers()[*b].abs() > DEALIAS_FRACTION * g.max_wavenumber()
                    && c.norm() <= 1e-12
            })
            .count();
        assert_eq!(zeroed, 21);
    }

    #[test]
    fn band_limited_field_survives_dealias() {
        let g = grid(64, PI);
        let f = GridField::from_fn(&g, |x| (4.0 * x).cos() + 0.3 * (9.0 * x).sin());
        let d = f.dealias();
        for (a, b) in f.values().iter().zip(d.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn non_finite_multiplier_is_an_error() {
        let g = grid(32, 1.0);
        let f = GridField::from_fn(&g, |x| x.cos());
        match f.apply_multiplier(|xi| 1.0 / xi) {
            Err(Error::NonFiniteMultiplier { xi }) => assert_eq!(xi, 0.0),
            other => panic!("expected NonFiniteMultiplier, got {other:?}"),
        }
    }

    #[test]
    fn csv_export_format() {
        let g = grid(8, 1.0);
        let f = GridField::from_fn(&g, |x| x);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,value\n"));
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().count(), 9);
        let first = text.lines().nth(1).unwrap();
        assert_eq!(first, "-1.0000000000000000e0,-1.0000000000000000e0");
    }

    #[test]
    fn inner_product_matches_norm() {
        let g = grid(64, 3.0);
        let f = GridField::from_fn(&g, |x| (-x * x).exp());
        let ip = sobolev_inner_product(&f, &f, 2.0).unwrap();
        assert_relative_eq!(ip.sqrt(), f.sobolev_norm(2.0), max_relative = 1e-13);
    }
}
