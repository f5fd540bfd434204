//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A kernel symbol evaluated to a negative value where a square root was needed.
    #[error("symbol is negative at xi = {xi}: {value}")]
    NegativeSymbol { xi: f64, value: f64 },

    /// Requested moment/Taylor order exceeds what the symbol supports.
    #[error("requested derivative order {requested} exceeds smoothness order {available}")]
    InsufficientSmoothness { requested: u32, available: u32 },

    /// Zeroth moments disagree; the inputs are not both normalized.
    #[error("zeroth moments differ beyond tolerance: {m0_a} vs {m0_b}")]
    NoMatch { m0_a: f64, m0_b: f64 },

    /// A symbol is non-positive somewhere on the working wavenumber range.
    #[error("symbol fails ellipticity at xi = {xi}: {value}")]
    NonElliptic { xi: f64, value: f64 },

    /// A kernel definition violates a structural invariant (evenness, normalization, bounds).
    #[error("invalid kernel: {reason}")]
    InvalidKernel { reason: String },

    /// A Fourier multiplier evaluated to a non-finite value on a grid wavenumber.
    #[error("multiplier is not finite at xi = {xi}")]
    NonFiniteMultiplier { xi: f64 },

    /// Two fields from different grids were combined.
    #[error("grid mismatch: {lhs} points vs {rhs} points")]
    GridMismatch { lhs: usize, rhs: usize },

    /// The solution exceeded the blow-up guard.
    #[error("solution overflow at t = {t}: max |value| = {max_abs:.3e}")]
    Overflow { t: f64, max_abs: f64 },

    /// Data reached the domain boundary above the trust threshold.
    #[error("boundary leak at t = {t}: max |value| near boundary = {max_abs:.3e}")]
    BoundaryLeak { t: f64, max_abs: f64 },

    /// The comparison-energy quadratic form went negative.
    #[error("comparison energy is indefinite: E^2 = {e_sq:.3e} (epsilon too large for this diagnostic)")]
    IndefiniteEnergy { e_sq: f64 },

    /// One run of a kernel pair aborted mid-sweep.
    #[error("pair run at delta = {delta} aborted: {reason}")]
    MismatchedRuns { delta: f64, reason: String },

    /// Too few data points for the requested operation.
    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { got: usize, need: usize },

    /// A rate table cannot be fitted (errors at noise floor or non-positive).
    #[error("degenerate rate table: {reason}")]
    DegenerateTable { reason: String },

    /// Invalid simulation configuration.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    /// Symbol expression failed to parse.
    #[error("expression error: {0}")]
    ExprParse(String),
}
