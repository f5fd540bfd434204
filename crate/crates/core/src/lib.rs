//! Pseudospectral simulation of nonlocal nonlinear wave equations of the form
//!
//! ```text
//! u_tt = beta_delta * (u + eps^p u^{p+1})_xx
//! ```
//!
//! on a periodic domain, where `*` is spatial convolution against a scaled
//! even kernel. The crate provides a kernel calculus over Fourier symbols
//! (moments, matching orders, rational approximants, perturbation families),
//! an RK4 pseudospectral solver for the equivalent first-order system, and a
//! comparison harness that measures how fast solutions for two moment-matched
//! kernels approach each other as the dispersion parameter shrinks.
//!
//! Delta sweeps run their entries in parallel with rayon when the default
//! `parallel` feature is enabled; disabling it yields a sequential build with
//! the same results.

pub mod compare;
pub mod error;
pub mod expr;
pub mod grid;
pub mod kernel;
pub mod series;
pub mod solver;

pub use compare::{
    delta_sweep, delta_sweep_detailed, fit_rate, growth_check, run_pair,
    scaling_equivalence_check, DiffSeries, GrowthCheck, PairOutcome, PairStatus, RateFit,
    RateRow, RateTable, SweepResult,
};
pub use error::{Error, Result};
pub use grid::{GridField, PeriodicGrid};
pub use kernel::{
    boussinesq_approximant, matching_order, perturb, verify_ellipticity, KernelSpec,
    MatchingOrder, MomentVector, PerturbMode,
};
pub use solver::{
    comparison_energy, hamiltonian, init_state, rhs, run, stable_dt, step_rk4, InitialData,
    RunDiagnostics, RunRecord, SimConfig, SimState,
};
