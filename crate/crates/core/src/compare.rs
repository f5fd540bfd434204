//! Kernel-pair comparison: difference series over long runs, delta sweeps and
//! log-log rate fits against the predicted convergence order.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::solver::{
    comparison_energy, run, stable_dt, InitialData, PairTrajectory, RunDiagnostics, SimConfig,
    DEFAULT_SAFETY,
};

/// Errors below this are treated as solver noise rather than signal.
pub const NOISE_FLOOR: f64 = 1e-11;
/// Default envelope-violation threshold of [`growth_check`].
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 3.0;

/// Completion status of a pair run.
#[derive(Debug, Clone, PartialEq)]
pub enum PairStatus {
    Complete,
    Aborted { reason: String, last_time: f64 },
}

/// Time series of the Sobolev-norm difference between two runs.
#[derive(Debug, Clone)]
pub struct DiffSeries {
    pub times: Vec<f64>,
    pub diff_norm: Vec<f64>,
    pub energy: Vec<f64>,
    pub growth_ratio: Vec<f64>,
    pub status: PairStatus,
}

impl DiffSeries {
    pub fn is_complete(&self) -> bool {
        self.status == PairStatus::Complete
    }

    pub fn max_growth_ratio(&self) -> f64 {
        self.growth_ratio.iter().fold(0.0_f64, |m, r| m.max(*r))
    }
}

/// A pair run's series plus the per-run conservation diagnostics.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub series: DiffSeries,
    pub diagnostics: [RunDiagnostics; 2],
}

/// One sweep entry.
#[derive(Debug, Clone, Copy)]
pub struct RateRow {
    pub delta: f64,
    /// max over snapshot times of diff_norm / (1 + t).
    pub error: f64,
}

/// Log-log fit of a rate table.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation of ln(error) from the fitted line.
    pub residual: f64,
}

/// (delta, error) rows sorted by decreasing delta, with an optional fit.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub fit: Option<RateFit>,
}

/// Sweep rows plus the per-delta outcomes backing them.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub table: RateTable,
    pub outcomes: Vec<PairOutcome>,
    /// Time step shared by every run of the sweep.
    pub dt: f64,
}

/// Run the same data under two kernels with identical stepping and collect
/// the difference series at snapshot times.
pub fn run_pair(
    k1: &KernelSpec,
    k2: &KernelSpec,
    data: &InitialData,
    config: &SimConfig,
    s_meas: f64,
) -> Result<PairOutcome> {
    let mut pair = PairTrajectory::start(data, k1, k2, config)?;
    let mut series = DiffSeries {
        times: Vec::new(),
        diff_norm: Vec::new(),
        energy: Vec::new(),
        growth_ratio: Vec::new(),
        status: PairStatus::Complete,
    };
    record(&mut series, &pair, config, s_meas)?;
    for i in 1..=pair.n_steps() {
        match pair.advance(k1, k2, i) {
            Ok(true) => record(&mut series, &pair, config, s_meas)?,
            Ok(false) => {}
            Err(e) => {
                series.status = PairStatus::Aborted {
                    reason: e.to_string(),
                    last_time: pair.snapshot().t,
                };
                break;
            }
        }
    }
    Ok(PairOutcome {
        series,
        diagnostics: pair.diagnostics(),
    })
}

fn record(
    series: &mut DiffSeries,
    pair: &PairTrajectory,
    config: &SimConfig,
    s_meas: f64,
) -> Result<()> {
    let snap = pair.snapshot();
    let diff = snap.left.u.sub(&snap.right.u)?.sobolev_norm(s_meas);
    let energy = comparison_energy(
        &snap.left.u,
        &snap.left.v,
        &snap.right.u,
        &snap.right.v,
        config.epsilon,
        config.p,
        s_meas,
    )?;
    series.times.push(snap.t);
    series.diff_norm.push(diff);
    series.energy.push(energy);
    series.growth_ratio.push(diff / (1.0 + snap.t));
    Ok(())
}

/// Sweep a list of deltas for one kernel pair; all entries share grid, data
/// and the time step of the most restrictive kernel-delta combination.
pub fn delta_sweep(
    k1: &KernelSpec,
    k2: &KernelSpec,
    data: &InitialData,
    base_config: &SimConfig,
    deltas: &[f64],
    s_meas: f64,
) -> Result<RateTable> {
    Ok(delta_sweep_detailed(k1, k2, data, base_config, deltas, s_meas)?.table)
}

/// Like [`delta_sweep`] but keeps the per-delta series and diagnostics.
pub fn delta_sweep_detailed(
    k1: &KernelSpec,
    k2: &KernelSpec,
    data: &InitialData,
    base_config: &SimConfig,
    deltas: &[f64],
    s_meas: f64,
) -> Result<SweepResult> {
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    deltas.dedup();
    if deltas.len() < 4 {
        return Err(Error::InsufficientPoints {
            got: deltas.len(),
            need: 4,
        });
    }
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidConfig {
            reason: "sweep deltas must be positive".into(),
        });
    }
    let dt = stable_dt(&[k1, k2], &base_config.grid, &deltas, DEFAULT_SAFETY);

    let entries = map_entries(&deltas, |&delta| -> Result<PairOutcome> {
        let mut config = base_config.clone();
        config.delta = delta;
        config.dt = dt;
        let outcome = run_pair(k1, k2, data, &config, s_meas)?;
        if let PairStatus::Aborted { reason, .. } = &outcome.series.status {
            return Err(Error::MismatchedRuns {
                delta,
                reason: reason.clone(),
            });
        }
        Ok(outcome)
    });

    let mut outcomes = Vec::with_capacity(deltas.len());
    for entry in entries {
        outcomes.push(entry?);
    }
    let rows = deltas
        .iter()
        .zip(&outcomes)
        .map(|(&delta, outcome)| RateRow {
            delta,
            error: outcome.series.max_growth_ratio(),
        })
        .collect();
    Ok(SweepResult {
        table: RateTable { rows, fit: None },
        outcomes,
        dt,
    })
}

#[cfg(feature = "parallel")]
fn map_entries<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Send + Sync) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_entries<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Send + Sync) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Ordinary least squares of ln(error) against ln(delta).
pub fn fit_rate(table: &RateTable) -> Result<RateFit> {
    if table.rows.len() < 4 {
        return Err(Error::InsufficientPoints {
            got: table.rows.len(),
            need: 4,
        });
    }
    for row in &table.rows {
        if !(row.error > NOISE_FLOOR) {
            return Err(Error::DegenerateTable {
                reason: format!(
                    "error {:.3e} at delta = {} is at the noise floor",
                    row.error, row.delta
                ),
            });
        }
    }
    let n = table.rows.len() as f64;
    let xs: Vec<f64> = table.rows.iter().map(|r| r.delta.ln()).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.error.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateTable {
            reason: "all deltas are equal".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let d = y - (intercept + slope * x);
            d * d
        })
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (ss_res / n).sqrt(),
    })
}

/// Result of the linear-envelope heuristic.
#[derive(Debug, Clone, Copy)]
pub struct GrowthCheck {
    pub pass: bool,
    pub max_ratio: f64,
    /// diff_norm / (1 + t) at the first snapshot with t >= 1.
    pub reference_ratio: f64,
}

/// Flag series whose diff_norm / (1 + t) ratio after t = 1 exceeds
/// `threshold` times its value at t = 1.
pub fn growth_check(series: &DiffSeries, threshold: f64) -> GrowthCheck {
    let max_ratio = series.max_growth_ratio();
    let reference = series
        .times
        .iter()
        .position(|&t| t >= 1.0)
        .map(|i| series.growth_ratio[i]);
    let pass = match reference {
        None => true,
        Some(r) => !series
            .times
            .iter()
            .zip(&series.growth_ratio)
            .any(|(&t, &ratio)| t > 1.0 && ratio > threshold * r && ratio > NOISE_FLOOR),
    };
    GrowthCheck {
        pass,
        max_ratio,
        reference_ratio: reference.unwrap_or(f64::NAN),
    }
}

/// Verify that scaling the data by epsilon and setting epsilon to 1 yields
/// the same evolution, pointwise up to round-off.
///
/// Returns the max over snapshot times of the L2 norm of the discrepancy.
pub fn scaling_equivalence_check(
    data: &InitialData,
    kernel: &KernelSpec,
    config: &SimConfig,
) -> Result<f64> {
    if !(config.epsilon < 1.0) {
        return Err(Error::InvalidConfig {
            reason: format!("epsilon = {} must be below 1", config.epsilon),
        });
    }
    let baseline = run(data, kernel, config)?;
    let mut scaled_config = config.clone();
    scaled_config.epsilon = 1.0;
    let scaled_data = data.scaled(config.epsilon);
    let scaled = run(&scaled_data, kernel, &scaled_config)?;

    let mut worst = 0.0_f64;
    for (a, b) in baseline.snapshots.iter().zip(&scaled.snapshots) {
        let rescaled: Vec<f64> = a.u.values().iter().map(|u| config.epsilon * u).collect();
        let rescaled =
            crate::grid::GridField::from_values(a.u.grid(), rescaled)?;
        worst = worst.max(b.u.sub(&rescaled)?.sobolev_norm(0.0));
    }
    Ok(worst)
}
