//! Stationary distribution of the finite chain and the observables derived
//! from it.
//!
//! Two solvers are provided so that each can check the other: a dense LU
//! solve of the balance system with the last equation replaced by the
//! normalization, and power iteration from the uniform vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, ModelError, SystemParams, TransitionKernel};

/// Largest state space the dense solver accepts.
pub const DENSE_CAP: usize = 4096;
/// Default max-norm change at which power iteration stops.
pub const POWER_TOL: f64 = 1e-13;
pub const POWER_MAX_ITERS: usize = 10_000_000;
/// Residual above which a direct solution is treated as coming from a
/// singular (reducible) system.
pub const DIRECT_RESIDUAL_LIMIT: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("state space exceeds dense cap ({states} > {cap})")]
    DenseCapExceeded { states: usize, cap: usize },
    #[error("singular balance system: {0}")]
    Singular(String),
    #[error("did not converge after {iters} iterations (last residual {residual:e})")]
    DidNotConverge { iters: usize, residual: f64 },
    #[error("dimension mismatch: distribution has {got} entries, params need {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Direct,
    Power,
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMethod::Direct => "direct",
            SolveMethod::Power => "power",
        })
    }
}

/// Probability vector over codec-ordered states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    /// `max |π − πP|`.
    pub residual: f64,
    pub method: SolveMethod,
    /// Iterations used; 0 for the direct solver.
    pub iterations: usize,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn max_abs_diff(&self, other: &StationaryDistribution) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `max |π − πP|` for an arbitrary vector.
pub fn stationarity_residual(kernel: &TransitionKernel, pi: &[f64]) -> f64 {
    kernel
        .left_mul(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Solves `(Pᵀ − I) π = 0` with the last row replaced by `Σ π = 1`.
pub fn solve_direct(kernel: &TransitionKernel) -> Result<StationaryDistribution, ExactError> {
    let m = kernel.n_states();
    if m > DENSE_CAP {
        return Err(ExactError::DenseCapExceeded {
            states: m,
            cap: DENSE_CAP,
        });
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    for l in 0..m {
        for (r, v) in kernel.row(l) {
            a[(r, l)] += v;
        }
    }
    for i in 0..m {
        a[(i, i)] -= 1.0;
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;

    let lu = a.lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| ExactError::Singular("zero pivot in LU factorization".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ExactError::Singular("non-finite solution".into()));
    }
    if let Some(v) = x.iter().find(|&&v| v < -1e-12) {
        return Err(ExactError::Singular(format!("negative probability {v:e}")));
    }
    let mut pi: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);

    let residual = stationarity_residual(kernel, &pi);
    if residual > DIRECT_RESIDUAL_LIMIT {
        return Err(ExactError::Singular(format!(
            "residual {residual:e} after solve"
        )));
    }
    Ok(StationaryDistribution {
        probabilities: pi,
        residual,
        method: SolveMethod::Direct,
        iterations: 0,
    })
}

/// Iterates `π ← πP` from the uniform vector until the max-norm change is at
/// most `tol`.
pub fn solve_power(
    kernel: &TransitionKernel,
    tol: f64,
    max_iters: usize,
) -> Result<StationaryDistribution, ExactError> {
    let m = kernel.n_states();
    let transposed = kernel.transpose();
    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut change = f64::INFINITY;
    for iter in 1..=max_iters {
        transposed.par_right_mul(&pi, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        change = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if change <= tol {
            let residual = stationarity_residual(kernel, &pi);
            return Ok(StationaryDistribution {
                probabilities: pi,
                residual,
                method: SolveMethod::Power,
                iterations: iter,
            });
        }
    }
    Err(ExactError::DidNotConverge {
        iters: max_iters,
        residual: change,
    })
}

/// Solver selection and limits for the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub state_cap: u64,
    pub dense_cap: usize,
    pub power_tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            state_cap: model::DEFAULT_STATE_CAP,
            dense_cap: DENSE_CAP,
            power_tol: POWER_TOL,
            max_iters: POWER_MAX_ITERS,
        }
    }
}

/// Flow-rate estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    /// `α (1 − ρ₁)`.
    #[serde(rename = "in")]
    pub inflow: f64,
    /// One entry per bond `i → i+1`.
    pub cross: Vec<f64>,
    #[serde(rename = "out")]
    pub outflow: f64,
}

impl Flow {
    /// Largest pairwise gap among all estimators.
    pub fn spread(&self) -> f64 {
        let all = std::iter::once(self.inflow)
            .chain(self.cross.iter().copied())
            .chain(std::iter::once(self.outflow));
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    /// `ρᵢ`, one per cell.
    pub density: Vec<f64>,
    /// `ρᵢ⁽ᵏ⁾` indexed `[cell][type - 1]`.
    pub density_by_type: Vec<Vec<f64>>,
    pub flow: Flow,
}

impl Observables {
    /// The flow rate `J`, taken from the inflow estimator.
    pub fn flow_rate(&self) -> f64 {
        self.flow.inflow
    }
}

/// Densities and flow estimators from a distribution over `params`' states.
pub fn observables(pi: &[f64], params: &SystemParams) -> Result<Observables, ExactError> {
    let expected = params.state_count();
    if pi.len() as u128 != expected {
        return Err(ExactError::DimensionMismatch {
            got: pi.len(),
            expected: expected.min(usize::MAX as u128) as usize,
        });
    }
    let n = params.n_cells();
    let k = params.n_types();
    let codec = params.codec();
    let mut by_type = vec![vec![0.0; k]; n];
    let mut cross = vec![0.0; n.saturating_sub(1)];
    let mut outflow = 0.0;
    for (code, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let state = codec.decode(code as u64);
        let cells = state.cells();
        for (i, &c) in cells.iter().enumerate() {
            if c != 0 {
                by_type[i][c as usize - 1] += w;
            }
        }
        for (i, bond) in cross.iter_mut().enumerate() {
            if cells[i] != 0 && cells[i + 1] == 0 {
                *bond += w * params.type_spec(cells[i]).hop_prob;
            }
        }
        if cells[n - 1] != 0 {
            outflow += w * params.type_spec(cells[n - 1]).exit_prob;
        }
    }
    let density: Vec<f64> = by_type.iter().map(|row| row.iter().sum()).collect();
    let inflow = params.alpha() * (1.0 - density[0]);
    Ok(Observables {
        density,
        density_by_type: by_type,
        flow: Flow {
            inflow,
            cross,
            outflow,
        },
    })
}

/// Stationary distribution and observables of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub distribution: StationaryDistribution,
    pub observables: Observables,
}

/// Kernel build, stationary solve and observables. Uses the dense solver up
/// to `dense_cap` states and power iteration beyond.
pub fn analyze(params: &SystemParams, opts: &SolveOptions) -> Result<ExactResult, ExactError> {
    let kernel = model::build_kernel(params, opts.state_cap)?;
    let distribution = if kernel.n_states() <= opts.dense_cap.min(DENSE_CAP) {
        solve_direct(&kernel)?
    } else {
        solve_power(&kernel, opts.power_tol, opts.max_iters)?
    };
    let observables = observables(&distribution.probabilities, params)?;
    Ok(ExactResult {
        distribution,
        observables,
    })
}
