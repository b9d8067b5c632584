//! Single-type auxiliary system built by replacing the per-type hop and exit
//! probabilities with their arrival-weighted harmonic means, and the
//! approximation of the multi-type observables by that system's exact
//! observables.

use serde::{Deserialize, Serialize};

use crate::exact::{self, ExactError, Observables, SolveOptions};
use crate::model::{SystemParams, TypeSpec};

/// Parameters of the auxiliary system. Always single-type, with the same
/// lattice length and arrival probability as the system it was reduced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryParams {
    pub hop_prob: f64,
    pub exit_prob: f64,
    system: SystemParams,
}

impl AuxiliaryParams {
    pub fn system(&self) -> &SystemParams {
        &self.system
    }
}

/// `1 / Σₖ aₖ / vₖ`.
pub fn weighted_harmonic_mean(weights_and_values: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    1.0 / weights_and_values
        .into_iter()
        .map(|(w, v)| w / v)
        .sum::<f64>()
}

pub fn reduce(params: &SystemParams) -> AuxiliaryParams {
    let types = params.types();
    let hop = weighted_harmonic_mean(types.iter().map(|t| (t.arrival_weight, t.hop_prob)));
    let exit = weighted_harmonic_mean(types.iter().map(|t| (t.arrival_weight, t.exit_prob)));
    // harmonic means of values in (0,1] stay in (0,1]; clamp rounding only
    let hop = hop.min(1.0);
    let exit = exit.min(1.0);
    let system = SystemParams::new(
        params.n_cells(),
        params.alpha(),
        vec![TypeSpec::new(1.0, hop, exit)],
    )
    .expect("reduction of a validated system is valid");
    AuxiliaryParams {
        hop_prob: hop,
        exit_prob: exit,
        system,
    }
}

/// Exact observables of the auxiliary system, used as the approximation for
/// `params`. The multi-type chain is never built.
pub fn approximate_observables(
    params: &SystemParams,
    opts: &SolveOptions,
) -> Result<Observables, ExactError> {
    let aux = reduce(params);
    Ok(exact::analyze(aux.system(), opts)?.observables)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBlock {
    pub density_abs: Vec<f64>,
    pub density_rel: Vec<f64>,
    pub flow_abs: f64,
    pub flow_rel: f64,
}

/// Exact and approximate observables side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub exact: Observables,
    pub approx: Observables,
    pub auxiliary: AuxiliaryParams,
    pub error: ErrorBlock,
}

fn rel(abs: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if abs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        abs / reference.abs()
    }
}

pub fn error_block(exact: &Observables, approx: &Observables) -> ErrorBlock {
    let density_abs: Vec<f64> = exact
        .density
        .iter()
        .zip(&approx.density)
        .map(|(e, a)| (e - a).abs())
        .collect();
    let density_rel = density_abs
        .iter()
        .zip(&exact.density)
        .map(|(&d, &e)| rel(d, e))
        .collect();
    let flow_abs = (exact.flow_rate() - approx.flow_rate()).abs();
    ErrorBlock {
        density_abs,
        density_rel,
        flow_abs,
        flow_rel: rel(flow_abs, exact.flow_rate()),
    }
}

pub fn compare(params: &SystemParams, opts: &SolveOptions) -> Result<Comparison, ExactError> {
    let exact = exact::analyze(params, opts)?.observables;
    let auxiliary = reduce(params);
    let approx = exact::analyze(auxiliary.system(), opts)?.observables;
    let error = error_block(&exact, &approx);
    Ok(Comparison {
        exact,
        approx,
        auxiliary,
        error,
    })
}
