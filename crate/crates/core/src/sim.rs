//! Seeded Monte Carlo simulation of the synchronous update.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `seed_from_u64`; replica `r` uses stream `r` of the same seed. Within a
//! step the draws happen in a fixed order: arrival coin, arrival type,
//! bond coins from left to right, exit coin. Only enabled events consume
//! draws.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::model::{self, LatticeState, SystemParams};

pub const DEFAULT_BATCHES: usize = 20;
/// Upper-tail probability used by the transition test.
pub const CHI_SQUARE_LEVEL: f64 = 0.999;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] model::ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub warmup_steps: u64,
    pub sample_steps: u64,
    pub batches: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            warmup_steps: 10_000,
            sample_steps: 1_000_000,
            batches: DEFAULT_BATCHES,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.batches < 2 {
            return Err(SimError::InvalidConfig("batches must be at least 2".into()));
        }
        if self.sample_steps < self.batches as u64 {
            return Err(SimError::InvalidConfig(format!(
                "sample_steps ({}) must be at least batches ({})",
                self.sample_steps, self.batches
            )));
        }
        Ok(())
    }
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepRecord {
    /// Type of the particle that entered cell 1.
    pub arrived: Option<u8>,
    /// Type of the particle that left from the last cell.
    pub exited: Option<u8>,
    /// Number of bond crossings.
    pub moves: usize,
}

/// Categorical sampler over particle types.
#[derive(Debug, Clone)]
pub struct TypeSampler {
    index: WeightedIndex<f64>,
}

impl TypeSampler {
    pub fn new(params: &SystemParams) -> Self {
        let index = WeightedIndex::new(params.types().iter().map(|t| t.arrival_weight))
            .expect("arrival weights are positive");
        Self { index }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        (self.index.sample(rng) + 1) as u8
    }
}

/// Advances `current` by one step into `next`. Both slices have length `N`.
pub fn step_into<R: Rng + ?Sized>(
    current: &[u8],
    next: &mut [u8],
    params: &SystemParams,
    types: &TypeSampler,
    rng: &mut R,
) -> StepRecord {
    let n = current.len();
    next.copy_from_slice(current);
    let mut record = StepRecord::default();

    if current[0] == 0 && rng.random_bool(params.alpha()) {
        let k = types.sample(rng);
        next[0] = k;
        record.arrived = Some(k);
    }
    for i in 0..n - 1 {
        let c = current[i];
        if c != 0 && current[i + 1] == 0 && rng.random_bool(params.type_spec(c).hop_prob) {
            next[i + 1] = c;
            // no arrival can be overwritten here: arrivals need cell 1 vacant at t
            next[i] = 0;
            record.moves += 1;
        }
    }
    let last = current[n - 1];
    if last != 0 && rng.random_bool(params.type_spec(last).exit_prob) {
        next[n - 1] = 0;
        record.exited = Some(last);
    }
    record
}

/// Allocating form of [`step_into`].
pub fn step<R: Rng + ?Sized>(
    state: &LatticeState,
    params: &SystemParams,
    types: &TypeSampler,
    rng: &mut R,
) -> (LatticeState, StepRecord) {
    let mut next = vec![0u8; state.len()];
    let record = step_into(state.cells(), &mut next, params, types, rng);
    (LatticeState::new(next), record)
}

pub fn rng_for(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// A running chain.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: SystemParams,
    types: TypeSampler,
    rng: ChaCha8Rng,
    state: Vec<u8>,
    scratch: Vec<u8>,
}

impl Simulator {
    /// Starts from the empty lattice.
    pub fn new(params: &SystemParams, seed: u64, replica: u64) -> Self {
        let n = params.n_cells();
        Self {
            params: params.clone(),
            types: TypeSampler::new(params),
            rng: rng_for(seed, replica),
            state: vec![0; n],
            scratch: vec![0; n],
        }
    }

    pub fn state(&self) -> &[u8] {
        &self.state
    }

    pub fn advance(&mut self) -> StepRecord {
        let record = step_into(
            &self.state,
            &mut self.scratch,
            &self.params,
            &self.types,
            &mut self.rng,
        );
        std::mem::swap(&mut self.state, &mut self.scratch);
        record
    }
}

/// Mean and batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_batches(batch_means: &[f64]) -> Self {
        let b = batch_means.len() as f64;
        let mean = batch_means.iter().sum::<f64>() / b;
        let var = batch_means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
        Self {
            mean,
            stderr: (var / b).sqrt(),
        }
    }

    /// `|mean − target|` in units of the standard error. Infinite when the
    /// error bar is zero and the target differs.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.stderr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub density: Vec<Estimate>,
    /// Arrivals per step.
    pub flow_in: Estimate,
    /// Exits per step.
    pub flow_out: Estimate,
    pub seed: u64,
    pub replica: u64,
    pub batches: usize,
    pub total_steps: u64,
}

/// Runs one replica. Steps beyond `batches × ⌊sample_steps / batches⌋` are
/// not taken.
pub fn run(params: &SystemParams, config: &SimConfig) -> Result<SimEstimate, SimError> {
    run_replica(params, config, 0)
}

pub fn run_replica(
    params: &SystemParams,
    config: &SimConfig,
    replica: u64,
) -> Result<SimEstimate, SimError> {
    config.validate()?;
    let n = params.n_cells();
    let mut sim = Simulator::new(params, config.seed, replica);
    for _ in 0..config.warmup_steps {
        sim.advance();
    }
    let batch_len = config.sample_steps / config.batches as u64;
    let mut density_batches = vec![Vec::with_capacity(config.batches); n];
    let mut in_batches = Vec::with_capacity(config.batches);
    let mut out_batches = Vec::with_capacity(config.batches);
    let mut occupied = vec![0u64; n];
    for _ in 0..config.batches {
        occupied.iter_mut().for_each(|c| *c = 0);
        let (mut arrivals, mut exits) = (0u64, 0u64);
        for _ in 0..batch_len {
            let rec = sim.advance();
            arrivals += u64::from(rec.arrived.is_some());
            exits += u64::from(rec.exited.is_some());
            for (count, &c) in occupied.iter_mut().zip(sim.state()) {
                *count += u64::from(c != 0);
            }
        }
        let len = batch_len as f64;
        for (batches, &count) in density_batches.iter_mut().zip(&occupied) {
            batches.push(count as f64 / len);
        }
        in_batches.push(arrivals as f64 / len);
        out_batches.push(exits as f64 / len);
    }
    Ok(SimEstimate {
        density: density_batches
            .iter()
            .map(|b| Estimate::from_batches(b))
            .collect(),
        flow_in: Estimate::from_batches(&in_batches),
        flow_out: Estimate::from_batches(&out_batches),
        seed: config.seed,
        replica,
        batches: config.batches,
        total_steps: config.warmup_steps + batch_len * config.batches as u64,
    })
}

/// Independent replicas on separate streams, run in parallel.
pub fn run_replicas(
    params: &SystemParams,
    config: &SimConfig,
    replicas: u64,
) -> Result<Vec<SimEstimate>, SimError> {
    (0..replicas)
        .into_par_iter()
        .map(|r| run_replica(params, config, r))
        .collect()
}

/// Equal-weight pooling of replica estimates.
pub fn pool(estimates: &[Estimate]) -> Estimate {
    let n = estimates.len() as f64;
    Estimate {
        mean: estimates.iter().map(|e| e.mean).sum::<f64>() / n,
        stderr: estimates
            .iter()
            .map(|e| e.stderr * e.stderr)
            .sum::<f64>()
            .sqrt()
            / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareCategory {
    pub state: String,
    pub observed: u64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub from: String,
    pub draws: u64,
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    /// Draws that landed on a state with zero model probability.
    pub unexpected: u64,
    pub pass: bool,
    pub categories: Vec<ChiSquareCategory>,
}

/// Pearson statistic of observed successor counts against `expected`
/// probabilities. Categories are codec values.
pub fn chi_square(
    params: &SystemParams,
    from: &LatticeState,
    observed: &BTreeMap<u64, u64>,
    expected: &[(u64, f64)],
) -> ChiSquareReport {
    let codec = params.codec();
    let draws: u64 = observed.values().sum();
    let mut statistic = 0.0;
    let mut categories = Vec::with_capacity(expected.len());
    for &(code, p) in expected {
        let o = observed.get(&code).copied().unwrap_or(0);
        let e = p * draws as f64;
        if e > 0.0 {
            statistic += (o as f64 - e).powi(2) / e;
        }
        categories.push(ChiSquareCategory {
            state: codec.decode(code).to_string(),
            observed: o,
            expected: e,
        });
    }
    let unexpected: u64 = observed
        .iter()
        .filter(|(c, _)| !expected.iter().any(|(e, _)| e == *c))
        .map(|(_, n)| n)
        .sum();
    let dof = expected.len().saturating_sub(1);
    let critical = if dof == 0 {
        0.0
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(CHI_SQUARE_LEVEL)
    };
    let pass = unexpected == 0 && (dof == 0 || statistic <= critical);
    ChiSquareReport {
        from: from.to_string(),
        draws,
        statistic,
        dof,
        critical,
        unexpected,
        pass,
        categories,
    }
}

/// Samples `draws` single steps from `state` and tests the empirical
/// successor law against [`model::successors`].
pub fn chi_square_transition_test(
    params: &SystemParams,
    state: &LatticeState,
    draws: u64,
    seed: u64,
) -> Result<ChiSquareReport, SimError> {
    state.check(params)?;
    let observed = sample_successors(params, state, draws, seed);
    let expected = model::successor_codes(state, params);
    Ok(chi_square(params, state, &observed, &expected))
}

/// Successor counts from `draws` independent single steps.
pub fn sample_successors(
    params: &SystemParams,
    state: &LatticeState,
    draws: u64,
    seed: u64,
) -> BTreeMap<u64, u64> {
    let codec = params.codec();
    let types = TypeSampler::new(params);
    let mut rng = rng_for(seed, 0);
    let mut next = vec![0u8; state.len()];
    let mut counts = BTreeMap::new();
    for _ in 0..draws {
        step_into(state.cells(), &mut next, params, &types, &mut rng);
        *counts
            .entry(codec.encode(&LatticeState::new(next.clone())))
            .or_insert(0) += 1;
    }
    counts
}
