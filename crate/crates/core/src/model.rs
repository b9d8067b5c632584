//! Process definition: parameters, the dense state codec and the one-step
//! successor distribution under the synchronous update rule.
//!
//! Every enabling condition is read from the time-`t` configuration. A cell
//! vacated during a step cannot be re-entered in that same step, so the
//! particle in cell 1 of `(1, 1)` stays put even when the particle in cell 2
//! leaves. The enabled events never write to the same cell, which lets the
//! successor law be written as a product measure over independent Bernoulli
//! trials.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `Σ aₖ = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Default refusal threshold for full state-space enumeration.
pub const DEFAULT_STATE_CAP: u64 = 1 << 24;

/// Largest number of particle types representable in a cell byte.
pub const MAX_TYPES: usize = u8::MAX as usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("n_cells must be at least 1")]
    NoCells,
    #[error("at least one particle type is required")]
    NoTypes,
    #[error("too many particle types: {0} (max {MAX_TYPES})")]
    TooManyTypes(usize),
    #[error("alpha out of open interval (0,1): {0}")]
    AlphaOutOfRange(f64),
    #[error("type {index}: {field} = {value} is out of range {range}")]
    ProbabilityOutOfRange {
        index: usize,
        field: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("arrival weights sum to {0}, expected 1")]
    WeightsDoNotSumToOne(f64),
    #[error("state space too large ({states} states, cap {cap}); use simulator")]
    StateSpaceTooLarge { states: u128, cap: u64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Per-type parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeSpec {
    /// Probability `aₖ` that an arriving particle has this type.
    pub arrival_weight: f64,
    /// Probability `pₖ` of a forward move attempt per step.
    pub hop_prob: f64,
    /// Probability `βₖ` of leaving from the last cell per step.
    pub exit_prob: f64,
}

impl TypeSpec {
    pub fn new(arrival_weight: f64, hop_prob: f64, exit_prob: f64) -> Self {
        Self {
            arrival_weight,
            hop_prob,
            exit_prob,
        }
    }
}

/// Full model specification. Construct through [`SystemParams::new`] for
/// ergodic instances or [`SystemParams::new_forced`] for exploration of the
/// boundary cases the simulator tolerates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    n_cells: usize,
    alpha: f64,
    types: Vec<TypeSpec>,
}

impl SystemParams {
    pub fn new(n_cells: usize, alpha: f64, types: Vec<TypeSpec>) -> Result<Self, ModelError> {
        let params = Self {
            n_cells,
            alpha,
            types,
        };
        validate(&params)?;
        Ok(params)
    }

    /// Accepts closed-interval probabilities (`α ∈ [0,1]`, `pₖ, βₖ ∈ [0,1]`).
    /// The resulting chain may be reducible; exact solvers will report it.
    pub fn new_forced(
        n_cells: usize,
        alpha: f64,
        types: Vec<TypeSpec>,
    ) -> Result<Self, ModelError> {
        let params = Self {
            n_cells,
            alpha,
            types,
        };
        validate_structure(&params, true)?;
        Ok(params)
    }

    /// Single-type system.
    pub fn single(
        n_cells: usize,
        alpha: f64,
        hop_prob: f64,
        exit_prob: f64,
    ) -> Result<Self, ModelError> {
        Self::new(
            n_cells,
            alpha,
            vec![TypeSpec::new(1.0, hop_prob, exit_prob)],
        )
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn types(&self) -> &[TypeSpec] {
        &self.types
    }

    /// Number of particle types `K`.
    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    /// Spec of particle type `k` (1-based, matching cell values).
    pub fn type_spec(&self, k: u8) -> &TypeSpec {
        &self.types[k as usize - 1]
    }

    pub fn codec(&self) -> StateCodec {
        StateCodec::new(self.n_cells, self.types.len())
    }

    /// `(K+1)^N`, saturating in `u128`.
    pub fn state_count(&self) -> u128 {
        self.codec().state_count()
    }

    /// True when this instance passes the strict (ergodic) validation.
    pub fn is_ergodic_range(&self) -> bool {
        validate(self).is_ok()
    }
}

fn check_closed(
    index: usize,
    field: &'static str,
    value: f64,
    lower_open: bool,
) -> Result<(), ModelError> {
    let ok = if lower_open {
        value > 0.0 && value <= 1.0
    } else {
        (0.0..=1.0).contains(&value)
    };
    if ok {
        Ok(())
    } else {
        Err(ModelError::ProbabilityOutOfRange {
            index,
            field,
            value,
            range: if lower_open { "(0,1]" } else { "[0,1]" },
        })
    }
}

fn validate_structure(params: &SystemParams, relaxed: bool) -> Result<(), ModelError> {
    if params.n_cells < 1 {
        return Err(ModelError::NoCells);
    }
    if params.types.is_empty() {
        return Err(ModelError::NoTypes);
    }
    if params.types.len() > MAX_TYPES {
        return Err(ModelError::TooManyTypes(params.types.len()));
    }
    let alpha = params.alpha;
    let alpha_ok = if relaxed {
        (0.0..=1.0).contains(&alpha)
    } else {
        alpha > 0.0 && alpha < 1.0
    };
    if !alpha_ok {
        return Err(ModelError::AlphaOutOfRange(alpha));
    }
    for (i, t) in params.types.iter().enumerate() {
        let index = i + 1;
        check_closed(index, "arrival_weight", t.arrival_weight, true)?;
        check_closed(index, "hop_prob", t.hop_prob, !relaxed)?;
        check_closed(index, "exit_prob", t.exit_prob, !relaxed)?;
    }
    let sum: f64 = params.types.iter().map(|t| t.arrival_weight).sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(ModelError::WeightsDoNotSumToOne(sum));
    }
    Ok(())
}

/// Checks every invariant required for ergodicity and reports the first
/// violation. `α ∈ {0,1}`, `pₖ = 0` and `βₖ = 0` are rejected; `pₖ = 1` and
/// `βₖ = 1` are fine since the arrival coin keeps the chain aperiodic.
pub fn validate(params: &SystemParams) -> Result<&SystemParams, ModelError> {
    validate_structure(params, false)?;
    Ok(params)
}

/// One configuration: `cells[i]` is 0 when cell `i+1` is vacant, `k` when it
/// holds a type-`k` particle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeState {
    cells: Vec<u8>,
}

impl LatticeState {
    pub fn new(cells: Vec<u8>) -> Self {
        Self { cells }
    }

    pub fn empty(n_cells: usize) -> Self {
        Self {
            cells: vec![0; n_cells],
        }
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [u8] {
        &mut self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }

    pub fn check(&self, params: &SystemParams) -> Result<(), ModelError> {
        if self.cells.len() != params.n_cells() {
            return Err(ModelError::InvalidState(format!(
                "expected {} cells, got {}",
                params.n_cells(),
                self.cells.len()
            )));
        }
        if let Some(&bad) = self.cells.iter().find(|&&c| c as usize > params.n_types()) {
            return Err(ModelError::InvalidState(format!(
                "cell value {bad} exceeds K = {}",
                params.n_types()
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for LatticeState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u8>> for LatticeState {
    fn from(cells: Vec<u8>) -> Self {
        Self::new(cells)
    }
}

/// Base-`(K+1)` positional codec, cell 1 being the most significant digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateCodec {
    n_cells: usize,
    base: u64,
}

impl StateCodec {
    pub fn new(n_cells: usize, n_types: usize) -> Self {
        Self {
            n_cells,
            base: n_types as u64 + 1,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn state_count(&self) -> u128 {
        (0..self.n_cells).fold(1u128, |acc, _| acc.saturating_mul(self.base as u128))
    }

    pub fn encode(&self, state: &LatticeState) -> u64 {
        state
            .cells()
            .iter()
            .fold(0u64, |acc, &c| acc * self.base + c as u64)
    }

    pub fn decode(&self, mut code: u64) -> LatticeState {
        let mut cells = vec![0u8; self.n_cells];
        for cell in cells.iter_mut().rev() {
            *cell = (code % self.base) as u8;
            code /= self.base;
        }
        LatticeState::new(cells)
    }
}

/// Checks `(K+1)^N ≤ cap` and returns the count.
pub fn checked_state_count(params: &SystemParams, cap: u64) -> Result<usize, ModelError> {
    let states = params.state_count();
    if states > cap as u128 {
        return Err(ModelError::StateSpaceTooLarge { states, cap });
    }
    Ok(states as usize)
}

/// All states in ascending codec order.
pub fn enumerate_states(params: &SystemParams, cap: u64) -> Result<Vec<LatticeState>, ModelError> {
    let count = checked_state_count(params, cap)?;
    let codec = params.codec();
    Ok((0..count as u64).map(|code| codec.decode(code)).collect())
}

/// An enabled event and its success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// Cell 1 is vacant; a particle arrives with probability `α`.
    Arrival { prob: f64 },
    /// Cell `from` (0-based) is occupied and `from + 1` is vacant.
    Move { from: usize, prob: f64 },
    /// The last cell is occupied.
    Exit { prob: f64 },
}

impl Event {
    pub fn prob(&self) -> f64 {
        match *self {
            Event::Arrival { prob } | Event::Move { prob, .. } | Event::Exit { prob } => prob,
        }
    }
}

/// Events enabled in a given state, in the fixed draw order: arrival, bonds
/// from left to right, exit.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSet {
    pub arrival: Option<Event>,
    pub moves: Vec<Event>,
    pub exit: Option<Event>,
}

impl EventSet {
    pub fn of(state: &LatticeState, params: &SystemParams) -> Self {
        let cells = state.cells();
        let n = cells.len();
        let arrival = (cells[0] == 0).then_some(Event::Arrival {
            prob: params.alpha(),
        });
        let moves = (0..n.saturating_sub(1))
            .filter(|&i| cells[i] != 0 && cells[i + 1] == 0)
            .map(|i| Event::Move {
                from: i,
                prob: params.type_spec(cells[i]).hop_prob,
            })
            .collect();
        let exit = (cells[n - 1] != 0).then(|| Event::Exit {
            prob: params.type_spec(cells[n - 1]).exit_prob,
        });
        Self {
            arrival,
            moves,
            exit,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.arrival
            .iter()
            .chain(self.moves.iter())
            .chain(self.exit.iter())
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells written by each event. Used to check that no two events touch
    /// the same cell.
    pub fn written_cells(&self, n_cells: usize) -> Vec<Vec<usize>> {
        self.iter()
            .map(|e| match *e {
                Event::Arrival { .. } => vec![0],
                Event::Move { from, .. } => vec![from, from + 1],
                Event::Exit { .. } => vec![n_cells - 1],
            })
            .collect()
    }
}

/// Applies an event to `next`, reading the particle from `current`. Arrivals
/// are handled by the caller because they branch over types.
fn apply(event: &Event, current: &[u8], next: &mut [u8]) {
    match *event {
        Event::Move { from, .. } => {
            next[from + 1] = current[from];
            next[from] = 0;
        }
        Event::Exit { .. } => {
            let last = next.len() - 1;
            next[last] = 0;
        }
        Event::Arrival { .. } => {}
    }
}

/// One-step successor distribution of `state`, sorted by codec order, with
/// duplicate states merged and zero-probability branches dropped.
pub fn successors(state: &LatticeState, params: &SystemParams) -> Vec<(LatticeState, f64)> {
    let codec = params.codec();
    successor_codes(state, params)
        .into_iter()
        .map(|(code, p)| (codec.decode(code), p))
        .collect()
}

/// Same as [`successors`] but keyed by codec value.
pub fn successor_codes(state: &LatticeState, params: &SystemParams) -> Vec<(u64, f64)> {
    let events = EventSet::of(state, params);
    let current = state.cells();
    let mut partial: Vec<(Vec<u8>, f64)> = vec![(current.to_vec(), 1.0)];

    for event in events.moves.iter().chain(events.exit.iter()) {
        let p = event.prob();
        let mut branched = Vec::with_capacity(partial.len() * 2);
        for (cells, w) in partial {
            if p > 0.0 {
                let mut fired = cells.clone();
                apply(event, current, &mut fired);
                branched.push((fired, w * p));
            }
            if p < 1.0 {
                branched.push((cells, w * (1.0 - p)));
            }
        }
        partial = branched;
    }

    if let Some(arrival) = events.arrival {
        let p = arrival.prob();
        let mut branched = Vec::with_capacity(partial.len() * (params.n_types() + 1));
        for (cells, w) in partial {
            if p > 0.0 {
                for (k, t) in params.types().iter().enumerate() {
                    let mut fired = cells.clone();
                    fired[0] = (k + 1) as u8;
                    branched.push((fired, w * p * t.arrival_weight));
                }
            }
            if p < 1.0 {
                branched.push((cells, w * (1.0 - p)));
            }
        }
        partial = branched;
    }

    let codec = params.codec();
    let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
    for (cells, w) in partial {
        if w > 0.0 {
            *merged
                .entry(codec.encode(&LatticeState::new(cells)))
                .or_insert(0.0) += w;
        }
    }
    merged.into_iter().collect()
}

/// Sparse row-stochastic transition matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n_states: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TransitionKernel {
    /// Builds a kernel from explicit rows of `(column, probability)` pairs.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_states = rows.len();
        let mut row_ptr = Vec::with_capacity(n_states + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                assert!(c < n_states, "column {c} out of range");
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n_states,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Non-zero entries of row `l`.
    pub fn row(&self, l: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[l]..self.row_ptr[l + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, l: usize, r: usize) -> f64 {
        self.row(l).filter(|&(c, _)| c == r).map(|(_, v)| v).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|l| self.row(l).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.row_sums()
            .into_iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_states]; self.n_states];
        for (l, row) in dense.iter_mut().enumerate() {
            for (c, v) in self.row(l) {
                row[c] += v;
            }
        }
        dense
    }

    /// Transposed kernel, so that `π P` becomes a row-parallel product.
    pub fn transpose(&self) -> TransitionKernel {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_states];
        for l in 0..self.n_states {
            for (c, v) in self.row(l) {
                rows[c].push((l, v));
            }
        }
        TransitionKernel::from_rows(rows)
    }

    /// Computes `π P` serially.
    pub fn left_mul(&self, pi: &[f64]) -> Vec<f64> {
        assert_eq!(pi.len(), self.n_states);
        let mut out = vec![0.0; self.n_states];
        for (l, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (c, v) in self.row(l) {
                out[c] += w * v;
            }
        }
        out
    }

    /// Computes `A x` with rows split across workers. On the transposed
    /// kernel this is `π P`.
    pub fn par_right_mul(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        });
    }
}

/// Builds the full kernel, one row per state in codec order. Rows are built in
/// parallel.
pub fn build_kernel(params: &SystemParams, cap: u64) -> Result<TransitionKernel, ModelError> {
    let count = checked_state_count(params, cap)?;
    let codec = params.codec();
    let rows: Vec<Vec<(usize, f64)>> = (0..count as u64)
        .into_par_iter()
        .map(|code| {
            successor_codes(&codec.decode(code), params)
                .into_iter()
                .map(|(c, p)| (c as usize, p))
                .collect()
        })
        .collect();
    Ok(TransitionKernel::from_rows(rows))
}
