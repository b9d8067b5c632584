//! Numeric checks of the two-cell exactness results and of the occupancy-set
//! (G-set) correspondence between a multi-type system and its auxiliary
//! single-type system.
//!
//! Every check solves both chains with the direct solver and reports one
//! record per identity. Nothing is derived symbolically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::{self, AuxiliaryParams};
use crate::exact::{self, ExactError, Observables, SolveOptions};
use crate::model::{LatticeState, ModelError, StateCodec, SystemParams, TypeSpec};

/// Residual bound for every identity.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Default seed of the randomized special-case suite.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoremError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

impl From<ModelError> for TheoremError {
    fn from(e: ModelError) -> Self {
        TheoremError::Exact(ExactError::Model(e))
    }
}

/// Whether to refuse instances outside the special case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precondition {
    #[default]
    Enforce,
    AllowMismatch,
}

/// Transcription of the arrival-plus-exit term from state (0,2) in the
/// balance equation of state (2,0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Eq23Variant {
    /// `α a₂ β₂ P(0,2)`, symmetric with the state-(1,0) equation.
    #[default]
    Corrected,
    /// `α a₂ P(0,2)` as printed.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub pass: bool,
}

impl IdentityRecord {
    pub fn new(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let residual = (lhs - rhs).abs();
        Self {
            id: id.into(),
            lhs,
            rhs,
            residual,
            pass: residual <= IDENTITY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub records: Vec<IdentityRecord>,
}

impl Report {
    pub fn new(name: impl Into<String>, records: Vec<IdentityRecord>) -> Self {
        Self {
            name: name.into(),
            records,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn record(&self, id: &str) -> Option<&IdentityRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Occupancy indicator: 0 for a vacant cell, 1 otherwise.
pub fn eta(k: u8) -> u8 {
    u8::from(k > 0)
}

pub fn eta_state(state: &LatticeState) -> LatticeState {
    LatticeState::new(state.cells().iter().map(|&c| eta(c)).collect())
}

/// For each auxiliary state (in its codec order), the codes of all
/// multi-type states with that occupancy pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct GSetIndex {
    sets: Vec<Vec<u64>>,
    star_codec: StateCodec,
}

impl GSetIndex {
    pub fn build(params: &SystemParams, cap: u64) -> Result<Self, ModelError> {
        let count = crate::model::checked_state_count(params, cap)?;
        let codec = params.codec();
        let star_codec = StateCodec::new(params.n_cells(), 1);
        let mut sets = vec![Vec::new(); star_codec.state_count() as usize];
        for code in 0..count as u64 {
            let star = eta_state(&codec.decode(code));
            sets[star_codec.encode(&star) as usize].push(code);
        }
        Ok(Self { sets, star_codec })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn members(&self, star: &LatticeState) -> &[u64] {
        &self.sets[self.star_codec.encode(star) as usize]
    }

    pub fn sets(&self) -> &[Vec<u64>] {
        &self.sets
    }

    /// `Σ_{x ∈ G(x*)} π(x)` for every auxiliary state.
    pub fn sums(&self, pi: &[f64]) -> Vec<f64> {
        self.sets
            .iter()
            .map(|set| set.iter().map(|&c| pi[c as usize]).sum())
            .collect()
    }
}

/// Both chains of a two-system comparison, solved exactly.
#[derive(Debug, Clone)]
pub struct SolvedPair {
    pub params: SystemParams,
    pub aux: AuxiliaryParams,
    pub pi: Vec<f64>,
    pub pi_star: Vec<f64>,
    pub obs: Observables,
    pub obs_star: Observables,
}

pub fn solve_pair(params: &SystemParams) -> Result<SolvedPair, TheoremError> {
    let opts = SolveOptions::default();
    let full = exact::analyze(params, &opts)?;
    let aux = approx::reduce(params);
    let star = exact::analyze(aux.system(), &opts)?;
    Ok(SolvedPair {
        params: params.clone(),
        aux,
        pi: full.distribution.probabilities,
        pi_star: star.distribution.probabilities,
        obs: full.observables,
        obs_star: star.observables,
    })
}

fn equal_exit_probs(params: &SystemParams) -> bool {
    let first = params.types()[0].exit_prob;
    params
        .types()
        .iter()
        .all(|t| (t.exit_prob - first).abs() <= 1e-15)
}

fn require(cond: bool, what: &str) -> Result<(), TheoremError> {
    if cond {
        Ok(())
    } else {
        Err(TheoremError::PreconditionViolated(what.to_string()))
    }
}

fn check_special_case(
    params: &SystemParams,
    need_two_types: bool,
    pre: Precondition,
) -> Result<(), TheoremError> {
    require(params.n_cells() == 2, "requires N = 2")?;
    if need_two_types {
        require(params.n_types() == 2, "requires K = 2")?;
    }
    if pre == Precondition::Enforce {
        require(
            equal_exit_probs(params),
            "requires equal exit probabilities",
        )?;
    }
    Ok(())
}

/// Two-cell state probabilities of S expressed through those of S*.
pub fn verify_theorem2(params: &SystemParams, pre: Precondition) -> Result<Report, TheoremError> {
    check_special_case(params, true, pre)?;
    let pair = solve_pair(params)?;
    Ok(theorem2_records(&pair))
}

fn theorem2_records(pair: &SolvedPair) -> Report {
    let t = pair.params.types();
    let (a1, a2) = (t[0].arrival_weight, t[1].arrival_weight);
    let (p1, p2) = (t[0].hop_prob, t[1].hop_prob);
    let ps = pair.aux.hop_prob;
    let p = |x1: usize, x2: usize| pair.pi[3 * x1 + x2];
    let s = |x1: usize, x2: usize| pair.pi_star[2 * x1 + x2];
    let records = vec![
        IdentityRecord::new("eq3:P(0,0)", p(0, 0), s(0, 0)),
        IdentityRecord::new("eq4:P(0,1)", p(0, 1), a1 * s(0, 1)),
        IdentityRecord::new("eq5:P(0,2)", p(0, 2), a2 * s(0, 1)),
        IdentityRecord::new("eq6:P(1,0)", p(1, 0), a1 * ps / p1 * s(1, 0)),
        IdentityRecord::new("eq7:P(1,1)", p(1, 1), a1 * a1 * s(1, 1)),
        IdentityRecord::new("eq8:P(1,2)", p(1, 2), a1 * a2 * s(1, 1)),
        IdentityRecord::new("eq9:P(2,0)", p(2, 0), a2 * ps / p2 * s(1, 0)),
        IdentityRecord::new("eq10:P(2,1)", p(2, 1), a1 * a2 * s(1, 1)),
        IdentityRecord::new("eq11:P(2,2)", p(2, 2), a2 * a2 * s(1, 1)),
    ];
    Report::new("theorem2", records)
}

/// G-set sums of S against S* state probabilities.
pub fn verify_theorem3(params: &SystemParams, pre: Precondition) -> Result<Report, TheoremError> {
    match pre {
        Precondition::Enforce => check_special_case(params, true, pre)?,
        Precondition::AllowMismatch => {}
    }
    let pair = solve_pair(params)?;
    let index = GSetIndex::build(params, crate::model::DEFAULT_STATE_CAP)?;
    Ok(gset_records("theorem3", &pair, &index))
}

fn gset_records(name: &str, pair: &SolvedPair, index: &GSetIndex) -> Report {
    let star_codec = StateCodec::new(pair.params.n_cells(), 1);
    let records = index
        .sums(&pair.pi)
        .into_iter()
        .zip(&pair.pi_star)
        .enumerate()
        .map(|(code, (sum, &star))| {
            IdentityRecord::new(format!("G{}", star_codec.decode(code as u64)), sum, star)
        })
        .collect();
    Report::new(name, records)
}

/// Exploratory G-set check for any `N` and `K`; mismatches are reported, not
/// raised.
pub fn probe_gset_sums(params: &SystemParams) -> Result<Report, TheoremError> {
    let pair = solve_pair(params)?;
    let index = GSetIndex::build(params, crate::model::DEFAULT_STATE_CAP)?;
    Ok(gset_records("gset-probe", &pair, &index))
}

/// Per-cell densities and flow of S against S*.
pub fn verify_theorems4_5(
    params: &SystemParams,
    pre: Precondition,
) -> Result<Report, TheoremError> {
    if pre == Precondition::Enforce {
        check_special_case(params, false, pre)?;
    }
    let pair = solve_pair(params)?;
    Ok(density_flow_records(&pair))
}

fn density_flow_records(pair: &SolvedPair) -> Report {
    let mut records: Vec<IdentityRecord> = pair
        .obs
        .density
        .iter()
        .zip(&pair.obs_star.density)
        .enumerate()
        .map(|(i, (&r, &rs))| IdentityRecord::new(format!("rho{}", i + 1), r, rs))
        .collect();
    records.push(IdentityRecord::new(
        "J",
        pair.obs.flow_rate(),
        pair.obs_star.flow_rate(),
    ));
    Report::new("theorems4_5", records)
}

/// Balance equations of the single-type two-cell chain, written out by hand.
pub fn single_type_balance(alpha: f64, p: f64, beta: f64, pi: &[f64]) -> Vec<IdentityRecord> {
    let [p00, p01, p10, p11] = [pi[0], pi[1], pi[2], pi[3]];
    vec![
        IdentityRecord::new("eq12", alpha * p00, (1.0 - alpha) * beta * p01),
        IdentityRecord::new("eq13", (1.0 - (1.0 - alpha) * (1.0 - beta)) * p01, p * p10),
        IdentityRecord::new(
            "eq14",
            p * p10,
            alpha * p00 + alpha * beta * p01 + beta * p11,
        ),
        IdentityRecord::new("eq15", beta * p11, alpha * (1.0 - beta) * p01),
        IdentityRecord::new("eq16", p00 + p01 + p10 + p11, 1.0),
    ]
}

/// Balance equations of the two-type two-cell chain. The exit probability
/// of each term is that of the particle in cell 2, which reduces to the
/// common `β` in the equal-exit case.
pub fn two_type_balance(
    params: &SystemParams,
    pi: &[f64],
    eq23: Eq23Variant,
) -> Vec<IdentityRecord> {
    let al = params.alpha();
    let t = params.types();
    let (a1, a2) = (t[0].arrival_weight, t[1].arrival_weight);
    let (p1, p2) = (t[0].hop_prob, t[1].hop_prob);
    let (b1, b2) = (t[0].exit_prob, t[1].exit_prob);
    let p = |x1: usize, x2: usize| pi[3 * x1 + x2];
    let stay_vacant = |b: f64| 1.0 - (1.0 - al) * (1.0 - b);
    let eq23_from_02 = match eq23 {
        Eq23Variant::Corrected => al * a2 * b2 * p(0, 2),
        Eq23Variant::PaperLiteral => al * a2 * p(0, 2),
    };
    vec![
        IdentityRecord::new(
            "eq17",
            al * p(0, 0),
            (1.0 - al) * b1 * p(0, 1) + (1.0 - al) * b2 * p(0, 2),
        ),
        IdentityRecord::new("eq18", stay_vacant(b1) * p(0, 1), p1 * p(1, 0)),
        IdentityRecord::new("eq19", stay_vacant(b2) * p(0, 2), p2 * p(2, 0)),
        IdentityRecord::new(
            "eq20",
            p1 * p(1, 0),
            al * a1 * p(0, 0)
                + al * a1 * b1 * p(0, 1)
                + al * a1 * b2 * p(0, 2)
                + b1 * p(1, 1)
                + b2 * p(1, 2),
        ),
        IdentityRecord::new("eq21", b1 * p(1, 1), al * a1 * (1.0 - b1) * p(0, 1)),
        IdentityRecord::new("eq22", b2 * p(1, 2), al * a1 * (1.0 - b2) * p(0, 2)),
        IdentityRecord::new(
            "eq23",
            p2 * p(2, 0),
            al * a2 * p(0, 0) + al * a2 * b1 * p(0, 1) + eq23_from_02 + b1 * p(2, 1) + b2 * p(2, 2),
        ),
        IdentityRecord::new("eq24", b1 * p(2, 1), al * a2 * (1.0 - b1) * p(0, 1)),
        IdentityRecord::new("eq25", b2 * p(2, 2), al * a2 * (1.0 - b2) * p(0, 2)),
        IdentityRecord::new("eq26", pi.iter().sum(), 1.0),
    ]
}

/// Substitutes given vectors into the transcribed balance equations. `pi`
/// belongs to `params`; `pi_star`, when given for a two-type system, belongs
/// to its auxiliary system.
pub fn balance_residuals(
    params: &SystemParams,
    pi: &[f64],
    pi_star: Option<&[f64]>,
    eq23: Eq23Variant,
) -> Result<Report, TheoremError> {
    require(
        params.n_cells() == 2,
        "balance transcription requires N = 2",
    )?;
    let m = params.state_count() as usize;
    if pi.len() != m {
        return Err(TheoremError::DimensionMismatch(format!(
            "pi has {} entries, expected {m}",
            pi.len()
        )));
    }
    let records = match params.n_types() {
        1 => {
            let t = params.types()[0];
            single_type_balance(params.alpha(), t.hop_prob, t.exit_prob, pi)
        }
        2 => {
            let mut records = Vec::new();
            if let Some(star) = pi_star {
                if star.len() != 4 {
                    return Err(TheoremError::DimensionMismatch(format!(
                        "pi_star has {} entries, expected 4",
                        star.len()
                    )));
                }
                let aux = approx::reduce(params);
                records.extend(
                    single_type_balance(params.alpha(), aux.hop_prob, aux.exit_prob, star)
                        .into_iter()
                        .map(|mut r| {
                            r.id = format!("{}*", r.id);
                            r
                        }),
                );
            }
            records.extend(two_type_balance(params, pi, eq23));
            records
        }
        k => {
            return Err(TheoremError::PreconditionViolated(format!(
                "balance transcription covers K = 1 or 2, got K = {k}"
            )))
        }
    };
    Ok(Report::new("balance", records))
}

pub fn verify_balance_equations(
    params: &SystemParams,
    eq23: Eq23Variant,
) -> Result<Report, TheoremError> {
    require(
        params.n_cells() == 2,
        "balance transcription requires N = 2",
    )?;
    require(
        params.n_types() <= 2,
        "balance transcription covers K = 1 or 2",
    )?;
    let pair = solve_pair(params)?;
    let star = (params.n_types() == 2).then_some(pair.pi_star.as_slice());
    balance_residuals(params, &pair.pi, star, eq23)
}

/// Deterministic random draws inside the special case `N = 2`, `K = 2`,
/// `β₁ = β₂`.
pub fn special_case_draws(seed: u64, count: usize) -> Vec<SystemParams> {
    special_case_draws_k(seed, count, 2)
}

/// Same as [`special_case_draws`] with `K` types.
pub fn special_case_draws_k(seed: u64, count: usize, k: usize) -> Vec<SystemParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let alpha = rng.random_range(0.05..0.95);
            let beta = rng.random_range(0.05..=1.0);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let head: f64 = weights[..k - 1].iter().sum();
            weights[k - 1] = 1.0 - head;
            let types = weights
                .into_iter()
                .map(|a| TypeSpec::new(a, rng.random_range(0.05..=1.0), beta))
                .collect();
            SystemParams::new(2, alpha, types).expect("draw within validated ranges")
        })
        .collect()
}

/// Outcome of every check over a set of draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub draws: usize,
    pub reports: Vec<Report>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(Report::all_pass)
    }

    pub fn max_residual(&self, name: &str) -> f64 {
        self.reports
            .iter()
            .filter(|r| r.name == name)
            .map(Report::max_residual)
            .fold(0.0, f64::max)
    }
}

/// Theorem 2, 3, 4–5 and balance checks on `count` special-case draws.
pub fn run_special_case_suite(
    seed: u64,
    count: usize,
    eq23: Eq23Variant,
) -> Result<SuiteReport, TheoremError> {
    let mut reports = Vec::new();
    for params in special_case_draws(seed, count) {
        let pair = solve_pair(&params)?;
        let index = GSetIndex::build(&params, crate::model::DEFAULT_STATE_CAP)?;
        reports.push(theorem2_records(&pair));
        reports.push(gset_records("theorem3", &pair, &index));
        reports.push(density_flow_records(&pair));
        reports.push(balance_residuals(
            &params,
            &pair.pi,
            Some(&pair.pi_star),
            eq23,
        )?);
    }
    Ok(SuiteReport {
        seed,
        draws: count,
        reports,
    })
}
