//! Multi-type synchronous exclusion process on an open one-dimensional
//! lattice.
//!
//! Particles of `K` types arrive at cell 1 with probability `α` (type `k`
//! with probability `aₖ`), hop forward into a vacant cell with probability
//! `pₖ` and leave from cell `N` with probability `βₖ`. All cells update in
//! parallel from the configuration at time `t`.
//!
//! - [`model`]: parameters, state codec, successor law and transition kernel
//! - [`exact`]: stationary distribution (direct and power iteration) and
//!   observables
//! - [`approx`]: harmonic-mean single-type reduction
//! - [`theorems`]: numeric checks of the two-cell exactness identities
//! - [`sim`]: seeded Monte Carlo with batch-means error bars
//! - [`cli`]: the `tasep` command

pub mod approx;
pub mod cli;
pub mod config;
pub mod exact;
pub mod model;
pub mod reference;
pub mod report;
pub mod sim;
pub mod theorems;

pub use exact::{Observables, StationaryDistribution};
pub use model::{LatticeState, SystemParams, TransitionKernel, TypeSpec};
