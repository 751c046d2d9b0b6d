//! Work statistics for memoryless coarse operations on a two-level system.
//!
//! A [`Protocol`] is a cyclic sequence of partial thermalizations, level
//! transformations and bit flips acting on a qubit in contact with a bath
//! described by a [`ThermalContext`]. The crate computes exact and sampled
//! work laws of protocols, decomposes them into resolved paths, evaluates the
//! probabilistic work-loss bounds for transitions that memoryless protocols
//! cannot realize for free, and classifies qubit transitions accordingly.

pub mod bounds;
pub mod characterize;
pub mod engine;
pub mod error;
pub mod format;
pub mod paths;
pub mod protocol;
pub mod thermo;
pub mod verify;

pub use engine::{
    brute_force_work_distribution, exact_work_distribution, final_state, monte_carlo, prob_work_at_most,
    total_variation, ExactSolver, MonteCarloEstimate, WorkDistribution,
};
pub use error::{Error, Result};
pub use protocol::{Protocol, Step};
pub use thermo::{QubitState, ThermalContext};
