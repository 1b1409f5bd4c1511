//! Discrete-time solver for mean field games of timing on binomial lattices.
//!
//! The crate is organized bottom-up:
//!
//! * [`lattice`], [`tree`], [`rule`], [`measure`]: path spaces, filtrations,
//!   stopping rules and `B`-adapted random measures.
//! * [`payoff`]: objective functions and numerical complementarity checks.
//! * [`stopping`]: Snell envelope with minimal and maximal optimal rules,
//!   plus a brute-force oracle.
//! * [`mfe`]: monotone fixed-point iterations for the maximal and minimal
//!   mean field equilibria.
//! * [`nplayer`]: ε-Nash gaps of distributed `n`-player profiles and
//!   empirical-law convergence experiments.

pub mod error;
pub mod lattice;
pub mod measure;
pub mod mfe;
pub mod nplayer;
mod par;
pub mod payoff;
pub mod rule;
pub mod seed;
pub mod stopping;
pub mod tree;

pub use error::{Error, Result};
pub use lattice::{build_lattice, LatticeConfig, LatticeModel, PathId};
pub use measure::{cdf_uniform_distance, conditional_law, empirical_measure, AdaptedMeasure, GridMeasure};
pub use mfe::{
    iterate_from_bottom, iterate_from_top, public_info_equilibrium, solve_mfe, verify_mfe,
    EquilibriumResult, IterationRun, MfeCheck,
};
pub use nplayer::{
    best_deviation, convergence_experiment, equilibrium_value, estimate_epsilon, DeviationReport,
    Method, NPlayerProfile,
};
pub use payoff::{evaluate_j, MeasureMode, PathMode, Payoff, PayoffSpec};
pub use rule::StoppingRule;
pub use stopping::{brute_force_optimal, snell_solve, SnellSolution};
pub use tree::{build_signal_tree, InfoKind, InfoTree, SignalModel};

/// Tolerance separating weak from strict comparisons of rewards.
pub const TIE_TOLERANCE: f64 = 1e-9;
