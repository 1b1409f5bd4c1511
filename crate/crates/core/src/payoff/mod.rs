//! Objective functions `F(b, w, m, t)` and exact expected rewards.

use std::fmt;
use std::sync::Arc;

use crate::lattice::{LatticeModel, PathId};
use crate::measure::{AdaptedMeasure, GridMeasure};
use crate::par;
use crate::rule::StoppingRule;

mod bankrun;
pub mod checks;
mod diffusion;
mod nutz;

pub use bankrun::{bankrun_payoff, BankRunParams, BankRunPayoff, Liquidation};
pub use diffusion::{diffusion_payoff, DiffusionPayoff, DiffusionPayoffParams, FPreset, PhiPreset};
pub use nutz::{nutz_payoff, NutzParams, NutzPayoff, NUTZ_LOG_CAP};

/// How a payoff reads the population measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMode {
    /// Only through `m[0, t)`, the mass strictly before the stopping time.
    CdfAtT,
    /// Through a convolution `Σ_j φ(t - t_j) m({t_j})`.
    Convolution,
    General,
}

/// How a payoff reads the noise paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMode {
    /// Only through `(B_t, W_t)`.
    SpotAtT,
    /// Through the path up to `t`.
    PrefixToT,
    FullPath,
}

/// An objective `F(ω⁰, ω¹, m, t)` on the lattice. `k` is the grid index of `t`.
///
/// Implementations must be pure; they are called concurrently.
pub trait Payoff: Send + Sync {
    fn evaluate(&self, lat: &LatticeModel, b: PathId, w: PathId, m: &GridMeasure, k: usize) -> f64;

    fn measure_mode(&self) -> MeasureMode;

    fn path_mode(&self) -> PathMode;

    /// Declared bound on `|F|` over every input on `lat`.
    fn bound(&self, lat: &LatticeModel) -> f64;

    /// True when `F` at `t_k` depends on `(b, w, m)` only through the first
    /// `k` increments and `m[0, t_j]` for `j ≤ k`. For adapted measures this
    /// makes stop rewards functions of the time-`t_k` prefix.
    fn is_causal(&self, _lat: &LatticeModel) -> bool {
        self.path_mode() != PathMode::FullPath && self.measure_mode() == MeasureMode::CdfAtT
    }

    fn name(&self) -> String;
}

pub type PayoffSpec = Arc<dyn Payoff>;

impl fmt::Debug for dyn Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payoff")
            .field("name", &self.name())
            .field("measure_mode", &self.measure_mode())
            .field("path_mode", &self.path_mode())
            .finish()
    }
}

type EvalFn = dyn Fn(&LatticeModel, PathId, PathId, &GridMeasure, usize) -> f64 + Send + Sync;

/// A payoff from a closure, for tests and plug-ins.
pub struct FnPayoff {
    name: String,
    eval: Box<EvalFn>,
    measure_mode: MeasureMode,
    path_mode: PathMode,
    bound: f64,
    causal: bool,
}

impl FnPayoff {
    /// `causal` defaults to the mode-derived value.
    pub fn new(
        name: impl Into<String>,
        measure_mode: MeasureMode,
        path_mode: PathMode,
        bound: f64,
        eval: impl Fn(&LatticeModel, PathId, PathId, &GridMeasure, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnPayoff {
            name: name.into(),
            eval: Box::new(eval),
            measure_mode,
            path_mode,
            bound,
            causal: path_mode != PathMode::FullPath && measure_mode == MeasureMode::CdfAtT,
        }
    }

    pub fn with_causal(mut self, causal: bool) -> Self {
        self.causal = causal;
        self
    }

    pub fn into_spec(self) -> PayoffSpec {
        Arc::new(self)
    }
}

impl Payoff for FnPayoff {
    fn evaluate(&self, lat: &LatticeModel, b: PathId, w: PathId, m: &GridMeasure, k: usize) -> f64 {
        (self.eval)(lat, b, w, m, k)
    }

    fn measure_mode(&self) -> MeasureMode {
        self.measure_mode
    }

    fn path_mode(&self) -> PathMode {
        self.path_mode
    }

    fn bound(&self, _lat: &LatticeModel) -> f64 {
        self.bound
    }

    fn is_causal(&self, _lat: &LatticeModel) -> bool {
        self.causal
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// `F ≡ c`.
pub fn constant_payoff(c: f64) -> PayoffSpec {
    FnPayoff::new("constant", MeasureMode::CdfAtT, PathMode::SpotAtT, c.abs().max(f64::MIN_POSITIVE), move |_, _, _, _, _| c)
        .into_spec()
}

/// `F(m, t) = m[0, t)`: the identity `G` composed with the half-open CDF.
pub fn cdf_before_payoff() -> PayoffSpec {
    FnPayoff::new("cdf_before", MeasureMode::CdfAtT, PathMode::SpotAtT, 1.0, |_, _, _, m, k| m.before(k))
        .into_spec()
}

/// `J(μ, τ) = E[F(B, W, μ(B), τ)]`, exact over all `4^K` joint paths.
pub fn evaluate_j(f: &dyn Payoff, mu: &AdaptedMeasure, rule: &StoppingRule, lat: &LatticeModel) -> f64 {
    assert_eq!(mu.steps(), lat.steps(), "measure and lattice disagree on K");
    let paths = lat.num_paths() as PathId;
    let partial = par::map_collect(0..paths, |w| {
        (0..paths)
            .map(|b| f.evaluate(lat, b, w, mu.row(b), rule.stop_index(b, w)))
            .sum::<f64>()
    });
    partial.iter().sum::<f64>() / lat.num_joint_paths() as f64
}
