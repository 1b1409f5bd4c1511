//! Strong mean field equilibria by monotone best-response iteration.
//!
//! From the top, `τ_0 ≡ T` and `τ_n = φ*(ψ(τ_{n-1}))`; from the bottom,
//! `θ_0 ≡ 0` and `θ_n = φ_*(ψ(θ_{n-1}))`. Under complementarity the two
//! sequences are monotone and converge to the largest and smallest
//! equilibria. Without it they may cycle; this is detected, not assumed.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::measure::{conditional_law, AdaptedMeasure};
use crate::payoff::{evaluate_j, BankRunParams, Payoff};
use crate::rule::StoppingRule;
use crate::stopping::snell_solve;
use crate::tree::{InfoKind, InfoTree};
use crate::TIE_TOLERANCE;

/// One iterate: the rule, its conditional law and `J(ψ(τ), τ)`.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub rule: StoppingRule,
    pub measure: AdaptedMeasure,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    FromTop,
    FromBottom,
}

#[derive(Debug, Clone)]
pub struct IterationRun {
    pub direction: Direction,
    /// Last iterate; the fixed point when `converged`.
    pub rule: StoppingRule,
    /// Every iterate from the starting rule on.
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    /// Number of best responses that changed the rule.
    pub iterations: usize,
    /// First iteration that broke monotonicity, if any.
    pub monotonicity_violation: Option<usize>,
    /// Period of a detected cycle.
    pub cycle_length: Option<usize>,
}

impl IterationRun {
    pub fn measure(&self) -> &AdaptedMeasure {
        &self.trace.last().expect("trace starts non-empty").measure
    }

    pub fn value(&self) -> f64 {
        self.trace.last().expect("trace starts non-empty").value
    }
}

/// Default iteration budget: one more than the tree's node count.
pub fn default_max_iter(tree: &InfoTree) -> usize {
    tree.node_count() + 1
}

pub fn iterate_from_top(f: &dyn Payoff, tree: &InfoTree, lat: &LatticeModel, max_iter: usize) -> Result<IterationRun> {
    iterate(f, tree, lat, max_iter, Direction::FromTop)
}

pub fn iterate_from_bottom(f: &dyn Payoff, tree: &InfoTree, lat: &LatticeModel, max_iter: usize) -> Result<IterationRun> {
    iterate(f, tree, lat, max_iter, Direction::FromBottom)
}

fn record(f: &dyn Payoff, rule: StoppingRule, lat: &LatticeModel) -> TraceRecord {
    let measure = conditional_law(&rule, lat);
    let value = evaluate_j(f, &measure, &rule, lat);
    TraceRecord { rule, measure, value }
}

fn iterate(f: &dyn Payoff, tree: &InfoTree, lat: &LatticeModel, max_iter: usize, direction: Direction) -> Result<IterationRun> {
    if max_iter == 0 {
        return Err(Error::InvalidParams("max_iter must be at least 1".into()));
    }
    if tree.steps() != lat.steps() {
        return Err(Error::LatticeMismatch);
    }
    let start = match direction {
        Direction::FromTop => StoppingRule::stop_at_horizon(tree),
        Direction::FromBottom => StoppingRule::stop_at(tree, 0),
    };
    let mut seen = HashMap::new();
    seen.insert(start.clone(), 0usize);
    let mut trace = vec![record(f, start, lat)];
    let mut monotonicity_violation = None;
    let mut cycle_length = None;
    let mut converged = false;
    for n in 1..=max_iter {
        let prev = trace.last().expect("non-empty");
        let sol = snell_solve(f, &prev.measure, tree, lat);
        let next = match direction {
            Direction::FromTop => sol.rule_max,
            Direction::FromBottom => sol.rule_min,
        };
        if next == prev.rule {
            converged = true;
            break;
        }
        let monotone = match direction {
            Direction::FromTop => next.leq(&prev.rule, lat),
            Direction::FromBottom => prev.rule.leq(&next, lat),
        };
        if !monotone && monotonicity_violation.is_none() {
            monotonicity_violation = Some(n);
        }
        if let Some(&first) = seen.get(&next) {
            cycle_length = Some(n - first);
            trace.push(record(f, next, lat));
            break;
        }
        seen.insert(next.clone(), n);
        trace.push(record(f, next, lat));
    }
    Ok(IterationRun {
        direction,
        rule: trace.last().expect("non-empty").rule.clone(),
        iterations: trace.len() - 1,
        trace,
        converged,
        monotonicity_violation,
        cycle_length,
    })
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub top: IterationRun,
    pub bottom: IterationRun,
    /// Maximal equilibrium (limit from the top).
    pub tau_star: StoppingRule,
    /// Minimal equilibrium (limit from the bottom).
    pub theta_star: StoppingRule,
    pub mu_max: AdaptedMeasure,
    pub mu_min: AdaptedMeasure,
    pub value_max: f64,
    pub value_min: f64,
    pub converged: bool,
    /// `θ* ≤ τ*` on every joint path.
    pub bracket_ok: bool,
    /// `E[τ* - θ*]`; zero exactly when the bracket is tight.
    pub bracket_width: f64,
}

impl EquilibriumResult {
    pub fn iterations(&self) -> usize {
        self.top.iterations + self.bottom.iterations
    }

    /// Both extremes induce the same stopping times.
    pub fn is_tight(&self) -> bool {
        self.tau_star == self.theta_star
    }
}

pub fn solve_mfe(f: &dyn Payoff, tree: &InfoTree, lat: &LatticeModel, max_iter: usize) -> Result<EquilibriumResult> {
    let top = iterate_from_top(f, tree, lat, max_iter)?;
    let bottom = iterate_from_bottom(f, tree, lat, max_iter)?;
    let tau_star = top.rule.clone();
    let theta_star = bottom.rule.clone();
    let bracket_ok = theta_star.leq(&tau_star, lat);
    let bracket_width = tau_star.expected_time(lat) - theta_star.expected_time(lat);
    Ok(EquilibriumResult {
        converged: top.converged && bottom.converged,
        mu_max: top.measure().clone(),
        mu_min: bottom.measure().clone(),
        value_max: top.value(),
        value_min: bottom.value(),
        tau_star,
        theta_star,
        bracket_ok,
        bracket_width,
        top,
        bottom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfeCheck {
    pub is_mfe: bool,
    /// Optimal value against `ψ(rule)` minus the rule's own value.
    pub gap: f64,
}

/// Whether `rule` is a best response to its own conditional law, allowing
/// deviations adapted to `tree`.
pub fn verify_mfe(f: &dyn Payoff, rule: &StoppingRule, tree: &InfoTree, lat: &LatticeModel) -> MfeCheck {
    let mu = conditional_law(rule, lat);
    let best = snell_solve(f, &mu, tree, lat).value;
    let gap = best - evaluate_j(f, &mu, rule, lat);
    MfeCheck {
        is_mfe: gap <= TIE_TOLERANCE,
        gap,
    }
}

/// Hitting rule of `{L(B_t) ≤ D₀}` on the public tree, stopping at `T` if the
/// set is never reached. A crossing at `t_0` stops immediately.
pub fn public_info_equilibrium(p: &BankRunParams, lat: &LatticeModel) -> Result<StoppingRule> {
    p.validate()?;
    let tree = InfoTree::new(InfoKind::PublicB, lat);
    Ok(StoppingRule::from_fn(&tree, |k, node| {
        // public nodes are B prefixes
        p.liquidation.value(lat.b_value(node as u32, k)) <= p.d0
    }))
}
