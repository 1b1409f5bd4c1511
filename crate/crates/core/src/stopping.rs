//! Optimal stopping for a fixed population measure: backward induction on an
//! information tree with exact posterior averaging, plus a brute-force
//! oracle over every canonical rule.

use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, PathId};
use crate::measure::AdaptedMeasure;
use crate::par;
use crate::payoff::checks::for_each_rule;
use crate::payoff::{evaluate_j, Payoff};
use crate::rule::{canonical_rule_count, StoppingRule};
use crate::tree::InfoTree;
use crate::TIE_TOLERANCE;

/// Largest number of canonical rules `brute_force_optimal` will enumerate.
pub const BRUTE_FORCE_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeValue {
    pub stop_reward: f64,
    /// Expected value of moving on; equals the stop reward at `T`.
    pub continuation: f64,
}

impl NodeValue {
    #[inline]
    pub fn value(&self) -> f64 {
        self.stop_reward.max(self.continuation)
    }
}

#[derive(Debug, Clone)]
pub struct SnellSolution {
    pub value: f64,
    /// First optimal time: stops where `stop ≥ cont - tol`.
    pub rule_min: StoppingRule,
    /// Last optimal time: stops where `stop > cont + tol`.
    pub rule_max: StoppingRule,
    /// Flat over the tree's nodes, layer by layer.
    pub node_values: Vec<NodeValue>,
}

/// Backward induction for `F` against the population measure `mu`.
pub fn snell_solve(f: &dyn Payoff, mu: &AdaptedMeasure, tree: &InfoTree, lat: &LatticeModel) -> SnellSolution {
    assert_eq!(mu.steps(), lat.steps(), "measure and lattice disagree on K");
    solve_on_tree(tree, lat, f.is_causal(lat), |b, w, k| f.evaluate(lat, b, w, mu.row(b), k))
}

/// Backward induction for an arbitrary reward `reward(b, w, k)`.
///
/// With `causal`, the reward at `t_k` must depend on the first `k` increments
/// only; it is then evaluated once per consistent prefix (suffix bits zero).
/// Otherwise it is averaged over every full path through the node.
pub(crate) fn solve_on_tree<R>(tree: &InfoTree, lat: &LatticeModel, causal: bool, reward: R) -> SnellSolution
where
    R: Fn(PathId, PathId, usize) -> f64 + Sync,
{
    assert_eq!(tree.steps(), lat.steps(), "tree and lattice disagree on K");
    let steps = tree.steps();
    let mut node_values = vec![
        NodeValue {
            stop_reward: 0.0,
            continuation: 0.0
        };
        tree.node_count()
    ];
    for k in (0..=steps).rev() {
        let stop = par::map_collect(0..tree.layer_size(k), |node| stop_reward(tree, lat, causal, &reward, k, node));
        let off = tree.layer_offset(k);
        for (node, s) in stop.into_iter().enumerate() {
            let continuation = if k == steps {
                s
            } else {
                let child_off = tree.layer_offset(k + 1);
                (0..tree.arity())
                    .map(|sym| tree.symbol_prob(sym) * node_values[child_off + tree.child(k, node, sym)].value())
                    .sum()
            };
            node_values[off + node] = NodeValue {
                stop_reward: s,
                continuation,
            };
        }
    }
    let rule_min = StoppingRule::from_decisions(
        tree,
        node_values
            .iter()
            .map(|v| v.stop_reward >= v.continuation - TIE_TOLERANCE)
            .collect(),
    )
    .expect("sized to tree");
    let rule_max = StoppingRule::from_decisions(
        tree,
        node_values
            .iter()
            .map(|v| v.stop_reward > v.continuation + TIE_TOLERANCE)
            .collect(),
    )
    .expect("sized to tree");
    SnellSolution {
        value: node_values[0].value(),
        rule_min,
        rule_max,
        node_values,
    }
}

fn stop_reward<R>(tree: &InfoTree, lat: &LatticeModel, causal: bool, reward: &R, k: usize, node: usize) -> f64
where
    R: Fn(PathId, PathId, usize) -> f64,
{
    let mut total = 0.0;
    let mut count = 0u64;
    if causal {
        tree.for_each_prefix(k, node, |b, w| {
            total += reward(b, w, k);
            count += 1;
        });
    } else {
        let suffixes = 1u32 << (lat.steps() - k);
        tree.for_each_prefix(k, node, |b, w| {
            for sb in 0..suffixes {
                for sw in 0..suffixes {
                    total += reward(b | sb << k, w | sw << k, k);
                    count += 1;
                }
            }
        });
    }
    total / count as f64
}

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub value: f64,
    /// Pointwise minimum of the optimal rules.
    pub argmax_min: StoppingRule,
    /// Pointwise maximum of the optimal rules.
    pub argmax_max: StoppingRule,
    pub rules_evaluated: usize,
}

/// Evaluates `J` for every canonical rule on `tree`.
pub fn brute_force_optimal(f: &dyn Payoff, mu: &AdaptedMeasure, tree: &InfoTree, lat: &LatticeModel) -> Result<BruteForceResult> {
    let count = canonical_rule_count(tree);
    if count > BRUTE_FORCE_CAP {
        return Err(Error::EnumerationTooLarge { count, cap: BRUTE_FORCE_CAP });
    }
    let mut all: Vec<Vec<bool>> = Vec::with_capacity(count as usize);
    for_each_rule(tree, |stop| all.push(stop.to_vec()));
    let values = par::map_collect(0..all.len(), |i| {
        let rule = StoppingRule::from_decisions(tree, all[i].clone()).expect("sized to tree");
        evaluate_j(f, mu, &rule, lat)
    });
    let value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = vec![false; tree.node_count()];
    let mut hi = vec![true; tree.node_count()];
    for (stop, &v) in all.iter().zip(&values) {
        if v >= value - TIE_TOLERANCE {
            for ((l, h), &s) in lo.iter_mut().zip(hi.iter_mut()).zip(stop) {
                *l |= s;
                *h &= s;
            }
        }
    }
    Ok(BruteForceResult {
        value,
        argmax_min: StoppingRule::from_decisions(tree, lo)?,
        argmax_max: StoppingRule::from_decisions(tree, hi)?,
        rules_evaluated: all.len(),
    })
}
