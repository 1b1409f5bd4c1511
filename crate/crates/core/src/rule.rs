//! Stopping rules on information trees.

use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::lattice::{is_up, LatticeModel, PathId};
use crate::par;
use crate::tree::InfoTree;

/// An adapted stop/continue map over the nodes of an [`InfoTree`].
///
/// Rules are always kept in canonical form: every node at time `T` stops,
/// and every node below a stopping node stops too. Two rules on the same tree
/// are equal iff they induce the same stopping time on every path.
#[derive(Debug, Clone)]
pub struct StoppingRule {
    tree: InfoTree,
    stop: Vec<bool>,
}

impl PartialEq for StoppingRule {
    fn eq(&self, other: &Self) -> bool {
        self.stop == other.stop && self.tree == other.tree
    }
}

impl Eq for StoppingRule {}

impl Hash for StoppingRule {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.stop.hash(state);
    }
}

impl StoppingRule {
    /// Builds a rule from a flat decision vector (layer by layer) and
    /// canonicalizes it.
    pub fn from_decisions(tree: &InfoTree, mut stop: Vec<bool>) -> Result<Self> {
        if stop.len() != tree.node_count() {
            return Err(Error::TreeMismatch);
        }
        canonicalize(tree, &mut stop);
        Ok(StoppingRule {
            tree: tree.clone(),
            stop,
        })
    }

    /// Builds a rule from `decide(k, node)`.
    pub fn from_fn(tree: &InfoTree, mut decide: impl FnMut(usize, usize) -> bool) -> Self {
        let mut stop = Vec::with_capacity(tree.node_count());
        for k in 0..=tree.steps() {
            for node in 0..tree.layer_size(k) {
                stop.push(decide(k, node));
            }
        }
        canonicalize(tree, &mut stop);
        StoppingRule {
            tree: tree.clone(),
            stop,
        }
    }

    /// The deterministic rule `τ ≡ t_k`.
    pub fn stop_at(tree: &InfoTree, k: usize) -> Self {
        Self::from_fn(tree, |layer, _| layer >= k)
    }

    /// `τ ≡ T`.
    pub fn stop_at_horizon(tree: &InfoTree) -> Self {
        Self::stop_at(tree, tree.steps())
    }

    pub fn tree(&self) -> &InfoTree {
        &self.tree
    }

    pub fn decisions(&self) -> &[bool] {
        &self.stop
    }

    #[inline]
    pub fn is_stop(&self, k: usize, node: usize) -> bool {
        self.stop[self.tree.layer_offset(k) + node]
    }

    /// Index of the stopping time on the joint path `(b, w)`.
    #[inline]
    pub fn stop_index(&self, b: PathId, w: PathId) -> usize {
        let tree = &self.tree;
        let mut node = 0;
        let mut scale = 1;
        for k in 0..tree.steps() {
            if self.stop[tree.layer_offset(k) + node] {
                return k;
            }
            node += tree.symbol(is_up(b, k), is_up(w, k)) * scale;
            scale *= tree.arity();
        }
        tree.steps()
    }

    pub fn stop_time(&self, lat: &LatticeModel, b: PathId, w: PathId) -> f64 {
        lat.time(self.stop_index(b, w))
    }

    /// Stopping index on every joint path, indexed by `lat.joint_id(b, w)`.
    pub fn joint_indices(&self, lat: &LatticeModel) -> Vec<u8> {
        let paths = lat.num_paths() as PathId;
        par::flat_map_collect(0..paths, |w| {
            (0..paths)
                .map(|b| self.stop_index(b, w) as u8)
                .collect::<Vec<_>>()
        })
    }

    /// `E[τ]` in time units.
    pub fn expected_time(&self, lat: &LatticeModel) -> f64 {
        let idx = self.joint_indices(lat);
        let total: u64 = idx.iter().map(|&k| k as u64).sum();
        total as f64 / idx.len() as f64 * lat.dt()
    }

    /// Law of `τ` on the grid (unconditional).
    pub fn time_distribution(&self, lat: &LatticeModel) -> Vec<f64> {
        let mut counts = vec![0u64; lat.grid_len()];
        for k in self.joint_indices(lat) {
            counts[k as usize] += 1;
        }
        let n = lat.num_joint_paths() as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }

    /// Pointwise `self ≤ other` on every joint path.
    pub fn leq(&self, other: &StoppingRule, lat: &LatticeModel) -> bool {
        if self.tree == other.tree {
            // canonical: τ₁ ≤ τ₂ iff every node where τ₂ has stopped has τ₁ stopped
            self.stop.iter().zip(&other.stop).all(|(&a, &b)| a || !b)
        } else {
            self.joint_indices(lat)
                .iter()
                .zip(other.joint_indices(lat))
                .all(|(&a, b)| a <= b)
        }
    }

    /// Equality of induced times on every joint path, across trees.
    pub fn same_times(&self, other: &StoppingRule, lat: &LatticeModel) -> bool {
        if self.tree == other.tree {
            self.stop == other.stop
        } else {
            self.joint_indices(lat) == other.joint_indices(lat)
        }
    }

    /// Pointwise minimum `τ₁ ∧ τ₂`.
    pub fn min(&self, other: &StoppingRule) -> Result<StoppingRule> {
        self.combine(other, |a, b| a || b)
    }

    /// Pointwise maximum `τ₁ ∨ τ₂`.
    pub fn max(&self, other: &StoppingRule) -> Result<StoppingRule> {
        self.combine(other, |a, b| a && b)
    }

    fn combine(&self, other: &StoppingRule, op: impl Fn(bool, bool) -> bool) -> Result<StoppingRule> {
        if self.tree != other.tree {
            return Err(Error::TreeMismatch);
        }
        let stop = self
            .stop
            .iter()
            .zip(&other.stop)
            .map(|(&a, &b)| op(a, b))
            .collect();
        StoppingRule::from_decisions(&self.tree, stop)
    }

    /// Re-expresses the rule on a finer tree. Fails unless every node of
    /// `target` sees a single decision of `self`.
    pub fn lift(&self, target: &InfoTree) -> Result<StoppingRule> {
        if target.steps() != self.tree.steps() {
            return Err(Error::TreeMismatch);
        }
        let mut stop = Vec::with_capacity(target.node_count());
        for k in 0..=target.steps() {
            for node in 0..target.layer_size(k) {
                let mut decision: Option<bool> = None;
                let mut consistent = true;
                target.for_each_prefix(k, node, |b, w| {
                    let d = self.is_stop(k, self.tree.node_at(b, w, k));
                    match decision {
                        None => decision = Some(d),
                        Some(prev) if prev != d => consistent = false,
                        _ => {}
                    }
                });
                if !consistent {
                    return Err(Error::TreeMismatch);
                }
                stop.push(decision.unwrap_or(true));
            }
        }
        StoppingRule::from_decisions(target, stop)
    }

    /// Stopping nodes whose parent continues: `(k, node)` pairs.
    pub fn frontier(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..=self.tree.steps() {
            for node in 0..self.tree.layer_size(k) {
                if self.is_stop(k, node) && (k == 0 || !self.is_stop(k - 1, self.tree.parent(k, node))) {
                    out.push((k, node));
                }
            }
        }
        out
    }
}

fn canonicalize(tree: &InfoTree, stop: &mut [bool]) {
    let steps = tree.steps();
    for k in 1..=steps {
        let off = tree.layer_offset(k);
        let parent_off = tree.layer_offset(k - 1);
        for node in 0..tree.layer_size(k) {
            if k == steps || stop[parent_off + tree.parent(k, node)] {
                stop[off + node] = true;
            }
        }
    }
    if steps == 0 {
        stop[0] = true;
    }
}

/// Number of canonical rules on `tree`: `S(K) = 1`, `S(k) = 1 + S(k+1)^arity`.
/// Saturates at `f64::INFINITY`.
pub fn canonical_rule_count(tree: &InfoTree) -> f64 {
    let mut count = 1.0f64;
    for _ in 0..tree.steps() {
        count = 1.0 + count.powi(tree.arity() as i32);
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeConfig};
    use crate::tree::{build_signal_tree, SignalModel};

    fn lattice(k: usize) -> LatticeModel {
        build_lattice(&LatticeConfig::new(k, 1.0, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn canonical_form_normalizes_unreachable_nodes() {
        let lat = lattice(3);
        let tree = InfoTree::public(&lat);
        // stop at root, but claim "continue" everywhere else
        let a = StoppingRule::from_fn(&tree, |k, _| k == 0);
        let b = StoppingRule::stop_at(&tree, 0);
        assert_eq!(a, b);
        assert!(a.decisions().iter().all(|&s| s));
    }

    #[test]
    fn induced_time_is_first_stop() {
        let lat = lattice(3);
        let tree = InfoTree::public(&lat);
        // stop at the first down-move of B
        let rule = StoppingRule::from_fn(&tree, |k, node| {
            k > 0 && !is_up(node as PathId, k - 1)
        });
        for b in 0..8u32 {
            let expected = (0..3).find(|&j| !is_up(b, j)).map_or(3, |j| j + 1);
            assert_eq!(rule.stop_index(b, 0), expected);
        }
    }

    #[test]
    fn rule_counts_match_recursion() {
        let lat = lattice(4);
        let tree = InfoTree::public(&lat);
        assert_eq!(canonical_rule_count(&tree), 677.0);
        let lat2 = lattice(2);
        assert_eq!(canonical_rule_count(&InfoTree::public(&lat2)), 5.0);
        assert_eq!(canonical_rule_count(&InfoTree::full(&lat2)), 17.0);
    }

    #[test]
    fn order_and_lattice_operations() {
        let lat = lattice(3);
        let tree = InfoTree::full(&lat);
        let early = StoppingRule::stop_at(&tree, 1);
        let late = StoppingRule::stop_at_horizon(&tree);
        let w_rule = StoppingRule::from_fn(&tree, |k, node| {
            k > 0 && tree.symbols(k, node)[k - 1] >= 2
        });
        assert!(early.leq(&late, &lat));
        assert!(!late.leq(&early, &lat));
        let lo = w_rule.min(&early).unwrap();
        let hi = w_rule.max(&early).unwrap();
        assert!(lo.leq(&w_rule, &lat) && lo.leq(&early, &lat));
        assert!(w_rule.leq(&hi, &lat) && early.leq(&hi, &lat));
        assert_eq!(lo, early);
    }

    #[test]
    fn lift_public_rule_to_full_tree() {
        let lat = lattice(3);
        let public = InfoTree::public(&lat);
        let full = InfoTree::full(&lat);
        let rule = StoppingRule::from_fn(&public, |k, node| k > 0 && is_up(node as PathId, k - 1));
        let lifted = rule.lift(&full).unwrap();
        assert!(lifted.same_times(&rule, &lat));
        let w_rule = StoppingRule::from_fn(&full, |k, node| k > 0 && full.symbols(k, node)[0] >= 2);
        assert!(w_rule.lift(&public).is_err());
        let signal = build_signal_tree(&lat, &SignalModel { sigma: 0.0 });
        assert!(rule.lift(&signal).unwrap().same_times(&rule, &lat));
    }

    #[test]
    fn frontier_of_hitting_rule() {
        let lat = lattice(2);
        let tree = InfoTree::public(&lat);
        let rule = StoppingRule::from_fn(&tree, |k, node| k == 1 && node == 0);
        assert_eq!(rule.frontier(), vec![(1, 0), (2, 1), (2, 3)]);
        assert_eq!(rule.expected_time(&lat), 0.5 * 1.0 + 0.5 * 2.0);
    }
}
