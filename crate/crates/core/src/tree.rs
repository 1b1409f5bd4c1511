//! Information trees: the filtrations an agent may stop on.
//!
//! Every tree observes one symbol per step, a function of the joint
//! increment `(ΔB_j, ΔW_j)`. A node at time `t_k` is the base-`arity`
//! number `Σ_j s_j · arity^j` of the first `k` observed symbols, so the
//! child of node `v` at time `t_k` on symbol `s` is `v + s · arity^k`.
//!
//! * `PublicB` observes `ΔB` only (2 symbols).
//! * `FullBW` observes `(ΔB, ΔW)` (4 symbols).
//! * `SignalX` observes `ΔX = ΔB + σ ΔW`, grouping increment pairs with
//!   equal sums (2, 3 or 4 symbols).

use crate::lattice::{is_up, LatticeModel, PathId};

/// Index of a joint increment: `b_up + 2 * w_up`.
#[inline]
pub fn increment_pair(b_up: bool, w_up: bool) -> usize {
    b_up as usize + 2 * w_up as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfoKind {
    PublicB,
    FullBW,
    SignalX { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoTree {
    kind: InfoKind,
    steps: usize,
    arity: usize,
    /// Symbol observed for each increment pair.
    symbol_of: [u8; 4],
    /// Increment pairs behind each symbol.
    groups: Vec<Vec<u8>>,
    /// Observed increment value per symbol (ΔX for signal trees).
    alphabet: Vec<f64>,
    offsets: Vec<usize>,
}

impl InfoTree {
    pub fn public(lat: &LatticeModel) -> Self {
        Self::from_symbols(
            InfoKind::PublicB,
            lat.steps(),
            [0, 1, 0, 1],
            vec![-lat.db(), lat.db()],
        )
    }

    pub fn full(lat: &LatticeModel) -> Self {
        Self::from_symbols(
            InfoKind::FullBW,
            lat.steps(),
            [0, 1, 2, 3],
            vec![0.0, 1.0, 2.0, 3.0],
        )
    }

    pub fn new(kind: InfoKind, lat: &LatticeModel) -> Self {
        match kind {
            InfoKind::PublicB => Self::public(lat),
            InfoKind::FullBW => Self::full(lat),
            InfoKind::SignalX { sigma } => build_signal_tree(lat, &SignalModel { sigma }),
        }
    }

    fn from_symbols(kind: InfoKind, steps: usize, symbol_of: [u8; 4], alphabet: Vec<f64>) -> Self {
        let arity = alphabet.len();
        let mut groups = vec![Vec::new(); arity];
        for (pair, &s) in symbol_of.iter().enumerate() {
            groups[s as usize].push(pair as u8);
        }
        let mut offsets = Vec::with_capacity(steps + 2);
        let mut acc = 0usize;
        let mut width = 1usize;
        for _ in 0..=steps {
            offsets.push(acc);
            acc += width;
            width *= arity;
        }
        offsets.push(acc);
        InfoTree {
            kind,
            steps,
            arity,
            symbol_of,
            groups,
            alphabet,
            offsets,
        }
    }

    #[inline]
    pub fn kind(&self) -> InfoKind {
        self.kind
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Observed increment values, one per symbol, ascending for signal trees.
    pub fn alphabet(&self) -> &[f64] {
        &self.alphabet
    }

    /// Number of nodes at time `t_k`, `arity^k`.
    #[inline]
    pub fn layer_size(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    /// Offset of layer `k` in a flat node array.
    #[inline]
    pub fn layer_offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.offsets[self.steps + 1]
    }

    #[inline]
    pub fn symbol(&self, b_up: bool, w_up: bool) -> usize {
        self.symbol_of[increment_pair(b_up, w_up)] as usize
    }

    /// Increment pairs that produce `symbol`.
    pub fn group(&self, symbol: usize) -> &[u8] {
        &self.groups[symbol]
    }

    /// Probability of observing `symbol` on any step.
    #[inline]
    pub fn symbol_prob(&self, symbol: usize) -> f64 {
        self.groups[symbol].len() as f64 / 4.0
    }

    #[inline]
    pub fn child(&self, k: usize, node: usize, symbol: usize) -> usize {
        node + symbol * self.arity.pow(k as u32)
    }

    #[inline]
    pub fn parent(&self, k: usize, node: usize) -> usize {
        debug_assert!(k >= 1);
        node % self.arity.pow(k as u32 - 1)
    }

    /// Node at time `t_k` on the joint path `(b, w)`.
    #[inline]
    pub fn node_at(&self, b: PathId, w: PathId, k: usize) -> usize {
        let mut node = 0;
        let mut scale = 1;
        for j in 0..k {
            node += self.symbol(is_up(b, j), is_up(w, j)) * scale;
            scale *= self.arity;
        }
        node
    }

    /// Symbol sequence of `node` at time `t_k`.
    pub fn symbols(&self, k: usize, node: usize) -> Vec<usize> {
        let mut rest = node;
        (0..k)
            .map(|_| {
                let s = rest % self.arity;
                rest /= self.arity;
                s
            })
            .collect()
    }

    /// Calls `visit(b_prefix, w_prefix)` for every joint prefix of length `k`
    /// consistent with `node`, in a fixed order.
    pub fn for_each_prefix(&self, k: usize, node: usize, mut visit: impl FnMut(PathId, PathId)) {
        let symbols = self.symbols(k, node);
        let sizes: Vec<usize> = symbols.iter().map(|&s| self.groups[s].len()).collect();
        let total: usize = sizes.iter().product();
        for mut idx in 0..total {
            let mut b: PathId = 0;
            let mut w: PathId = 0;
            for (j, &s) in symbols.iter().enumerate() {
                let choice = idx % sizes[j];
                idx /= sizes[j];
                let pair = self.groups[s][choice];
                b |= ((pair & 1) as PathId) << j;
                w |= (((pair >> 1) & 1) as PathId) << j;
            }
            visit(b, w);
        }
    }

    /// Number of joint prefixes consistent with `node`.
    pub fn prefix_count(&self, k: usize, node: usize) -> u64 {
        self.symbols(k, node)
            .iter()
            .map(|&s| self.groups[s].len() as u64)
            .product()
    }

    /// Exact posterior over joint prefixes given the observations at `node`.
    pub fn posterior(&self, k: usize, node: usize) -> Posterior {
        let mut prefixes = Vec::new();
        self.for_each_prefix(k, node, |b, w| prefixes.push((b, w)));
        Posterior {
            count: prefixes.len() as u64,
            // every consistent prefix has prior weight 4^-k
            denominator: 1u64 << (2 * k),
            prefixes,
        }
    }
}

/// Conditional law of the joint `(B, W)` prefix given a signal prefix.
///
/// The prior is uniform, so the posterior is uniform over the consistent
/// prefixes: each carries weight `1 / count`. `count / denominator` is the
/// probability of the observed prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub prefixes: Vec<(PathId, PathId)>,
    pub count: u64,
    pub denominator: u64,
}

impl Posterior {
    pub fn weight(&self) -> f64 {
        1.0 / self.count as f64
    }

    pub fn total(&self) -> f64 {
        self.prefixes.iter().map(|_| self.weight()).sum()
    }

    /// Probability of the observation prefix itself.
    pub fn evidence(&self) -> f64 {
        self.count as f64 / self.denominator as f64
    }
}

/// Builds the tree of the signal `X = B + σW`, grouping increment pairs whose
/// `ΔX` coincide.
pub fn build_signal_tree(lat: &LatticeModel, sm: &SignalModel) -> InfoTree {
    let sigma = sm.sigma.max(0.0);
    let mut dx = [0.0f64; 4];
    for (pair, value) in dx.iter_mut().enumerate() {
        let db = if pair & 1 == 1 { lat.db() } else { -lat.db() };
        let dw = if pair & 2 == 2 { lat.dw() } else { -lat.dw() };
        *value = db + sigma * dw;
    }
    let scale = lat.db().max(sigma * lat.dw());
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * scale;
    let mut alphabet: Vec<f64> = Vec::new();
    for &v in &dx {
        if !alphabet.iter().any(|&a| same(a, v)) {
            alphabet.push(v);
        }
    }
    alphabet.sort_by(f64::total_cmp);
    let mut symbol_of = [0u8; 4];
    for (pair, &v) in dx.iter().enumerate() {
        symbol_of[pair] = alphabet.iter().position(|&a| same(a, v)).unwrap() as u8;
    }
    InfoTree::from_symbols(InfoKind::SignalX { sigma }, lat.steps(), symbol_of, alphabet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeConfig};

    fn lattice(k: usize) -> LatticeModel {
        build_lattice(&LatticeConfig::new(k, 1.0, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn layer_sizes() {
        let lat = lattice(3);
        let public = InfoTree::public(&lat);
        assert_eq!((0..=3).map(|k| public.layer_size(k)).collect::<Vec<_>>(), vec![1, 2, 4, 8]);
        assert_eq!(public.node_count(), 15);
        let full = InfoTree::full(&lat);
        assert_eq!(full.layer_size(3), 64);
        let signal = build_signal_tree(&lat, &SignalModel { sigma: 1.0 });
        assert_eq!(signal.arity(), 3);
        assert_eq!(signal.layer_size(2), 9);
    }

    #[test]
    fn zero_noise_signal_is_public_tree() {
        let lat = lattice(4);
        let signal = build_signal_tree(&lat, &SignalModel { sigma: 0.0 });
        let public = InfoTree::public(&lat);
        assert_eq!(signal.alphabet(), &[-1.0, 1.0]);
        for b in 0..16 {
            for w in 0..16 {
                for k in 0..=4 {
                    assert_eq!(signal.node_at(b, w, k), public.node_at(b, w, k));
                }
            }
        }
        // posterior degenerate on the matching B prefix
        let post = signal.posterior(2, 0b10);
        assert!(post.prefixes.iter().all(|&(b, _)| b == 0b10));
        assert_eq!(post.count, 4);
    }

    #[test]
    fn ambiguous_signal_one_step_posterior() {
        let lat = lattice(2);
        let tree = build_signal_tree(&lat, &SignalModel { sigma: 1.0 });
        assert_eq!(tree.alphabet(), &[-2.0, 0.0, 2.0]);
        let post = tree.posterior(1, 1);
        let mut prefixes = post.prefixes.clone();
        prefixes.sort();
        // (b up, w down) and (b down, w up)
        assert_eq!(prefixes, vec![(0, 1), (1, 0)]);
        assert_eq!(post.weight(), 0.5);
        assert_eq!(post.total(), 1.0);
    }

    #[test]
    fn two_step_posterior_matches_bayes_enumeration() {
        let lat = lattice(2);
        let tree = build_signal_tree(&lat, &SignalModel { sigma: 1.0 });
        // observe ΔX = 0 then ΔX = +2
        let node = tree.child(1, tree.child(0, 0, 1), 2);
        let post = tree.posterior(2, node);

        // direct Bayes over all 16 joint two-step prefixes
        let mut consistent = Vec::new();
        for b in 0..4u32 {
            for w in 0..4u32 {
                let dx = |j: usize| {
                    let db = if is_up(b, j) { 1.0 } else { -1.0 };
                    let dw = if is_up(w, j) { 1.0 } else { -1.0 };
                    db + dw
                };
                if dx(0) == 0.0 && dx(1) == 2.0 {
                    consistent.push((b, w));
                }
            }
        }
        let mut got = post.prefixes.clone();
        got.sort();
        consistent.sort();
        assert_eq!(got, consistent);
        assert_eq!(post.count, 2);
        assert_eq!(post.evidence(), 2.0 / 16.0);
    }

    #[test]
    fn distinct_sums_give_four_symbols() {
        let lat = lattice(2);
        let tree = build_signal_tree(&lat, &SignalModel { sigma: 0.5 });
        assert_eq!(tree.arity(), 4);
        for s in 0..4 {
            assert_eq!(tree.group(s).len(), 1);
        }
    }

    #[test]
    fn posterior_rows_sum_to_one() {
        let lat = lattice(4);
        for sigma in [0.0, 0.5, 1.0, 2.0] {
            let tree = build_signal_tree(&lat, &SignalModel { sigma });
            let mut evidence = 0.0;
            for node in 0..tree.layer_size(4) {
                let post = tree.posterior(4, node);
                assert!((post.total() - 1.0).abs() <= 1e-12);
                evidence += post.evidence();
            }
            assert!((evidence - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn every_path_has_one_node_per_layer() {
        let lat = lattice(3);
        let tree = build_signal_tree(&lat, &SignalModel { sigma: 1.0 });
        for k in 0..=3 {
            let mut hits = vec![0u64; tree.layer_size(k)];
            for b in 0..8 {
                for w in 0..8 {
                    hits[tree.node_at(b, w, k)] += 1;
                }
            }
            let suffixes = 1u64 << (2 * (3 - k));
            for (node, &h) in hits.iter().enumerate() {
                assert_eq!(h, tree.prefix_count(k, node) * suffixes);
            }
        }
    }
}
