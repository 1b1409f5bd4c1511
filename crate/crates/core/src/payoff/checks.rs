//! Numerical checks of the complementarity assumptions: increasing
//! differences of `J` and the submartingale property of
//! `M_t = F(μ̃, t) - F(μ, t)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate_j, Payoff};
use crate::error::{Error, Result};
use crate::lattice::{prefix, LatticeModel, PathId};
use crate::measure::{conditional_law, AdaptedMeasure, GridMeasure};
use crate::par;
use crate::rule::{canonical_rule_count, StoppingRule};
use crate::seed;
use crate::tree::InfoTree;
use crate::TIE_TOLERANCE;

/// Largest rule set searched by the exhaustive checker.
pub const EXHAUSTIVE_RULE_CAP: f64 = 1000.0;

/// A quadruple `μ ≤ μ̃`, `τ ≤ τ̃` breaking increasing differences.
#[derive(Debug, Clone)]
pub struct IdViolation {
    pub mu: AdaptedMeasure,
    pub mu_tilde: AdaptedMeasure,
    pub tau: StoppingRule,
    pub tau_tilde: StoppingRule,
    /// `J(μ̃, τ̃) - J(μ̃, τ)`.
    pub lhs: f64,
    /// `J(μ, τ̃) - J(μ, τ)`.
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct IdReport {
    pub passed: bool,
    pub trials_run: usize,
    pub violation: Option<IdViolation>,
}

/// Both sides of the increasing-differences inequality.
pub fn increasing_difference_sides(
    f: &dyn Payoff,
    lat: &LatticeModel,
    mu: &AdaptedMeasure,
    mu_tilde: &AdaptedMeasure,
    tau: &StoppingRule,
    tau_tilde: &StoppingRule,
) -> (f64, f64) {
    let lhs = evaluate_j(f, mu_tilde, tau_tilde, lat) - evaluate_j(f, mu_tilde, tau, lat);
    let rhs = evaluate_j(f, mu, tau_tilde, lat) - evaluate_j(f, mu, tau, lat);
    (lhs, rhs)
}

/// Random search for a violation over ordered pairs on the `(B, W)` tree.
pub fn check_increasing_differences(f: &dyn Payoff, lat: &LatticeModel, trials: usize, seed: u64) -> IdReport {
    let tree = InfoTree::full(lat);
    let mut rng = seed::stream(seed, &[]);
    for trial in 0..trials {
        let (mu, mu_tilde) = sample_ordered_measures(&tree, lat, &mut rng);
        let (tau, tau_tilde) = sample_ordered_rules(&tree, &mut rng);
        let (lhs, rhs) = increasing_difference_sides(f, lat, &mu, &mu_tilde, &tau, &tau_tilde);
        if lhs < rhs - TIE_TOLERANCE {
            return IdReport {
                passed: false,
                trials_run: trial + 1,
                violation: Some(IdViolation { mu, mu_tilde, tau, tau_tilde, lhs, rhs }),
            };
        }
    }
    IdReport {
        passed: true,
        trials_run: trials,
        violation: None,
    }
}

/// Exhaustive search: rules range over every canonical rule on `tree`, and
/// measures over the conditional laws of those rules.
pub fn check_increasing_differences_exhaustive(f: &dyn Payoff, lat: &LatticeModel, tree: &InfoTree) -> Result<IdReport> {
    let count = canonical_rule_count(tree);
    if count > EXHAUSTIVE_RULE_CAP {
        return Err(Error::EnumerationTooLarge { count, cap: EXHAUSTIVE_RULE_CAP });
    }
    let rules = enumerate_rules(tree);
    let measures: Vec<AdaptedMeasure> = rules.iter().map(|r| conditional_law(r, lat)).collect();
    let n = rules.len();
    // j[m][r] = J(measure m, rule r)
    let j: Vec<Vec<f64>> = par::map_collect(0..n, |m| rules.iter().map(|r| evaluate_j(f, &measures[m], r, lat)).collect());
    let mut trials = 0;
    for (m, mu) in measures.iter().enumerate() {
        for (mt, mu_tilde) in measures.iter().enumerate() {
            if !mu.stochastic_leq(mu_tilde).expect("same lattice") {
                continue;
            }
            for (r, tau) in rules.iter().enumerate() {
                for (rt, tau_tilde) in rules.iter().enumerate() {
                    if !tau.leq(tau_tilde, lat) {
                        continue;
                    }
                    trials += 1;
                    let lhs = j[mt][rt] - j[mt][r];
                    let rhs = j[m][rt] - j[m][r];
                    if lhs < rhs - TIE_TOLERANCE {
                        return Ok(IdReport {
                            passed: false,
                            trials_run: trials,
                            violation: Some(IdViolation {
                                mu: mu.clone(),
                                mu_tilde: mu_tilde.clone(),
                                tau: tau.clone(),
                                tau_tilde: tau_tilde.clone(),
                                lhs,
                                rhs,
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(IdReport {
        passed: true,
        trials_run: trials,
        violation: None,
    })
}

/// Every canonical rule on `tree`, in a fixed order.
pub fn enumerate_rules(tree: &InfoTree) -> Vec<StoppingRule> {
    let mut out = Vec::new();
    for_each_rule(tree, |stop| out.push(StoppingRule::from_decisions(tree, stop.to_vec()).expect("sized to tree")));
    out
}

/// Calls `visit` with the decision vector of every canonical rule.
pub(crate) fn for_each_rule(tree: &InfoTree, mut visit: impl FnMut(&[bool])) {
    fn recurse(tree: &InfoTree, pending: &mut Vec<(usize, usize)>, stop: &mut [bool], visit: &mut dyn FnMut(&[bool])) {
        let Some((k, node)) = pending.pop() else {
            visit(stop);
            return;
        };
        // stop here
        recurse(tree, pending, stop, visit);
        // or continue and open the children
        if k < tree.steps() {
            let idx = tree.layer_offset(k) + node;
            stop[idx] = false;
            let before = pending.len();
            for s in (0..tree.arity()).rev() {
                pending.push((k + 1, tree.child(k, node, s)));
            }
            recurse(tree, pending, stop, visit);
            pending.truncate(before);
            stop[idx] = true;
        }
        pending.push((k, node));
    }
    let mut stop = vec![true; tree.node_count()];
    let mut pending = vec![(0, 0)];
    recurse(tree, &mut pending, &mut stop, &mut visit);
}

/// A random canonical rule: each node stops with probability `p`, itself
/// drawn from `[0.05, 0.6)`.
pub fn sample_rule(tree: &InfoTree, rng: &mut ChaCha8Rng) -> StoppingRule {
    let p: f64 = rng.random_range(0.05..0.6);
    let stop = (0..tree.node_count()).map(|_| rng.random_bool(p)).collect();
    StoppingRule::from_decisions(tree, stop).expect("sized to tree")
}

/// `τ ≤ τ̃`: `τ̃` is random and `τ = τ̃ ∧ τ'` for another random `τ'`.
pub fn sample_ordered_rules(tree: &InfoTree, rng: &mut ChaCha8Rng) -> (StoppingRule, StoppingRule) {
    let tau_tilde = sample_rule(tree, rng);
    let other = sample_rule(tree, rng);
    let tau = tau_tilde.min(&other).expect("same tree");
    (tau, tau_tilde)
}

/// `μ ≤ μ̃`: `μ̃ = ψ(τ)` for a random rule and `μ` pushes mass earlier.
///
/// The survival function of `μ̃` is multiplied by `Π_{j ≤ k} (1 - v_j)`
/// where `v_j` depends on the first `j` increments of `B` only; this keeps
/// `μ` adapted, nondecreasing and ordered below `μ̃`.
pub fn sample_ordered_measures(tree: &InfoTree, lat: &LatticeModel, rng: &mut ChaCha8Rng) -> (AdaptedMeasure, AdaptedMeasure) {
    let mu_tilde = conditional_law(&sample_rule(tree, rng), lat);
    let mu = push_earlier(&mu_tilde, lat, rng);
    (mu, mu_tilde)
}

fn push_earlier(mu: &AdaptedMeasure, lat: &LatticeModel, rng: &mut ChaCha8Rng) -> AdaptedMeasure {
    let bumps: Vec<Vec<f64>> = (0..=lat.steps())
        .map(|j| {
            (0..1usize << j)
                .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random::<f64>() })
                .collect()
        })
        .collect();
    let rows = (0..lat.num_paths() as PathId)
        .map(|b| {
            let mut keep = 1.0;
            let cdf = (0..=lat.steps())
                .map(|k| {
                    keep *= 1.0 - bumps[k][prefix(b, k) as usize];
                    1.0 - (1.0 - mu.cdf(b, k)) * keep
                })
                .collect();
            GridMeasure::from_cdf(cdf).expect("bumped CDF stays valid")
        })
        .collect();
    AdaptedMeasure::new(lat.steps(), rows).expect("bumps depend on prefixes only")
}

/// Joint `(B, W)` node: the first `k` increments of both paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointNode {
    pub k: usize,
    pub b_prefix: PathId,
    pub w_prefix: PathId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmartingaleReport {
    pub passed: bool,
    /// `min` over nodes of `E[M_{k+1} | node] - E[M_k | node]`.
    pub worst_gap: f64,
    /// The worst node, when the check fails.
    pub node: Option<JointNode>,
}

/// Checks that `M_t = F(μ̃, t) - F(μ, t)` is a submartingale on the joint
/// tree. Conditional expectations average over every full path through the
/// node, so payoffs reading the future are handled too.
pub fn check_submartingale(f: &dyn Payoff, mu: &AdaptedMeasure, mu_tilde: &AdaptedMeasure, lat: &LatticeModel) -> Result<SubmartingaleReport> {
    if mu.steps() != lat.steps() || mu_tilde.steps() != lat.steps() {
        return Err(Error::LatticeMismatch);
    }
    if !mu.stochastic_leq(mu_tilde)? {
        return Err(Error::PairNotOrdered);
    }
    let steps = lat.steps();
    let paths = lat.num_paths() as PathId;
    // per b: for each k < K, sums of M_{k+1} - M_k over w, grouped by w prefix
    let per_b: Vec<Vec<Vec<f64>>> = par::map_collect(0..paths, |b| {
        let mut sums: Vec<Vec<f64>> = (0..steps).map(|k| vec![0.0; 1 << k]).collect();
        for w in 0..paths {
            let m: Vec<f64> = (0..=steps)
                .map(|k| f.evaluate(lat, b, w, mu_tilde.row(b), k) - f.evaluate(lat, b, w, mu.row(b), k))
                .collect();
            for (k, layer) in sums.iter_mut().enumerate() {
                layer[prefix(w, k) as usize] += m[k + 1] - m[k];
            }
        }
        sums
    });
    let mut worst_gap = 0.0f64;
    let mut worst_node = None;
    for k in 0..steps {
        let width = 1usize << k;
        let mut totals = vec![0.0; width * width];
        for (b, sums) in per_b.iter().enumerate() {
            let bp = prefix(b as PathId, k) as usize;
            for (wp, &s) in sums[k].iter().enumerate() {
                totals[bp + width * wp] += s;
            }
        }
        let through = (1u64 << (2 * (steps - k))) as f64;
        for (id, &total) in totals.iter().enumerate() {
            let gap = total / through;
            if worst_node.is_none() || gap < worst_gap {
                worst_gap = gap;
                worst_node = Some(JointNode {
                    k,
                    b_prefix: (id % width) as PathId,
                    w_prefix: (id / width) as PathId,
                });
            }
        }
    }
    let passed = worst_gap >= -TIE_TOLERANCE;
    Ok(SubmartingaleReport {
        passed,
        worst_gap,
        node: if passed { None } else { worst_node },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeConfig};
    use crate::payoff::{cdf_before_payoff, constant_payoff, diffusion_payoff, DiffusionPayoffParams, FPreset, PhiPreset};
    use rand::SeedableRng;

    fn lattice(k: usize) -> LatticeModel {
        build_lattice(&LatticeConfig::new(k, 1.0, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn enumeration_matches_rule_count() {
        let lat = lattice(2);
        for tree in [InfoTree::public(&lat), InfoTree::full(&lat)] {
            let rules = enumerate_rules(&tree);
            assert_eq!(rules.len() as f64, canonical_rule_count(&tree));
            let unique: std::collections::HashSet<_> = rules.iter().collect();
            assert_eq!(unique.len(), rules.len());
        }
        let lat4 = lattice(4);
        assert_eq!(enumerate_rules(&InfoTree::public(&lat4)).len(), 677);
    }

    #[test]
    fn samplers_respect_the_orders() {
        let lat = lattice(3);
        let tree = InfoTree::full(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (tau, tau_tilde) = sample_ordered_rules(&tree, &mut rng);
            assert!(tau.leq(&tau_tilde, &lat));
            let (mu, mu_tilde) = sample_ordered_measures(&tree, &lat, &mut rng);
            assert!(mu.stochastic_leq(&mu_tilde).unwrap());
        }
    }

    #[test]
    fn constant_payoff_has_increasing_differences() {
        let lat = lattice(3);
        let report = check_increasing_differences(constant_payoff(1.5).as_ref(), &lat, 200, 3);
        assert!(report.passed);
        assert_eq!(report.trials_run, 200);
    }

    #[test]
    fn identity_cdf_payoff_is_refuted_exhaustively() {
        let lat = lattice(2);
        let f = cdf_before_payoff();
        let report = check_increasing_differences_exhaustive(f.as_ref(), &lat, &InfoTree::full(&lat)).unwrap();
        assert!(!report.passed);
        let v = report.violation.unwrap();
        assert!(v.mu.stochastic_leq(&v.mu_tilde).unwrap());
        assert!(v.tau.leq(&v.tau_tilde, &lat));
        assert!(v.lhs < v.rhs - TIE_TOLERANCE);
        let (lhs, rhs) = increasing_difference_sides(f.as_ref(), &lat, &v.mu, &v.mu_tilde, &v.tau, &v.tau_tilde);
        assert_eq!((lhs, rhs), (v.lhs, v.rhs));
    }

    #[test]
    fn equal_measures_give_zero_gap() {
        let lat = lattice(3);
        let tree = InfoTree::full(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = conditional_law(&sample_rule(&tree, &mut rng), &lat);
        let report = check_submartingale(cdf_before_payoff().as_ref(), &mu, &mu, &lat).unwrap();
        assert!(report.passed);
        assert_eq!(report.worst_gap, 0.0);
    }

    #[test]
    fn unordered_pair_is_rejected() {
        let lat = lattice(2);
        let early = AdaptedMeasure::dirac(&lat, 0);
        let late = AdaptedMeasure::dirac(&lat, 2);
        let err = check_submartingale(constant_payoff(1.0).as_ref(), &late, &early, &lat).unwrap_err();
        assert!(matches!(err, Error::PairNotOrdered));
    }

    #[test]
    fn identity_cdf_payoff_fails_at_a_node() {
        // M_t = m̃[0,t) - m[0,t) drops from 0 to -1 between t_0 and t_1
        let lat = lattice(2);
        let mu = AdaptedMeasure::dirac(&lat, 0);
        let mu_tilde = AdaptedMeasure::dirac(&lat, 2);
        let report = check_submartingale(cdf_before_payoff().as_ref(), &mu, &mu_tilde, &lat).unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst_gap, -1.0);
        assert_eq!(report.node, Some(JointNode { k: 0, b_prefix: 0, w_prefix: 0 }));
    }

    #[test]
    fn positive_part_kernel_fails_and_its_negative_passes() {
        let lat = lattice(3);
        let tree = InfoTree::full(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let up = diffusion_payoff(&DiffusionPayoffParams { f: FPreset::Y, phi: PhiPreset::PositivePart { slope: 1.0 } }).unwrap();
        let down = diffusion_payoff(&DiffusionPayoffParams { f: FPreset::Y, phi: PhiPreset::NegativePositivePart { slope: 1.0 } }).unwrap();
        let mut failures = 0;
        for _ in 0..20 {
            let (mu, mu_tilde) = sample_ordered_measures(&tree, &lat, &mut rng);
            assert!(check_submartingale(down.as_ref(), &mu, &mu_tilde, &lat).unwrap().passed);
            if !check_submartingale(up.as_ref(), &mu, &mu_tilde, &lat).unwrap().passed {
                failures += 1;
            }
        }
        assert!(failures > 0);
    }
}
