//! The `n`-player game around a mean field equilibrium: ε-Nash gaps of the
//! distributed profile and convergence of the empirical law.
//!
//! Player 1 stops at `τ(B, W¹)`; given `B = b`, the other `n - 1` stopping
//! times are i.i.d. with law `ψ(τ)(b)`. The population measure is the
//! empirical law of all `n` times, the player's own atom included.

use std::collections::HashMap;

use rand::Rng;
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, PathId};
use crate::measure::{cdf_uniform_distance, conditional_law, AdaptedMeasure, GridMeasure};
use crate::par;
use crate::payoff::{MeasureMode, Payoff};
use crate::rule::StoppingRule;
use crate::seed;
use crate::stopping::solve_on_tree;

/// Largest `n` for exhaustive enumeration of the others with `General` payoffs.
pub const EXACT_GENERAL_CAP: usize = 8;

/// Monte Carlo samples are split into this many groups for standard errors.
const MC_GROUPS: usize = 10;

/// Relative cut-off of the binomial window around the mode.
const PMF_CUTOFF: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Every player uses `rule` on its own copy of the idiosyncratic noise.
#[derive(Debug, Clone)]
pub struct NPlayerProfile {
    pub n: usize,
    pub rule: StoppingRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Deviation {
    pub value: f64,
    pub stderr: Option<f64>,
    pub rule: StoppingRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub n: usize,
    pub eq_value: f64,
    pub best_dev_value: f64,
    /// `max(0, best_dev_value - eq_value)`.
    pub epsilon: f64,
    pub method: Method,
    pub stderr: Option<f64>,
}

/// Player 1's expected payoff in the profile.
pub fn equilibrium_value(f: &dyn Payoff, prof: &NPlayerProfile, lat: &LatticeModel, method: Method) -> Result<Estimate> {
    let model = OthersModel::build(f, prof, lat, method)?;
    let groups: Vec<f64> = (0..model.groups()).map(|g| model.profile_value(&prof.rule, lat, g)).collect();
    Ok(Estimate {
        value: model.profile_value(&prof.rule, lat, ALL),
        stderr: stderr(&groups),
    })
}

/// Player 1's best unilateral deviation, adapted to its own information tree.
pub fn best_deviation(f: &dyn Payoff, prof: &NPlayerProfile, lat: &LatticeModel, method: Method) -> Result<Deviation> {
    let model = OthersModel::build(f, prof, lat, method)?;
    let (value, rule) = model.deviation(f, &prof.rule, lat, ALL);
    let groups: Vec<f64> = (0..model.groups()).map(|g| model.deviation(f, &prof.rule, lat, g).0).collect();
    Ok(Deviation {
        value,
        stderr: stderr(&groups),
        rule,
    })
}

/// ε-Nash gap of the distributed profile built from `mfe_rule`.
pub fn estimate_epsilon(f: &dyn Payoff, mfe_rule: &StoppingRule, n: usize, lat: &LatticeModel, method: Method) -> Result<DeviationReport> {
    let prof = NPlayerProfile { n, rule: mfe_rule.clone() };
    let model = OthersModel::build(f, &prof, lat, method)?;
    let eq_value = model.profile_value(mfe_rule, lat, ALL);
    let best_dev_value = model.deviation(f, mfe_rule, lat, ALL).0;
    let gaps: Vec<f64> = (0..model.groups())
        .map(|g| model.deviation(f, mfe_rule, lat, g).0 - model.profile_value(mfe_rule, lat, g))
        .collect();
    Ok(DeviationReport {
        n,
        eq_value,
        best_dev_value,
        epsilon: (best_dev_value - eq_value).max(0.0),
        method,
        stderr: stderr(&gaps),
    })
}

fn stderr(groups: &[f64]) -> Option<f64> {
    if groups.len() < 2 {
        return None;
    }
    let g = groups.len() as f64;
    let mean = groups.iter().sum::<f64>() / g;
    let var = groups.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (g - 1.0);
    Some((var / g).sqrt())
}

/// Selects the pooled estimate rather than one Monte Carlo group.
const ALL: usize = usize::MAX;

/// `E[F(b, w, μ̄ⁿ, t_k)]` over the other players, for player 1 stopping at `t_k`.
enum OthersModel<'a> {
    /// `CdfAtT` payoffs: the others enter only through a binomial count.
    Binomial {
        f: &'a dyn Payoff,
        n: usize,
        /// Window per distinct success probability, keyed by its bits.
        windows: HashMap<u64, (u64, Vec<f64>)>,
        mu: AdaptedMeasure,
    },
    /// Tabulated rewards `[group][(b, w, k)]`; group 0 pools everything
    /// when there is a single table.
    Table { steps: usize, tables: Vec<Vec<f64>>, pooled: Vec<f64> },
}

impl<'a> OthersModel<'a> {
    fn build(f: &'a dyn Payoff, prof: &NPlayerProfile, lat: &LatticeModel, method: Method) -> Result<Self> {
        if prof.n == 0 {
            return Err(Error::InvalidParams("n must be at least 1".into()));
        }
        if prof.rule.tree().steps() != lat.steps() {
            return Err(Error::LatticeMismatch);
        }
        let mu = conditional_law(&prof.rule, lat);
        match method {
            Method::Exact if f.measure_mode() == MeasureMode::CdfAtT => {
                let trials = (prof.n - 1) as u64;
                let mut windows = HashMap::new();
                for row in mu.rows() {
                    for k in 0..row.len() {
                        let p = row.before(k);
                        windows.entry(p.to_bits()).or_insert_with(|| binomial_window(trials, p));
                    }
                }
                Ok(OthersModel::Binomial { f, n: prof.n, windows, mu })
            }
            Method::Exact => {
                if prof.n > EXACT_GENERAL_CAP {
                    return Err(Error::ExactIntractable { n: prof.n, cap: EXACT_GENERAL_CAP });
                }
                let pooled = exact_table(f, prof.n, &mu, lat);
                Ok(OthersModel::Table { steps: lat.steps(), tables: Vec::new(), pooled })
            }
            Method::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::InvalidParams("samples must be at least 1".into()));
                }
                let (tables, pooled) = monte_carlo_tables(f, prof.n, &mu, lat, samples, seed);
                Ok(OthersModel::Table { steps: lat.steps(), tables, pooled })
            }
        }
    }

    fn groups(&self) -> usize {
        match self {
            OthersModel::Binomial { .. } => 0,
            OthersModel::Table { tables, .. } => tables.len(),
        }
    }

    fn reward(&self, lat: &LatticeModel, b: PathId, w: PathId, k: usize, group: usize) -> f64 {
        match self {
            OthersModel::Binomial { f, n, windows, mu } => {
                let (start, pmf) = &windows[&mu.row(b).before(k).to_bits()];
                let len = lat.grid_len();
                let inv = 1.0 / *n as f64;
                pmf.iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let m = GridMeasure::with_mass_before(len, k, (start + i as u64) as f64 * inv);
                        p * f.evaluate(lat, b, w, &m, k)
                    })
                    .sum()
            }
            OthersModel::Table { steps, tables, pooled } => {
                let table = if group == ALL { pooled } else { &tables[group] };
                table[table_index(*steps, b, w, k)]
            }
        }
    }

    /// Causal payoffs keep causal rewards except under sampling, where
    /// each full `B` path carries its own draws.
    fn causal(&self, f: &dyn Payoff, lat: &LatticeModel) -> bool {
        match self {
            OthersModel::Binomial { .. } => f.is_causal(lat),
            OthersModel::Table { tables, .. } => tables.is_empty() && f.is_causal(lat),
        }
    }

    fn profile_value(&self, rule: &StoppingRule, lat: &LatticeModel, group: usize) -> f64 {
        let paths = lat.num_paths() as PathId;
        let partial = par::map_collect(0..paths, |b| {
            (0..paths)
                .map(|w| self.reward(lat, b, w, rule.stop_index(b, w), group))
                .sum::<f64>()
        });
        partial.iter().sum::<f64>() / lat.num_joint_paths() as f64
    }

    fn deviation(&self, f: &dyn Payoff, rule: &StoppingRule, lat: &LatticeModel, group: usize) -> (f64, StoppingRule) {
        let sol = solve_on_tree(rule.tree(), lat, self.causal(f, lat), |b, w, k| self.reward(lat, b, w, k, group));
        (sol.value, sol.rule_max)
    }
}

#[inline]
fn table_index(steps: usize, b: PathId, w: PathId, k: usize) -> usize {
    (((b as usize) << steps | w as usize) * (steps + 1)) + k
}

/// Binomial(trials, p) masses from the mode outwards, dropping tails below
/// `PMF_CUTOFF` relative to the mode, renormalized. Returns the first count
/// and the masses.
pub(crate) fn binomial_window(trials: u64, p: f64) -> (u64, Vec<f64>) {
    if trials == 0 || p <= 0.0 {
        return (0, vec![1.0]);
    }
    if p >= 1.0 {
        return (trials, vec![1.0]);
    }
    let dist = Binomial::new(p, trials).expect("p in (0, 1)");
    let mode = (((trials + 1) as f64 * p).floor() as u64).min(trials);
    let peak = dist.pmf(mode);
    let mut lo = mode;
    while lo > 0 && dist.pmf(lo - 1) >= peak * PMF_CUTOFF {
        lo -= 1;
    }
    let mut hi = mode;
    while hi < trials && dist.pmf(hi + 1) >= peak * PMF_CUTOFF {
        hi += 1;
    }
    let mut pmf: Vec<f64> = (lo..=hi).map(|c| dist.pmf(c)).collect();
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    (lo, pmf)
}

/// Exhaustive expectation over the multinomial counts of the others.
fn exact_table(f: &dyn Payoff, n: usize, mu: &AdaptedMeasure, lat: &LatticeModel) -> Vec<f64> {
    let steps = lat.steps();
    let paths = lat.num_paths() as PathId;
    let len = lat.grid_len();
    par::flat_map_collect(0..paths, |b| {
        let q = mu.row(b).masses();
        let mut out = vec![0.0; (paths as usize) * len];
        for_each_composition(n - 1, q, |counts, weight| {
            for k in 0..len {
                let mut own = counts.to_vec();
                own[k] += 1;
                let m = GridMeasure::from_counts(&own, n as u64);
                for w in 0..paths {
                    out[w as usize * len + k] += weight * f.evaluate(lat, b, w, &m, k);
                }
            }
        });
        debug_assert_eq!(out.len(), (1 << steps) * (steps + 1));
        out
    })
}

/// Calls `visit(counts, probability)` for every way of placing `others`
/// players into the bins of `q`, skipping bins of zero mass.
fn for_each_composition(others: usize, q: &[f64], mut visit: impl FnMut(&[u64], f64)) {
    fn recurse(bin: usize, left: usize, q: &[f64], counts: &mut Vec<u64>, log_w: f64, visit: &mut dyn FnMut(&[u64], f64)) {
        if bin == q.len() {
            if left == 0 {
                visit(counts, log_w.exp());
            }
            return;
        }
        let max = if q[bin] > 0.0 { left } else { 0 };
        for c in 0..=max {
            counts[bin] = c as u64;
            let term = if c == 0 { 0.0 } else { c as f64 * q[bin].ln() - ln_factorial(c) };
            recurse(bin + 1, left - c, q, counts, log_w + term, visit);
        }
        counts[bin] = 0;
    }
    let mut counts = vec![0u64; q.len()];
    recurse(0, others, q, &mut counts, ln_factorial(others), &mut visit);
}

fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}

/// Sampled rewards: per `B` path, `samples` draws of the others' times,
/// shared across `w` and `k`, split into groups for standard errors.
fn monte_carlo_tables(f: &dyn Payoff, n: usize, mu: &AdaptedMeasure, lat: &LatticeModel, samples: usize, master: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let paths = lat.num_paths() as PathId;
    let len = lat.grid_len();
    let groups = MC_GROUPS.min(samples);
    let per_b: Vec<Vec<Vec<f64>>> = par::map_collect(0..paths, |b| {
        let mut rng = seed::stream(master, &[n as u64, b as u64]);
        let cdf = mu.row(b).cdf_values();
        let mut sums = vec![vec![0.0; paths as usize * len]; groups];
        let mut counts = vec![0u64; len];
        for s in 0..samples {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 1..n {
                let u: f64 = rng.random();
                let k = cdf.iter().position(|&c| u < c).unwrap_or(len - 1);
                counts[k] += 1;
            }
            let table = &mut sums[s % groups];
            for k in 0..len {
                counts[k] += 1;
                let m = GridMeasure::from_counts(&counts, n as u64);
                counts[k] -= 1;
                for w in 0..paths {
                    table[w as usize * len + k] += f.evaluate(lat, b, w, &m, k);
                }
            }
        }
        sums
    });
    let group_sizes: Vec<f64> = (0..groups).map(|g| ((samples - g).div_ceil(groups)) as f64).collect();
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(groups);
    for (g, &size) in group_sizes.iter().enumerate() {
        tables.push(per_b.iter().flat_map(|sums| sums[g].iter().map(move |&x| x / size)).collect());
    }
    let pooled = (0..tables[0].len())
        .map(|i| {
            (0..groups).map(|g| tables[g][i] * group_sizes[g]).sum::<f64>() / samples as f64
        })
        .collect();
    (tables, pooled)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mean_kolmogorov_distance: f64,
}

/// For each `n`, the mean over `samples` simulations of
/// `sup_t |μ̄ⁿ[0,t] - ψ(rule)(B)[0,t]|`.
pub fn convergence_experiment(rule: &StoppingRule, n_list: &[usize], samples: usize, seed: u64, lat: &LatticeModel) -> Result<Vec<ConvergenceRow>> {
    if samples == 0 {
        return Err(Error::InvalidParams("samples must be at least 1".into()));
    }
    if n_list.contains(&0) {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    if rule.tree().steps() != lat.steps() {
        return Err(Error::LatticeMismatch);
    }
    let mu = conditional_law(rule, lat);
    let paths = lat.num_paths() as u32;
    let rows = n_list
        .iter()
        .map(|&n| {
            let distances = par::map_collect(0..samples, |s| {
                let mut rng = seed::stream(seed, &[n as u64, s as u64]);
                let b: PathId = rng.random_range(0..paths);
                let mut counts = vec![0u64; lat.grid_len()];
                for _ in 0..n {
                    let w: PathId = rng.random_range(0..paths);
                    counts[rule.stop_index(b, w)] += 1;
                }
                let empirical = GridMeasure::from_counts(&counts, n as u64);
                cdf_uniform_distance(&empirical, mu.row(b)).expect("same grid")
            });
            ConvergenceRow {
                n,
                mean_kolmogorov_distance: distances.iter().sum::<f64>() / samples as f64,
            }
        })
        .collect();
    Ok(rows)
}
