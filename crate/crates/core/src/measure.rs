//! Measures on the time grid and `B`-adapted random measures.

use crate::error::{Error, Result};
use crate::lattice::{prefix, LatticeModel, PathId};
use crate::par;
use crate::rule::StoppingRule;

/// A probability measure on the grid `{t_0, ..., t_K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    mass: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridMeasure {
    /// From point masses; they must be nonnegative and sum to one within `1e-12`.
    pub fn from_masses(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidMeasure("empty grid".into()));
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidMeasure("negative or non-finite mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("masses sum to {total}")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = mass
            .iter()
            .map(|&m| {
                acc += m;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(GridMeasure { mass, cdf })
    }

    /// From a CDF on the grid; it must be nondecreasing in `[0, 1]` and end at 1.
    pub fn from_cdf(cdf: Vec<f64>) -> Result<Self> {
        if cdf.is_empty() {
            return Err(Error::InvalidMeasure("empty grid".into()));
        }
        let mut prev = 0.0;
        for &c in &cdf {
            if !(c >= prev) || c > 1.0 {
                return Err(Error::InvalidMeasure("cdf not nondecreasing in [0, 1]".into()));
            }
            prev = c;
        }
        if *cdf.last().unwrap() != 1.0 {
            return Err(Error::InvalidMeasure("cdf must equal 1 at the horizon".into()));
        }
        let mass = cdf
            .iter()
            .enumerate()
            .map(|(k, &c)| if k == 0 { c } else { c - cdf[k - 1] })
            .collect();
        Ok(GridMeasure { mass, cdf })
    }

    /// Point mass at grid index `k` on a grid of `len` points.
    pub fn dirac(len: usize, k: usize) -> Self {
        let mut mass = vec![0.0; len];
        mass[k] = 1.0;
        let cdf = (0..len).map(|j| if j >= k { 1.0 } else { 0.0 }).collect();
        GridMeasure { mass, cdf }
    }

    /// Empirical measure of grid indices; mass `count / n` at each index.
    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyTimes);
        }
        let mut counts = vec![0u64; len];
        for &k in indices {
            if k >= len {
                return Err(Error::InvalidMeasure(format!("index {k} off grid")));
            }
            counts[k] += 1;
        }
        Ok(Self::from_counts(&counts, indices.len() as u64))
    }

    /// `mass_k = counts_k / n`; the counts must sum to `n`.
    pub fn from_counts(counts: &[u64], n: u64) -> Self {
        let inv = 1.0 / n as f64;
        let mut acc = 0u64;
        let mass = counts.iter().map(|&c| c as f64 * inv).collect();
        let cdf = counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 * inv
            })
            .collect();
        debug_assert_eq!(acc, n);
        GridMeasure { mass, cdf }
    }

    /// Two-point measure with mass `before` at `t_0` and the rest at `t_k`:
    /// it has `m[0, t_k) = before` for `k > 0`.
    pub fn with_mass_before(len: usize, k: usize, before: f64) -> Self {
        if k == 0 {
            return Self::dirac(len, 0);
        }
        let mut mass = vec![0.0; len];
        mass[0] = before;
        mass[k] += 1.0 - before;
        let cdf = (0..len)
            .map(|j| if j >= k { 1.0 } else { before })
            .collect();
        GridMeasure { mass, cdf }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    /// `m({t_k})`.
    #[inline]
    pub fn mass(&self, k: usize) -> f64 {
        self.mass[k]
    }

    /// `m[0, t_k]`.
    #[inline]
    pub fn cdf(&self, k: usize) -> f64 {
        self.cdf[k]
    }

    /// `m[0, t_k)`, the mass strictly before `t_k`.
    #[inline]
    pub fn before(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cdf[k - 1]
        }
    }

    pub fn mean_index(&self) -> f64 {
        self.mass.iter().enumerate().map(|(k, &m)| k as f64 * m).sum()
    }
}

/// Empirical measure `(1/n) Σ δ_{t_i}` of times on the lattice grid.
pub fn empirical_measure(lat: &LatticeModel, times: &[f64]) -> Result<GridMeasure> {
    if times.is_empty() {
        return Err(Error::EmptyTimes);
    }
    let indices = times
        .iter()
        .map(|&t| lat.grid_index(t))
        .collect::<Result<Vec<_>>>()?;
    GridMeasure::from_indices(lat.grid_len(), &indices)
}

/// Kolmogorov distance `sup_t |m[0,t] - m0[0,t]|`.
pub fn cdf_uniform_distance(m: &GridMeasure, m0: &GridMeasure) -> Result<f64> {
    if m.len() != m0.len() {
        return Err(Error::GridMismatch(m.len(), m0.len()));
    }
    Ok(m.cdf
        .iter()
        .zip(&m0.cdf)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// A random measure on the grid, indexed by the full `B` path, whose CDF at
/// `t_k` depends only on the first `k` increments of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedMeasure {
    steps: usize,
    rows: Vec<GridMeasure>,
}

impl AdaptedMeasure {
    /// Validates adaptedness: paths sharing a `k`-prefix must carry
    /// bit-identical CDF values at `t_k`.
    pub fn new(steps: usize, rows: Vec<GridMeasure>) -> Result<Self> {
        if rows.len() != 1usize << steps {
            return Err(Error::InvalidMeasure(format!(
                "expected {} rows, got {}",
                1usize << steps,
                rows.len()
            )));
        }
        if rows.iter().any(|r| r.len() != steps + 1) {
            return Err(Error::InvalidMeasure("row length mismatch".into()));
        }
        for (b, row) in rows.iter().enumerate() {
            for k in 0..steps {
                let representative = prefix(b as PathId, k) as usize;
                if row.cdf(k).to_bits() != rows[representative].cdf(k).to_bits() {
                    return Err(Error::InvalidMeasure(format!(
                        "not adapted: path {b} differs from its {k}-prefix at t_{k}"
                    )));
                }
            }
        }
        Ok(AdaptedMeasure { steps, rows })
    }

    /// From `cdf(b, k)`, evaluated on every full path.
    pub fn from_cdf_fn(lat: &LatticeModel, cdf: impl Fn(PathId, usize) -> f64) -> Result<Self> {
        let rows = (0..lat.num_paths() as PathId)
            .map(|b| GridMeasure::from_cdf((0..=lat.steps()).map(|k| cdf(b, k)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(lat.steps(), rows)
    }

    /// The same grid measure on every path.
    pub fn constant(lat: &LatticeModel, m: &GridMeasure) -> Result<Self> {
        if m.len() != lat.grid_len() {
            return Err(Error::GridMismatch(m.len(), lat.grid_len()));
        }
        Ok(AdaptedMeasure {
            steps: lat.steps(),
            rows: vec![m.clone(); lat.num_paths()],
        })
    }

    /// Law of the deterministic time `t_k`.
    pub fn dirac(lat: &LatticeModel, k: usize) -> Self {
        AdaptedMeasure {
            steps: lat.steps(),
            rows: vec![GridMeasure::dirac(lat.grid_len(), k); lat.num_paths()],
        }
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn row(&self, b: PathId) -> &GridMeasure {
        &self.rows[b as usize]
    }

    pub fn rows(&self) -> &[GridMeasure] {
        &self.rows
    }

    #[inline]
    pub fn cdf(&self, b: PathId, k: usize) -> f64 {
        self.rows[b as usize].cdf(k)
    }

    /// `self ≤ other` in stochastic order: `other` stops later, i.e.
    /// `cdf_other(b, t) ≤ cdf_self(b, t)` everywhere.
    pub fn stochastic_leq(&self, other: &AdaptedMeasure) -> Result<bool> {
        if self.steps != other.steps {
            return Err(Error::LatticeMismatch);
        }
        Ok(self
            .rows
            .iter()
            .zip(&other.rows)
            .all(|(a, b)| a.cdf.iter().zip(&b.cdf).all(|(x, y)| y <= x)))
    }

    /// Unconditional law, averaged over `B`.
    pub fn average(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.steps + 1];
        for row in &self.rows {
            for (o, &c) in out.iter_mut().zip(&row.cdf) {
                *o += c;
            }
        }
        let n = self.rows.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// `ψ(τ)`: the conditional law of the rule's stopping time given the full
/// `B` path, `cdf(b, t_k) = 2^-K #{w : τ(b, w) ≤ t_k}`.
///
/// Counts are exact dyadic rationals and stay exact in `f64` for `K ≤ 52`.
pub fn conditional_law(rule: &StoppingRule, lat: &LatticeModel) -> AdaptedMeasure {
    assert_eq!(rule.tree().steps(), lat.steps(), "rule and lattice disagree on K");
    let paths = lat.num_paths() as PathId;
    let scale = 1.0 / lat.num_paths() as f64;
    let rows = par::map_collect(0..paths, |b| {
        let mut counts = vec![0u64; lat.grid_len()];
        for w in 0..paths {
            counts[rule.stop_index(b, w)] += 1;
        }
        let mut acc = 0u64;
        let cdf = counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 * scale
            })
            .collect();
        GridMeasure::from_cdf(cdf).expect("counting CDF is valid")
    });
    AdaptedMeasure::new(lat.steps(), rows).expect("conditional law of a stopping rule is adapted")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, is_up, LatticeConfig};
    use crate::tree::InfoTree;

    fn lattice(k: usize, dt: f64) -> LatticeModel {
        build_lattice(&LatticeConfig::new(k, dt, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn empirical_measure_counts() {
        let lat = lattice(2, 0.5);
        let m = empirical_measure(&lat, &[0.0, 0.5, 0.5]).unwrap();
        assert_eq!(m.masses(), &[1.0 / 3.0, 2.0 / 3.0, 0.0]);

        let m = empirical_measure(&lat, &[1.0]).unwrap();
        assert_eq!(m, GridMeasure::dirac(3, 2));

        let m = empirical_measure(&lat, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.cdf(0), 0.75);
        assert_eq!(m.cdf(2), 1.0);

        assert!(matches!(
            empirical_measure(&lat, &[0.25]),
            Err(Error::TimeNotOnGrid(_))
        ));
        assert!(empirical_measure(&lat, &[]).is_err());
    }

    #[test]
    fn repeated_time_is_point_mass() {
        let lat = lattice(4, 1.0);
        for k in 0..=4 {
            let times = vec![k as f64; 7];
            assert_eq!(empirical_measure(&lat, &times).unwrap(), GridMeasure::dirac(5, k));
        }
    }

    #[test]
    fn kolmogorov_distance_examples() {
        let d0 = GridMeasure::dirac(3, 0);
        let dt = GridMeasure::dirac(3, 2);
        assert_eq!(cdf_uniform_distance(&d0, &d0).unwrap(), 0.0);
        assert_eq!(cdf_uniform_distance(&d0, &dt).unwrap(), 1.0);
        let uniform = GridMeasure::from_masses(vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(cdf_uniform_distance(&uniform, &d0).unwrap(), 0.5);
        assert!(matches!(
            cdf_uniform_distance(&d0, &GridMeasure::dirac(4, 0)),
            Err(Error::GridMismatch(3, 4))
        ));
    }

    #[test]
    fn grid_measure_validation() {
        assert!(GridMeasure::from_masses(vec![0.5, 0.4]).is_err());
        assert!(GridMeasure::from_masses(vec![1.5, -0.5]).is_err());
        assert!(GridMeasure::from_cdf(vec![0.5, 0.4, 1.0]).is_err());
        assert!(GridMeasure::from_cdf(vec![0.5, 0.9]).is_err());
        let m = GridMeasure::with_mass_before(4, 2, 0.25);
        assert_eq!(m.before(2), 0.25);
        assert_eq!(m.before(0), 0.0);
        assert_eq!(m.cdf(3), 1.0);
    }

    #[test]
    fn deterministic_rule_law() {
        let lat = lattice(3, 1.0);
        let tree = InfoTree::full(&lat);
        for t0 in 0..=3 {
            let law = conditional_law(&StoppingRule::stop_at(&tree, t0), &lat);
            for b in 0..8 {
                for k in 0..=3 {
                    assert_eq!(law.cdf(b, k), if k >= t0 { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn first_w_up_rule_law() {
        // stop at the first k with ΔW_k = +dw, else at T
        let lat = lattice(3, 1.0);
        let tree = InfoTree::full(&lat);
        let rule = StoppingRule::from_fn(&tree, |k, node| {
            k > 0 && tree.symbols(k, node)[k - 1] >= 2
        });
        // oracle: enumerate all 8 W-paths directly
        let oracle = |k: usize| -> f64 {
            let hits = (0..8u32)
                .filter(|&w| {
                    let tau = (0..3).find(|&j| is_up(w, j)).map_or(3, |j| j + 1);
                    tau <= k
                })
                .count();
            hits as f64 / 8.0
        };
        let law = conditional_law(&rule, &lat);
        for b in 0..8 {
            assert_eq!(law.cdf(b, 0), 0.0);
            assert_eq!(law.cdf(b, 1), 0.5);
            assert_eq!(law.cdf(b, 2), 0.75);
            assert_eq!(law.cdf(b, 3), 1.0);
            for k in 0..=3 {
                assert_eq!(law.cdf(b, k), oracle(k));
            }
        }
    }

    #[test]
    fn first_b_down_rule_law_tracks_own_path() {
        let lat = lattice(3, 1.0);
        let tree = InfoTree::public(&lat);
        let rule = StoppingRule::from_fn(&tree, |k, node| {
            k > 0 && !is_up(node as PathId, k - 1)
        });
        let law = conditional_law(&rule, &lat);
        for b in 0..8u32 {
            let tau = (0..3).find(|&j| !is_up(b, j)).map_or(3, |j| j + 1);
            for k in 0..=3 {
                assert_eq!(law.cdf(b, k), if k >= tau { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn extremes_of_stochastic_order() {
        let lat = lattice(2, 1.0);
        let early = AdaptedMeasure::dirac(&lat, 0);
        let late = AdaptedMeasure::dirac(&lat, 2);
        assert!(early.stochastic_leq(&late).unwrap());
        assert!(!late.stochastic_leq(&early).unwrap());
        assert!(early.stochastic_leq(&early).unwrap());
    }

    #[test]
    fn crossing_cdfs_are_incomparable() {
        let lat = lattice(2, 1.0);
        let split = AdaptedMeasure::constant(&lat, &GridMeasure::from_masses(vec![0.5, 0.0, 0.5]).unwrap()).unwrap();
        let middle = AdaptedMeasure::dirac(&lat, 1);
        assert!(!split.stochastic_leq(&middle).unwrap());
        assert!(!middle.stochastic_leq(&split).unwrap());
    }

    #[test]
    fn rejects_non_adapted_rows() {
        let lat = lattice(2, 1.0);
        // cdf at t_1 depends on the second increment
        let result = AdaptedMeasure::from_cdf_fn(&lat, |b, k| match k {
            0 => 0.0,
            1 => if is_up(b, 1) { 0.5 } else { 0.25 },
            _ => 1.0,
        });
        assert!(result.is_err());
        let lat3 = lattice(3, 1.0);
        assert!(AdaptedMeasure::dirac(&lat, 0).stochastic_leq(&AdaptedMeasure::dirac(&lat3, 0)).is_err());
    }
}
