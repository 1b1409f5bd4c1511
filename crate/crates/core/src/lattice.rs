//! Binomial path lattices for the common noise `B` and the idiosyncratic
//! noise `W`.
//!
//! A path is a `K`-bit integer: bit `j` encodes the increment over
//! `[t_j, t_{j+1}]`, `1` meaning up. Each of the `2^K` paths has probability
//! `2^-K`, and a joint `(B, W)` path has probability `4^-K`. The prefix of
//! length `k` of a path is `path & ((1 << k) - 1)`.

use crate::error::{Error, Result};

/// A `K`-bit increment path.
pub type PathId = u32;

/// Default cap on the number of steps; `4^14` joint paths is about `2.7e8`.
pub const DEFAULT_MAX_STEPS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    pub steps: usize,
    pub dt: f64,
    pub b0: f64,
    pub db: f64,
    pub dw: f64,
    /// Hard cap on `steps`.
    pub max_steps: usize,
}

impl LatticeConfig {
    pub fn new(steps: usize, dt: f64, b0: f64, db: f64, dw: f64) -> Self {
        LatticeConfig {
            steps,
            dt,
            b0,
            db,
            dw,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeModel {
    steps: usize,
    dt: f64,
    b0: f64,
    db: f64,
    dw: f64,
}

/// Validates `config` and builds the lattice.
pub fn build_lattice(config: &LatticeConfig) -> Result<LatticeModel> {
    LatticeModel::new(config)
}

impl LatticeModel {
    pub fn new(config: &LatticeConfig) -> Result<Self> {
        if config.steps == 0 {
            return Err(Error::InvalidLattice("steps must be at least 1".into()));
        }
        // path ids are u32 and joint ids pack two paths
        let cap = config.max_steps.min(15);
        if config.steps > cap {
            return Err(Error::LatticeTooLarge {
                steps: config.steps,
                cap,
            });
        }
        if !(config.dt.is_finite() && config.dt > 0.0) {
            return Err(Error::InvalidLattice("dt must be positive".into()));
        }
        if !(config.db.is_finite() && config.db > 0.0) {
            return Err(Error::InvalidLattice("db must be positive".into()));
        }
        if !(config.dw.is_finite() && config.dw > 0.0) {
            return Err(Error::InvalidLattice("dw must be positive".into()));
        }
        if !config.b0.is_finite() {
            return Err(Error::InvalidLattice("b0 must be finite".into()));
        }
        Ok(LatticeModel {
            steps: config.steps,
            dt: config.dt,
            b0: config.b0,
            db: config.db,
            dw: config.dw,
        })
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn b0(&self) -> f64 {
        self.b0
    }

    #[inline]
    pub fn db(&self) -> f64 {
        self.db
    }

    #[inline]
    pub fn dw(&self) -> f64 {
        self.dw
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Number of grid times, `K + 1`.
    #[inline]
    pub fn grid_len(&self) -> usize {
        self.steps + 1
    }

    /// Grid time `t_k = k * dt`.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Number of `B` (or `W`) paths, `2^K`.
    #[inline]
    pub fn num_paths(&self) -> usize {
        1usize << self.steps
    }

    /// Number of joint `(B, W)` paths, `4^K`.
    #[inline]
    pub fn num_joint_paths(&self) -> usize {
        1usize << (2 * self.steps)
    }

    /// Packs a joint path as `b | w << K`.
    #[inline]
    pub fn joint_id(&self, b: PathId, w: PathId) -> usize {
        b as usize | ((w as usize) << self.steps)
    }

    #[inline]
    pub fn split_joint(&self, joint: usize) -> (PathId, PathId) {
        let mask = self.num_paths() - 1;
        ((joint & mask) as PathId, (joint >> self.steps) as PathId)
    }

    /// Index of the grid point equal to `t`, tolerating rounding of `k * dt`.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let x = t / self.dt;
        let k = x.round();
        if !t.is_finite() || k < 0.0 || k > self.steps as f64 || (x - k).abs() > 1e-9 {
            return Err(Error::TimeNotOnGrid(t));
        }
        Ok(k as usize)
    }

    /// `B_{t_k}` along path `b`.
    #[inline]
    pub fn b_value(&self, b: PathId, k: usize) -> f64 {
        self.b0 + self.db * net_ups(b, k) as f64
    }

    /// `W_{t_k}` along path `w` (`W_0 = 0`).
    #[inline]
    pub fn w_value(&self, w: PathId, k: usize) -> f64 {
        self.dw * net_ups(w, k) as f64
    }

    /// Values of `B` at every grid time.
    pub fn b_path(&self, b: PathId) -> Vec<f64> {
        (0..=self.steps).map(|k| self.b_value(b, k)).collect()
    }

    /// Distinct reachable values of `B_T` with their path counts, ascending.
    pub fn terminal_b_distribution(&self) -> Vec<(f64, usize)> {
        let k = self.steps;
        (0..=k)
            .map(|ups| {
                let value = self.b0 + self.db * (2 * ups as i64 - k as i64) as f64;
                (value, binomial_coefficient(k, ups))
            })
            .collect()
    }
}

/// `#up - #down` over the first `k` increments.
#[inline]
pub fn net_ups(path: PathId, k: usize) -> i64 {
    let ups = (path & prefix_mask(k)).count_ones() as i64;
    2 * ups - k as i64
}

#[inline]
pub fn prefix_mask(k: usize) -> PathId {
    if k >= 32 {
        PathId::MAX
    } else {
        ((1u64 << k) - 1) as PathId
    }
}

#[inline]
pub fn prefix(path: PathId, k: usize) -> PathId {
    path & prefix_mask(k)
}

/// Increment `j` (0-based) of `path` is up.
#[inline]
pub fn is_up(path: PathId, j: usize) -> bool {
    (path >> j) & 1 == 1
}

pub(crate) fn binomial_coefficient(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_lattice() {
        let lat = build_lattice(&LatticeConfig::new(1, 1.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(lat.num_paths(), 2);
        assert_eq!(lat.num_joint_paths(), 4);
        assert_eq!(lat.times(), vec![0.0, 1.0]);
        let mut terminal: Vec<f64> = (0..2).map(|b| lat.b_value(b, 1)).collect();
        terminal.sort_by(f64::total_cmp);
        assert_eq!(terminal, vec![-1.0, 1.0]);
        assert_eq!(lat.w_value(1, 1), 1.0);
        assert_eq!(lat.w_value(0, 1), -1.0);
    }

    #[test]
    fn terminal_values_follow_binomial_counts() {
        let lat = build_lattice(&LatticeConfig::new(3, 0.5, 3.0, 1.0, 1.0)).unwrap();
        assert_eq!(lat.num_paths(), 8);
        assert_eq!(
            lat.terminal_b_distribution(),
            vec![(0.0, 1), (2.0, 3), (4.0, 3), (6.0, 1)]
        );
        let mut counts = std::collections::BTreeMap::new();
        for b in 0..8 {
            *counts.entry(lat.b_value(b, 3) as i64).or_insert(0) += 1;
        }
        assert_eq!(counts.into_iter().collect::<Vec<_>>(), vec![(0, 1), (2, 3), (4, 3), (6, 1)]);
        assert_eq!(lat.horizon(), 1.5);
    }

    #[test]
    fn rejects_oversized_lattice() {
        let err = build_lattice(&LatticeConfig::new(15, 1.0, 0.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::LatticeTooLarge { steps: 15, cap: 14 }));
        assert!(err.to_string().contains("lattice too large"));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(build_lattice(&LatticeConfig::new(0, 1.0, 0.0, 1.0, 1.0)).is_err());
        assert!(build_lattice(&LatticeConfig::new(2, 0.0, 0.0, 1.0, 1.0)).is_err());
        assert!(build_lattice(&LatticeConfig::new(2, 1.0, 0.0, -1.0, 1.0)).is_err());
        assert!(build_lattice(&LatticeConfig::new(2, 1.0, 0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn grid_index_tolerates_rounding() {
        let lat = build_lattice(&LatticeConfig::new(10, 0.1, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(lat.grid_index(0.1 * 3.0).unwrap(), 3);
        assert_eq!(lat.grid_index(1.0).unwrap(), 10);
        assert!(matches!(lat.grid_index(0.15), Err(Error::TimeNotOnGrid(_))));
        assert!(lat.grid_index(1.1).is_err());
        assert!(lat.grid_index(-0.1).is_err());
    }

    #[test]
    fn prefixes_and_joint_ids() {
        let lat = build_lattice(&LatticeConfig::new(4, 1.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(prefix(0b1011, 2), 0b11);
        assert_eq!(net_ups(0b1011, 4), 2);
        let j = lat.joint_id(0b0101, 0b1100);
        assert_eq!(lat.split_joint(j), (0b0101, 0b1100));
    }
}
