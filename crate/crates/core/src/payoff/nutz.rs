use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use super::{MeasureMode, PathMode, Payoff, PayoffSpec};
use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, PathId};
use crate::measure::GridMeasure;

/// Largest exponent evaluated before clamping.
pub const NUTZ_LOG_CAP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutzParams {
    /// Base rate.
    pub r: f64,
    /// Crowd sensitivity.
    pub c: f64,
}

/// `F = exp(Σ_{j<k} (r - B_{t_j} - W_{t_j} - c·m[0, t_j]) dt)`, the
/// left-endpoint discretization of the integral on the finite horizon.
#[derive(Debug)]
pub struct NutzPayoff {
    params: NutzParams,
    clamped: AtomicBool,
}

impl NutzPayoff {
    /// Whether any evaluation hit the overflow guard.
    pub fn clamped(&self) -> bool {
        self.clamped.load(Ordering::Relaxed)
    }

    fn max_exponent(&self, lat: &LatticeModel) -> f64 {
        let r = self.params.r;
        (0..lat.steps())
            .map(|j| (r - lat.b0() + j as f64 * (lat.db() + lat.dw())) * lat.dt())
            .sum::<f64>()
            .max(0.0)
    }
}

impl Payoff for NutzPayoff {
    fn evaluate(&self, lat: &LatticeModel, b: PathId, w: PathId, m: &GridMeasure, k: usize) -> f64 {
        let p = &self.params;
        let exponent: f64 = (0..k)
            .map(|j| (p.r - lat.b_value(b, j) - lat.w_value(w, j) - p.c * m.cdf(j)) * lat.dt())
            .sum();
        if exponent > NUTZ_LOG_CAP {
            self.clamped.store(true, Ordering::Relaxed);
            return NUTZ_LOG_CAP.exp();
        }
        exponent.exp()
    }

    fn measure_mode(&self) -> MeasureMode {
        MeasureMode::General
    }

    fn path_mode(&self) -> PathMode {
        PathMode::PrefixToT
    }

    fn bound(&self, lat: &LatticeModel) -> f64 {
        self.max_exponent(lat).min(NUTZ_LOG_CAP).exp()
    }

    fn is_causal(&self, _lat: &LatticeModel) -> bool {
        // reads m[0, t_j] for j < k only
        true
    }

    fn name(&self) -> String {
        "nutz".into()
    }
}

pub fn nutz_payoff(p: &NutzParams) -> Result<PayoffSpec> {
    Ok(Arc::new(nutz(p)?))
}

pub(crate) fn nutz(p: &NutzParams) -> Result<NutzPayoff> {
    if !(p.r > 0.0 && p.c > 0.0 && p.r.is_finite() && p.c.is_finite()) {
        return Err(Error::InvalidParams("nutz rates must be positive".into()));
    }
    Ok(NutzPayoff {
        params: *p,
        clamped: AtomicBool::new(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeConfig};

    #[test]
    fn empty_integral_at_time_zero() {
        let lat = build_lattice(&LatticeConfig::new(3, 0.5, 1.0, 1.0, 1.0)).unwrap();
        let f = nutz_payoff(&NutzParams { r: 0.3, c: 2.0 }).unwrap();
        assert_eq!(f.evaluate(&lat, 5, 3, &GridMeasure::dirac(4, 0), 0), 1.0);
    }

    #[test]
    fn single_term_with_zero_paths() {
        // B_0 = W_0 = 0 and m = δ_T contributes nothing before t_1
        let lat = build_lattice(&LatticeConfig::new(2, 0.25, 0.0, 1.0, 1.0)).unwrap();
        let f = nutz_payoff(&NutzParams { r: 0.4, c: 3.0 }).unwrap();
        let v = f.evaluate(&lat, 0, 0, &GridMeasure::dirac(3, 2), 1);
        assert!((v - (0.4f64 * 0.25).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_term_product_by_hand() {
        let lat = build_lattice(&LatticeConfig::new(2, 0.5, 0.2, 1.0, 0.5)).unwrap();
        let (r, c) = (0.3, 0.7);
        let f = nutz_payoff(&NutzParams { r, c }).unwrap();
        let m = GridMeasure::dirac(3, 0);
        // b: up then down, w: down then up
        let (b, w) = (0b01, 0b10);
        // j = 0: B = 0.2, W = 0, m[0, 0] = 1; j = 1: B = 1.2, W = -0.5, m[0, t_1] = 1
        let term0 = (r - 0.2 - 0.0 - c * 1.0) * 0.5;
        let term1 = (r - 1.2 + 0.5 - c * 1.0) * 0.5;
        let expected = term0.exp() * term1.exp();
        let got = f.evaluate(&lat, b, w, &m, 2);
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn overflow_guard_clamps_and_flags() {
        let lat = build_lattice(&LatticeConfig::new(4, 10.0, -5.0, 1.0, 1.0)).unwrap();
        let f = nutz(&NutzParams { r: 1.0, c: 0.1 }).unwrap();
        let v = f.evaluate(&lat, 0, 0, &GridMeasure::dirac(5, 4), 4);
        assert_eq!(v, NUTZ_LOG_CAP.exp());
        assert!(f.clamped());
        assert!(v <= f.bound(&lat));
    }

    #[test]
    fn bound_dominates_every_value() {
        let lat = build_lattice(&LatticeConfig::new(3, 0.3, 0.5, 1.0, 1.0)).unwrap();
        let f = nutz(&NutzParams { r: 0.2, c: 1.0 }).unwrap();
        let bound = f.bound(&lat);
        for b in 0..8 {
            for w in 0..8 {
                for k in 0..=3 {
                    assert!(f.evaluate(&lat, b, w, &GridMeasure::dirac(4, 3), k) <= bound + 1e-12);
                }
            }
        }
        assert!(!f.clamped());
    }
}
