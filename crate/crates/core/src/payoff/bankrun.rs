use std::sync::Arc;

use super::{MeasureMode, PathMode, Payoff, PayoffSpec};
use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, PathId};
use crate::measure::GridMeasure;

/// Liquidation value `L` of the bank's assets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Liquidation {
    /// `L(x) = max(0, slope * x + intercept)`.
    Linear { slope: f64, intercept: f64 },
    /// `L(x) = scale * sqrt(max(x, 0))`.
    Sqrt { scale: f64 },
}

impl Liquidation {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Liquidation::Linear { slope, intercept } => (slope * x + intercept).max(0.0),
            Liquidation::Sqrt { scale } => scale * x.max(0.0).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Liquidation::Linear { slope, intercept } => slope >= 0.0 && slope.is_finite() && intercept.is_finite(),
            Liquidation::Sqrt { scale } => scale >= 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams("liquidation function must be finite and nondecreasing".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankRunParams {
    /// Promised rate `r̄`.
    pub rbar: f64,
    /// Risk-free rate, `r < r̄`.
    pub r: f64,
    pub liquidation: Liquidation,
    /// Normalized deposit `D₀`.
    pub d0: f64,
    /// Read `m[0, t]` instead of `m[0, t)`.
    pub closed_interval: bool,
}

impl BankRunParams {
    pub fn new(rbar: f64, r: f64, liquidation: Liquidation) -> Self {
        BankRunParams {
            rbar,
            r,
            liquidation,
            d0: 1.0,
            closed_interval: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rbar.is_finite() && self.r.is_finite() && self.rbar > self.r) {
            return Err(Error::InvalidParams("promised rate must exceed the risk-free rate".into()));
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Error::InvalidParams("deposit must be positive".into()));
        }
        self.liquidation.validate()
    }

    /// Excess growth rate `r̄ - r`.
    pub fn spread(&self) -> f64 {
        self.rbar - self.r
    }
}

/// `F = e^{(r̄-r)t} · (D₀ ∧ (L(B_t) - m[0,t))⁺)`.
#[derive(Debug, Clone)]
pub struct BankRunPayoff {
    params: BankRunParams,
}

impl BankRunPayoff {
    pub fn params(&self) -> &BankRunParams {
        &self.params
    }

    /// Reward for stopping at `t_k` with asset value `b` and mass `prior`
    /// already withdrawn.
    #[inline]
    pub fn reward(&self, t: f64, b: f64, prior: f64) -> f64 {
        let p = &self.params;
        (p.spread() * t).exp() * p.d0.min((p.liquidation.value(b) - prior).max(0.0))
    }
}

impl Payoff for BankRunPayoff {
    fn evaluate(&self, lat: &LatticeModel, b: PathId, _w: PathId, m: &GridMeasure, k: usize) -> f64 {
        let prior = if self.params.closed_interval { m.cdf(k) } else { m.before(k) };
        self.reward(lat.time(k), lat.b_value(b, k), prior)
    }

    fn measure_mode(&self) -> MeasureMode {
        if self.params.closed_interval {
            MeasureMode::General
        } else {
            MeasureMode::CdfAtT
        }
    }

    fn path_mode(&self) -> PathMode {
        PathMode::SpotAtT
    }

    fn bound(&self, lat: &LatticeModel) -> f64 {
        (self.params.spread().max(0.0) * lat.horizon()).exp() * self.params.d0
    }

    fn is_causal(&self, _lat: &LatticeModel) -> bool {
        // reads m[0, t_k] at most
        true
    }

    fn name(&self) -> String {
        "bankrun".into()
    }
}

pub fn bankrun_payoff(p: &BankRunParams) -> Result<PayoffSpec> {
    p.validate()?;
    Ok(Arc::new(BankRunPayoff { params: *p }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeConfig};

    fn params() -> BankRunParams {
        BankRunParams::new(0.1, 0.025, Liquidation::Linear { slope: 0.5, intercept: 0.0 })
    }

    #[test]
    fn full_claim_with_no_prior_runners() {
        let lat = build_lattice(&LatticeConfig::new(3, 1.0, 3.0, 1.0, 1.0)).unwrap();
        let f = bankrun_payoff(&params()).unwrap();
        let m = GridMeasure::dirac(4, 3);
        // L(3) = 1.5 ≥ D0
        assert_eq!(f.evaluate(&lat, 0, 0, &m, 0), 1.0);
        // half-open: the atom at T itself is not counted at T
        let up = 0b111;
        let expected = (0.075f64 * 3.0).exp() * 1.0;
        assert!((f.evaluate(&lat, up, 0, &m, 3) - expected).abs() < 1e-15);
    }

    #[test]
    fn exhausted_liquidation_pays_nothing() {
        let lat = build_lattice(&LatticeConfig::new(2, 1.0, 3.0, 1.0, 1.0)).unwrap();
        let f = bankrun_payoff(&params()).unwrap();
        // path down, down: B_2 = 1, L = 0.5; all others already ran at t_0
        let m = GridMeasure::dirac(3, 0);
        assert_eq!(f.evaluate(&lat, 0b00, 0, &m, 2), 0.0);
    }

    #[test]
    fn interior_branch() {
        let lat = build_lattice(&LatticeConfig::new(2, 0.5, 3.0, 1.0, 1.0)).unwrap();
        let p = BankRunParams::new(0.1, 0.025, Liquidation::Linear { slope: 0.5, intercept: -0.5 });
        let f = bankrun_payoff(&p).unwrap();
        // up move: B_1 = 4, L = 1.5; everyone else ran at t_0 so L - m[0, t_1) = D0 / 2
        let m = GridMeasure::dirac(3, 0);
        let got = f.evaluate(&lat, 0b1, 0, &m, 1);
        assert!((got - (0.075f64 * 0.5).exp() * 0.5).abs() < 1e-15);
    }

    #[test]
    fn fewer_prior_runners_never_hurt() {
        let lat = build_lattice(&LatticeConfig::new(3, 1.0, 2.0, 1.0, 1.0)).unwrap();
        let f = bankrun_payoff(&params()).unwrap();
        for k in 0..=3 {
            for b in 0..8 {
                let mut prev = f64::INFINITY;
                for before in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
                    let v = f.evaluate(&lat, b, 0, &GridMeasure::with_mass_before(4, k, before), k);
                    assert!(v <= prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn closed_interval_counts_the_atom() {
        let lat = build_lattice(&LatticeConfig::new(2, 1.0, 3.0, 1.0, 1.0)).unwrap();
        let mut p = params();
        p.closed_interval = true;
        let f = bankrun_payoff(&p).unwrap();
        assert_eq!(f.measure_mode(), MeasureMode::General);
        // everyone at t_0: L(3) - 1 = 0.5
        assert_eq!(f.evaluate(&lat, 0, 0, &GridMeasure::dirac(3, 0), 0), 0.5);
    }

    #[test]
    fn rejects_inverted_rates() {
        let p = BankRunParams::new(0.01, 0.02, Liquidation::Sqrt { scale: 1.0 });
        assert!(bankrun_payoff(&p).is_err());
    }
}
