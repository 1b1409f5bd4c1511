use std::sync::Arc;

use super::{MeasureMode, PathMode, Payoff, PayoffSpec};
use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, PathId};
use crate::measure::GridMeasure;

/// Named choices for `f(x, y, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FPreset {
    /// `f = y`.
    Y,
    /// `f = tanh(x) + y`.
    TanhXPlusY,
    /// `f = y - |x| / (1 + |x|)`.
    NegAbsXPlusY,
}

impl FPreset {
    #[inline]
    pub fn value(&self, x: f64, y: f64, _t: f64) -> f64 {
        match self {
            FPreset::Y => y,
            FPreset::TanhXPlusY => x.tanh() + y,
            FPreset::NegAbsXPlusY => y - x.abs() / (1.0 + x.abs()),
        }
    }

    /// Bound on `|f|` when `|y| ≤ ymax`.
    fn bound(&self, ymax: f64) -> f64 {
        match self {
            FPreset::Y => ymax,
            FPreset::TanhXPlusY | FPreset::NegAbsXPlusY => 1.0 + ymax,
        }
    }
}

/// Named kernels `φ(u)`, `u ∈ [-T, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiPreset {
    Zero,
    /// `slope * u`.
    Linear { slope: f64 },
    /// `slope * u⁺`.
    PositivePart { slope: f64 },
    /// `-slope * u⁺`.
    NegativePositivePart { slope: f64 },
    /// `(u⁺)²`.
    PositivePartSquared,
}

impl PhiPreset {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            PhiPreset::Zero => 0.0,
            PhiPreset::Linear { slope } => slope * u,
            PhiPreset::PositivePart { slope } => slope * u.max(0.0),
            PhiPreset::NegativePositivePart { slope } => -slope * u.max(0.0),
            PhiPreset::PositivePartSquared => u.max(0.0).powi(2),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            PhiPreset::Linear { slope }
            | PhiPreset::PositivePart { slope }
            | PhiPreset::NegativePositivePart { slope } => slope.is_finite(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionPayoffParams {
    pub f: FPreset,
    pub phi: PhiPreset,
}

/// `F = f(B_t, (φ*m)(t), t)` with `(φ*m)(t) = Σ_j φ(t - t_j) m({t_j})`.
#[derive(Debug, Clone)]
pub struct DiffusionPayoff {
    params: DiffusionPayoffParams,
}

impl DiffusionPayoff {
    /// `(φ*m)(t_k)`.
    pub fn convolution(&self, lat: &LatticeModel, m: &GridMeasure, k: usize) -> f64 {
        let t = lat.time(k);
        (0..m.len())
            .filter(|&j| m.mass(j) != 0.0)
            .map(|j| self.params.phi.value(t - lat.time(j)) * m.mass(j))
            .sum()
    }
}

impl Payoff for DiffusionPayoff {
    fn evaluate(&self, lat: &LatticeModel, b: PathId, _w: PathId, m: &GridMeasure, k: usize) -> f64 {
        let y = self.convolution(lat, m, k);
        self.params.f.value(lat.b_value(b, k), y, lat.time(k))
    }

    fn measure_mode(&self) -> MeasureMode {
        MeasureMode::Convolution
    }

    fn path_mode(&self) -> PathMode {
        PathMode::SpotAtT
    }

    fn bound(&self, lat: &LatticeModel) -> f64 {
        let steps = lat.steps() as i64;
        let ymax = (-steps..=steps)
            .map(|i| self.params.phi.value(i as f64 * lat.dt()).abs())
            .fold(0.0, f64::max);
        self.params.f.bound(ymax).max(f64::MIN_POSITIVE)
    }

    /// Causal iff the kernel vanishes on negative offsets, so that future
    /// atoms never enter `(φ*m)(t_k)`.
    fn is_causal(&self, lat: &LatticeModel) -> bool {
        (1..=lat.steps()).all(|j| self.params.phi.value(-(j as f64) * lat.dt()) == 0.0)
    }

    fn name(&self) -> String {
        "diffusion".into()
    }
}

pub fn diffusion_payoff(p: &DiffusionPayoffParams) -> Result<PayoffSpec> {
    if !p.phi.is_finite() {
        return Err(Error::InvalidParams("kernel slope must be finite".into()));
    }
    Ok(Arc::new(DiffusionPayoff { params: *p }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeConfig};

    fn lat() -> LatticeModel {
        build_lattice(&LatticeConfig::new(3, 0.5, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn zero_kernel_ignores_measure() {
        let lat = lat();
        let f = diffusion_payoff(&DiffusionPayoffParams { f: FPreset::TanhXPlusY, phi: PhiPreset::Zero }).unwrap();
        for k in 0..=3 {
            let a = f.evaluate(&lat, 0b101, 0, &GridMeasure::dirac(4, 0), k);
            let b = f.evaluate(&lat, 0b101, 0, &GridMeasure::dirac(4, 3), k);
            assert_eq!(a, b);
            assert_eq!(a, lat.b_value(0b101, k).tanh());
        }
    }

    #[test]
    fn sifting_a_point_mass() {
        let lat = lat();
        let p = DiffusionPayoffParams { f: FPreset::Y, phi: PhiPreset::PositivePartSquared };
        let f = diffusion_payoff(&p).unwrap();
        for s in 0..=3 {
            for k in 0..=3 {
                let got = f.evaluate(&lat, 0, 0, &GridMeasure::dirac(4, s), k);
                assert_eq!(got, p.phi.value(lat.time(k) - lat.time(s)));
            }
        }
    }

    #[test]
    fn positive_part_kernel_on_uniform_pair() {
        let lat = lat();
        let f = diffusion_payoff(&DiffusionPayoffParams { f: FPreset::Y, phi: PhiPreset::PositivePart { slope: 1.0 } }).unwrap();
        let m = GridMeasure::from_masses(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let dt = lat.dt();
        let direct = 0.5 * (2.0 * dt) + 0.5 * dt;
        assert!((f.evaluate(&lat, 0, 0, &m, 2) - direct).abs() < 1e-15);
    }

    #[test]
    fn causality_follows_the_kernel_support() {
        let lat = lat();
        let causal = DiffusionPayoffParams { f: FPreset::Y, phi: PhiPreset::PositivePart { slope: 2.0 } };
        let acausal = DiffusionPayoffParams { f: FPreset::Y, phi: PhiPreset::Linear { slope: 1.0 } };
        assert!(diffusion_payoff(&causal).unwrap().is_causal(&lat));
        assert!(!diffusion_payoff(&acausal).unwrap().is_causal(&lat));
    }

    #[test]
    fn bound_dominates_values() {
        let lat = lat();
        for phi in [PhiPreset::Linear { slope: -1.5 }, PhiPreset::PositivePartSquared, PhiPreset::NegativePositivePart { slope: 1.0 }] {
            let f = diffusion_payoff(&DiffusionPayoffParams { f: FPreset::NegAbsXPlusY, phi }).unwrap();
            let bound = f.bound(&lat);
            for s in 0..=3 {
                for k in 0..=3 {
                    for b in 0..8 {
                        assert!(f.evaluate(&lat, b, 0, &GridMeasure::dirac(4, s), k).abs() <= bound);
                    }
                }
            }
        }
    }
}
