//! Experiment configuration: a single JSON document.
//!
//! Every field has a default, so `{}` describes the public-information bank
//! run on a 10-step lattice.

use serde::{Deserialize, Serialize};
use timing_core::lattice::DEFAULT_MAX_STEPS;
use timing_core::payoff::{
    bankrun_payoff, constant_payoff, cdf_before_payoff, diffusion_payoff, nutz_payoff, BankRunParams,
    DiffusionPayoffParams, FPreset, Liquidation, NutzParams, PhiPreset,
};
use timing_core::{build_lattice, InfoKind, InfoTree, LatticeConfig, LatticeModel, PayoffSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub lattice: LatticeSection,
    pub payoff: PayoffSection,
    pub info: InfoSection,
    /// Read `m[0, t]` instead of `m[0, t)` in the bank-run payoff.
    pub closed_interval: bool,
    pub task: Option<TaskSection>,
    pub seed: u64,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lattice: LatticeSection::default(),
            payoff: PayoffSection::default(),
            info: InfoSection::PublicB,
            closed_interval: false,
            task: None,
            seed: 42,
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub steps: usize,
    pub dt: f64,
    pub b0: f64,
    pub db: f64,
    pub dw: f64,
    pub max_steps: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            steps: 10,
            dt: 0.4,
            b0: 3.0,
            db: 1.0,
            dw: 1.0,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSection {
    Bankrun {
        #[serde(default = "default_rbar")]
        rbar: f64,
        #[serde(default = "default_r")]
        r: f64,
        #[serde(default)]
        liquidation: LiquidationPreset,
        #[serde(default = "one")]
        d0: f64,
    },
    Nutz {
        r: f64,
        c: f64,
    },
    Diffusion {
        f: FName,
        phi: PhiSection,
    },
    Constant {
        value: f64,
    },
    /// `F(m, t) = m[0, t)`.
    CdfBefore,
}

fn default_rbar() -> f64 {
    0.1
}

fn default_r() -> f64 {
    0.025
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl Default for PayoffSection {
    fn default() -> Self {
        PayoffSection::Bankrun {
            rbar: default_rbar(),
            r: default_r(),
            liquidation: LiquidationPreset::default(),
            d0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum LiquidationPreset {
    /// `max(0, slope * x + intercept)`.
    Linear {
        #[serde(default = "half")]
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    Sqrt {
        scale: f64,
    },
}

impl Default for LiquidationPreset {
    fn default() -> Self {
        LiquidationPreset::Linear { slope: 0.5, intercept: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FName {
    Y,
    TanhXPlusY,
    NegAbsXPlusY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSection {
    Zero,
    Linear { slope: f64 },
    PositivePart { slope: f64 },
    NegativePositivePart { slope: f64 },
    PositivePartSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfoSection {
    PublicB,
    FullBw,
    SignalX { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSection {
    SolveMfe {
        #[serde(default)]
        max_iter: Option<usize>,
    },
    Check {
        #[serde(default = "default_trials")]
        trials: usize,
    },
    EpsNash {
        #[serde(default = "default_n_list")]
        n_list: Vec<usize>,
        #[serde(default)]
        method: MethodName,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        rule: Extreme,
    },
    Converge {
        #[serde(default = "default_converge_n")]
        n_list: Vec<usize>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        rule: Extreme,
    },
    BankrunDemo,
}

fn default_trials() -> usize {
    100
}

fn default_n_list() -> Vec<usize> {
    vec![2, 4, 8, 16, 32]
}

fn default_converge_n() -> Vec<usize> {
    vec![4, 16, 64, 256]
}

fn default_samples() -> usize {
    2000
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Exact,
    MonteCarlo,
}

/// Which end of the equilibrium bracket a task uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extreme {
    #[default]
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { path: None, format: Format::Json }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl TaskSection {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSection::SolveMfe { .. } => "solve-mfe",
            TaskSection::Check { .. } => "check",
            TaskSection::EpsNash { .. } => "eps-nash",
            TaskSection::Converge { .. } => "converge",
            TaskSection::BankrunDemo => "bankrun-demo",
        }
    }

    /// The task with every parameter at its default.
    pub fn default_for(name: &str) -> Option<TaskSection> {
        Some(match name {
            "solve-mfe" => TaskSection::SolveMfe { max_iter: None },
            "check" => TaskSection::Check { trials: default_trials() },
            "eps-nash" => TaskSection::EpsNash {
                n_list: default_n_list(),
                method: MethodName::Exact,
                samples: default_samples(),
                rule: Extreme::Max,
            },
            "converge" => TaskSection::Converge {
                n_list: default_converge_n(),
                samples: default_samples(),
                rule: Extreme::Max,
            },
            "bankrun-demo" => TaskSection::BankrunDemo,
            _ => return None,
        })
    }
}

fn invalid(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Validation { field: field.into(), message: msg.into() }
}

fn check_n_list(field: &str, n_list: &[usize]) -> Result<(), CliError> {
    if n_list.is_empty() {
        return Err(invalid(field, "must be nonempty"));
    }
    if n_list.contains(&0) {
        return Err(invalid(field, "player counts must be at least 1"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(field, "must be strictly ascending"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid("config", e.to_string()))
    }

    pub fn task(&self) -> Result<&TaskSection, CliError> {
        self.task.as_ref().ok_or_else(|| invalid("task", "no task given"))
    }

    /// Checks every field before anything is computed.
    pub fn validate(&self) -> Result<(), CliError> {
        let l = &self.lattice;
        if l.steps == 0 {
            return Err(invalid("lattice.steps", "must be at least 1"));
        }
        if l.steps > l.max_steps {
            return Err(invalid("lattice.steps", format!("lattice too large: {} > cap {}", l.steps, l.max_steps)));
        }
        for (name, v) in [("lattice.dt", l.dt), ("lattice.db", l.db), ("lattice.dw", l.dw)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !l.b0.is_finite() {
            return Err(invalid("lattice.b0", "must be finite"));
        }
        if let InfoSection::SignalX { sigma } = self.info {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(invalid("info.sigma", "must be nonnegative"));
            }
        }
        self.payoff_spec().map_err(|e| match e {
            CliError::Core(inner) => invalid("payoff", inner.to_string()),
            other => other,
        })?;
        if self.closed_interval && !matches!(self.payoff, PayoffSection::Bankrun { .. }) {
            return Err(invalid("closed_interval", "only the bankrun payoff reads m[0, t]"));
        }
        match self.task()? {
            TaskSection::SolveMfe { max_iter: Some(0) } => return Err(invalid("task.max_iter", "must be at least 1")),
            TaskSection::Check { trials: 0 } => return Err(invalid("task.trials", "must be at least 1")),
            TaskSection::EpsNash { n_list, method, samples, .. } => {
                check_n_list("task.n_list", n_list)?;
                if *method == MethodName::MonteCarlo && *samples == 0 {
                    return Err(invalid("task.samples", "must be at least 1"));
                }
            }
            TaskSection::Converge { n_list, samples, .. } => {
                check_n_list("task.n_list", n_list)?;
                if *samples == 0 {
                    return Err(invalid("task.samples", "must be at least 1"));
                }
            }
            TaskSection::BankrunDemo => {
                if !matches!(self.payoff, PayoffSection::Bankrun { .. }) {
                    return Err(invalid("payoff", "bankrun-demo needs the bankrun payoff"));
                }
                if self.info != InfoSection::PublicB {
                    return Err(invalid("info", "bankrun-demo runs on public information"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn lattice_model(&self) -> Result<LatticeModel, CliError> {
        let l = &self.lattice;
        let cfg = LatticeConfig::new(l.steps, l.dt, l.b0, l.db, l.dw).with_max_steps(l.max_steps);
        Ok(build_lattice(&cfg)?)
    }

    pub fn info_tree(&self, lat: &LatticeModel) -> InfoTree {
        let kind = match self.info {
            InfoSection::PublicB => InfoKind::PublicB,
            InfoSection::FullBw => InfoKind::FullBW,
            InfoSection::SignalX { sigma } => InfoKind::SignalX { sigma },
        };
        InfoTree::new(kind, lat)
    }

    pub fn bankrun_params(&self) -> Option<BankRunParams> {
        match &self.payoff {
            PayoffSection::Bankrun { rbar, r, liquidation, d0 } => {
                let liquidation = match *liquidation {
                    LiquidationPreset::Linear { slope, intercept } => Liquidation::Linear { slope, intercept },
                    LiquidationPreset::Sqrt { scale } => Liquidation::Sqrt { scale },
                };
                let mut p = BankRunParams::new(*rbar, *r, liquidation);
                p.d0 = *d0;
                p.closed_interval = self.closed_interval;
                Some(p)
            }
            _ => None,
        }
    }

    pub fn payoff_spec(&self) -> Result<PayoffSpec, CliError> {
        if let Some(p) = self.bankrun_params() {
            return Ok(bankrun_payoff(&p)?);
        }
        Ok(match &self.payoff {
            PayoffSection::Nutz { r, c } => nutz_payoff(&NutzParams { r: *r, c: *c })?,
            PayoffSection::Diffusion { f, phi } => {
                let f = match f {
                    FName::Y => FPreset::Y,
                    FName::TanhXPlusY => FPreset::TanhXPlusY,
                    FName::NegAbsXPlusY => FPreset::NegAbsXPlusY,
                };
                let phi = match *phi {
                    PhiSection::Zero => PhiPreset::Zero,
                    PhiSection::Linear { slope } => PhiPreset::Linear { slope },
                    PhiSection::PositivePart { slope } => PhiPreset::PositivePart { slope },
                    PhiSection::NegativePositivePart { slope } => PhiPreset::NegativePositivePart { slope },
                    PhiSection::PositivePartSquared => PhiPreset::PositivePartSquared,
                };
                diffusion_payoff(&DiffusionPayoffParams { f, phi })?
            }
            PayoffSection::Constant { value } => {
                if !value.is_finite() {
                    return Err(invalid("payoff.value", "must be finite"));
                }
                constant_payoff(*value)
            }
            PayoffSection::CdfBefore => cdf_before_payoff(),
            PayoffSection::Bankrun { .. } => unreachable!("handled above"),
        })
    }
}
