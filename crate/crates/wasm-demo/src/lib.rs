//! Browser bindings for the bank-run equilibrium. Every entry point takes and
//! returns a JSON string.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use timing_core::mfe::default_max_iter;
use timing_core::payoff::{bankrun_payoff, BankRunParams, Liquidation};
use timing_core::{
    build_lattice, convergence_experiment, estimate_epsilon, public_info_equilibrium, solve_mfe, EquilibriumResult,
    InfoKind, InfoTree, LatticeConfig, LatticeModel, Method, PayoffSpec,
};

/// Keeps the page responsive: joint enumeration is `4^K`.
const MAX_STEPS: usize = 8;

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct BankRunInput {
    pub steps: usize,
    pub dt: f64,
    pub rbar: f64,
    pub r: f64,
    pub slope: f64,
    /// Signal noise; 0 is public information.
    pub sigma: f64,
    pub n_list: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for BankRunInput {
    fn default() -> Self {
        BankRunInput {
            steps: 8,
            dt: 0.4,
            rbar: 0.1,
            r: 0.025,
            slope: 0.5,
            sigma: 0.0,
            n_list: vec![2, 4, 8, 16, 32],
            samples: 500,
            seed: 42,
        }
    }
}

struct Setup {
    lat: LatticeModel,
    tree: InfoTree,
    params: BankRunParams,
    f: PayoffSpec,
}

impl BankRunInput {
    fn setup(&self) -> Result<Setup, String> {
        if self.steps == 0 || self.steps > MAX_STEPS {
            return Err(format!("steps must be in 1..={MAX_STEPS}"));
        }
        let lat = build_lattice(&LatticeConfig::new(self.steps, self.dt, 3.0, 1.0, 1.0)).map_err(|e| e.to_string())?;
        let kind = if self.sigma > 0.0 { InfoKind::SignalX { sigma: self.sigma } } else { InfoKind::PublicB };
        let tree = InfoTree::new(kind, &lat);
        let params = BankRunParams::new(self.rbar, self.r, Liquidation::Linear { slope: self.slope, intercept: 0.0 });
        let f = bankrun_payoff(&params).map_err(|e| e.to_string())?;
        Ok(Setup { lat, tree, params, f })
    }
}

impl Setup {
    fn solve(&self) -> Result<EquilibriumResult, String> {
        solve_mfe(self.f.as_ref(), &self.tree, &self.lat, default_max_iter(&self.tree)).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub times: Vec<f64>,
    pub tau_star: Vec<f64>,
    pub theta_star: Vec<f64>,
    /// Law of the hitting rule; present on public information only.
    pub hitting: Option<Vec<f64>>,
    pub value_max: f64,
    pub value_min: f64,
    pub bracket_width: f64,
    pub converged: bool,
    pub top_values: Vec<f64>,
    pub bottom_values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct EpsilonOutput {
    pub n: Vec<usize>,
    pub tau_star: Vec<f64>,
    pub theta_star: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ConvergenceOutput {
    pub n: Vec<usize>,
    pub distance: Vec<f64>,
}

fn parse(input: &str) -> Result<BankRunInput, String> {
    if input.trim().is_empty() {
        return Ok(BankRunInput::default());
    }
    serde_json::from_str(input).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn solve_json(input: &str) -> Result<String, String> {
    let s = parse(input)?.setup()?;
    let eq = s.solve()?;
    let hitting = match s.tree.kind() {
        InfoKind::PublicB => Some(
            public_info_equilibrium(&s.params, &s.lat)
                .map_err(|e| e.to_string())?
                .time_distribution(&s.lat),
        ),
        _ => None,
    };
    to_json(&SolveOutput {
        times: s.lat.times(),
        tau_star: eq.tau_star.time_distribution(&s.lat),
        theta_star: eq.theta_star.time_distribution(&s.lat),
        hitting,
        value_max: eq.value_max,
        value_min: eq.value_min,
        bracket_width: eq.bracket_width,
        converged: eq.converged,
        top_values: eq.top.trace.iter().map(|t| t.value).collect(),
        bottom_values: eq.bottom.trace.iter().map(|t| t.value).collect(),
    })
}

pub fn epsilon_json(input: &str) -> Result<String, String> {
    let input = parse(input)?;
    let s = input.setup()?;
    let eq = s.solve()?;
    let eps = |rule| -> Result<Vec<f64>, String> {
        input
            .n_list
            .iter()
            .map(|&n| {
                estimate_epsilon(s.f.as_ref(), rule, n.max(1), &s.lat, Method::Exact)
                    .map(|r| r.epsilon)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    to_json(&EpsilonOutput {
        n: input.n_list.clone(),
        tau_star: eps(&eq.tau_star)?,
        theta_star: eps(&eq.theta_star)?,
    })
}

pub fn convergence_json(input: &str) -> Result<String, String> {
    let input = parse(input)?;
    let s = input.setup()?;
    let eq = s.solve()?;
    let rows = convergence_experiment(&eq.tau_star, &input.n_list, input.samples.max(1), input.seed, &s.lat)
        .map_err(|e| e.to_string())?;
    to_json(&ConvergenceOutput {
        n: rows.iter().map(|r| r.n).collect(),
        distance: rows.iter().map(|r| r.mean_kolmogorov_distance).collect(),
    })
}

/// Both equilibria, their stopping-time laws and the iteration traces.
#[wasm_bindgen]
pub fn solve(input: &str) -> Result<String, JsValue> {
    solve_json(input).map_err(|e| JsValue::from_str(&e))
}

/// Exact ε-Nash gaps of the distributed profiles built from `τ*` and `θ*`.
#[wasm_bindgen]
pub fn epsilon(input: &str) -> Result<String, JsValue> {
    epsilon_json(input).map_err(|e| JsValue::from_str(&e))
}

/// Mean Kolmogorov distance between `μ̄^n` and the conditional law of `τ*`.
#[wasm_bindgen]
pub fn convergence(input: &str) -> Result<String, JsValue> {
    convergence_json(input).map_err(|e| JsValue::from_str(&e))
}
