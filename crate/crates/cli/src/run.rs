//! Task dispatch and result records.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use timing_core::mfe::{default_max_iter, IterationRun};
use timing_core::payoff::checks::{
    check_increasing_differences, check_increasing_differences_exhaustive, check_submartingale,
    sample_ordered_measures, IdReport, EXHAUSTIVE_RULE_CAP,
};
use timing_core::rule::canonical_rule_count;
use timing_core::seed::stream;
use timing_core::{
    convergence_experiment, estimate_epsilon, public_info_equilibrium, solve_mfe, verify_mfe, AdaptedMeasure,
    EquilibriumResult, InfoTree, LatticeModel, Method, StoppingRule,
};

use crate::config::{Extreme, ExperimentConfig, MethodName, TaskSection};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_secs: f64,
    pub result: TaskResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskResult {
    SolveMfe(SolveSummary),
    Check(CheckSummary),
    EpsNash(EpsNashSummary),
    Converge(ConvergeSummary),
    BankrunDemo(DemoSummary),
}

/// A stopping rule by its induced law and its canonical decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub expected_time: f64,
    pub time_distribution: Vec<f64>,
    /// Canonical STOP flags in node order, packed 8 per byte, low bit first.
    pub decisions_hex: String,
}

impl RuleRecord {
    pub fn new(rule: &StoppingRule, lat: &LatticeModel) -> Self {
        let bytes: Vec<u8> = rule
            .decisions()
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &s)| acc | ((s as u8) << i)))
            .collect();
        RuleRecord {
            expected_time: rule.expected_time(lat),
            time_distribution: rule.time_distribution(lat),
            decisions_hex: bytes.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub expected_time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged: bool,
    pub iterations: usize,
    pub monotonicity_violation: Option<usize>,
    pub cycle_length: Option<usize>,
    pub trace: Vec<TraceRow>,
}

impl RunSummary {
    fn new(run: &IterationRun, lat: &LatticeModel) -> Self {
        RunSummary {
            converged: run.converged,
            iterations: run.iterations,
            monotonicity_violation: run.monotonicity_violation,
            cycle_length: run.cycle_length,
            trace: run
                .trace
                .iter()
                .enumerate()
                .map(|(i, t)| TraceRow {
                    iteration: i,
                    expected_time: t.rule.expected_time(lat),
                    value: t.value,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub node_count: usize,
    pub max_iter: usize,
    pub converged: bool,
    pub tight: bool,
    pub bracket_ok: bool,
    pub bracket_width: f64,
    pub value_max: f64,
    pub value_min: f64,
    pub tau_star: RuleRecord,
    pub theta_star: RuleRecord,
    pub tau_star_gap: f64,
    pub theta_star_gap: f64,
    pub top: RunSummary,
    pub bottom: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub lhs: f64,
    pub rhs: f64,
    /// `μ[0, t_k]` per `B` path.
    pub mu_cdf: Vec<Vec<f64>>,
    pub mu_tilde_cdf: Vec<Vec<f64>>,
    pub tau: RuleRecord,
    pub tau_tilde: RuleRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdSummary {
    pub exhaustive: bool,
    pub passed: bool,
    pub trials_run: usize,
    pub violation: Option<ViolationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub k: usize,
    pub b_prefix: u32,
    pub w_prefix: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmartingaleSummary {
    pub pairs: usize,
    pub passed_pairs: usize,
    pub passed: bool,
    pub worst_gap: f64,
    pub worst_node: Option<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub payoff: String,
    pub increasing_differences: IdSummary,
    pub submartingale: SubmartingaleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub n: usize,
    pub eq_value: f64,
    pub best_dev_value: f64,
    pub epsilon: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsNashSummary {
    pub rule: Extreme,
    pub method: MethodName,
    pub mfe_converged: bool,
    pub payoff_bound: f64,
    pub rows: Vec<EpsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub n: usize,
    pub mean_kolmogorov_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeSummary {
    pub rule: Extreme,
    pub samples: usize,
    pub mfe_converged: bool,
    pub rows: Vec<ConvergeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    pub hitting_rule: RuleRecord,
    /// `E[e^{(r̄-r)τ̂}]·D₀` by enumeration of the `B` paths.
    pub full_recovery_value: f64,
    pub tau_star_is_hitting: bool,
    pub theta_star_is_hitting: bool,
    pub value_max: f64,
    pub value_min: f64,
    pub bracket_width: f64,
    pub converged: bool,
    pub theta_star: RuleRecord,
}

/// Runs the configured task. The config must carry a task.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord, CliError> {
    config.validate()?;
    let start = Instant::now();
    let result = execute(config)?;
    Ok(RunRecord {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        result,
    })
}

fn execute(config: &ExperimentConfig) -> Result<TaskResult, CliError> {
    let lat = config.lattice_model()?;
    let tree = config.info_tree(&lat);
    let f = config.payoff_spec()?;
    let f = f.as_ref();
    let solve = |max_iter: Option<usize>| solve_mfe(f, &tree, &lat, max_iter.unwrap_or_else(|| default_max_iter(&tree)));
    let pick = |eq: &EquilibriumResult, which: Extreme| match which {
        Extreme::Max => eq.tau_star.clone(),
        Extreme::Min => eq.theta_star.clone(),
    };

    Ok(match config.task()? {
        TaskSection::SolveMfe { max_iter } => {
            let budget = max_iter.unwrap_or_else(|| default_max_iter(&tree));
            let eq = solve(Some(budget))?;
            TaskResult::SolveMfe(SolveSummary {
                node_count: tree.node_count(),
                max_iter: budget,
                converged: eq.converged,
                tight: eq.is_tight(),
                bracket_ok: eq.bracket_ok,
                bracket_width: eq.bracket_width,
                value_max: eq.value_max,
                value_min: eq.value_min,
                tau_star: RuleRecord::new(&eq.tau_star, &lat),
                theta_star: RuleRecord::new(&eq.theta_star, &lat),
                tau_star_gap: verify_mfe(f, &eq.tau_star, &tree, &lat).gap,
                theta_star_gap: verify_mfe(f, &eq.theta_star, &tree, &lat).gap,
                top: RunSummary::new(&eq.top, &lat),
                bottom: RunSummary::new(&eq.bottom, &lat),
            })
        }
        TaskSection::Check { trials } => TaskResult::Check(run_check(config, &lat, *trials)?),
        TaskSection::EpsNash { n_list, method, samples, rule } => {
            let eq = solve(None)?;
            let mfe_rule = pick(&eq, *rule);
            let m = match method {
                MethodName::Exact => Method::Exact,
                MethodName::MonteCarlo => Method::MonteCarlo { samples: *samples, seed: config.seed },
            };
            let rows = n_list
                .iter()
                .map(|&n| {
                    let r = estimate_epsilon(f, &mfe_rule, n, &lat, m)?;
                    Ok(EpsRow {
                        n,
                        eq_value: r.eq_value,
                        best_dev_value: r.best_dev_value,
                        epsilon: r.epsilon,
                        stderr: r.stderr,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            TaskResult::EpsNash(EpsNashSummary {
                rule: *rule,
                method: *method,
                mfe_converged: eq.converged,
                payoff_bound: f.bound(&lat),
                rows,
            })
        }
        TaskSection::Converge { n_list, samples, rule } => {
            let eq = solve(None)?;
            let rows = convergence_experiment(&pick(&eq, *rule), n_list, *samples, config.seed, &lat)?
                .into_iter()
                .map(|r| ConvergeRow { n: r.n, mean_kolmogorov_distance: r.mean_kolmogorov_distance })
                .collect();
            TaskResult::Converge(ConvergeSummary {
                rule: *rule,
                samples: *samples,
                mfe_converged: eq.converged,
                rows,
            })
        }
        TaskSection::BankrunDemo => {
            let p = config.bankrun_params().expect("validated");
            let hit = public_info_equilibrium(&p, &lat)?;
            let eq = solve(None)?;
            let paths = lat.num_paths() as u32;
            let full_recovery_value = (0..paths)
                .map(|b| (p.spread() * hit.stop_time(&lat, b, 0)).exp() * p.d0)
                .sum::<f64>()
                / paths as f64;
            TaskResult::BankrunDemo(DemoSummary {
                hitting_rule: RuleRecord::new(&hit, &lat),
                full_recovery_value,
                tau_star_is_hitting: eq.tau_star == hit,
                theta_star_is_hitting: eq.theta_star == hit,
                value_max: eq.value_max,
                value_min: eq.value_min,
                bracket_width: eq.bracket_width,
                converged: eq.converged,
                theta_star: RuleRecord::new(&eq.theta_star, &lat),
            })
        }
    })
}

fn cdf_rows(mu: &AdaptedMeasure) -> Vec<Vec<f64>> {
    mu.rows().iter().map(|r| r.cdf_values().to_vec()).collect()
}

fn id_summary(report: IdReport, exhaustive: bool, lat: &LatticeModel) -> IdSummary {
    IdSummary {
        exhaustive,
        passed: report.passed,
        trials_run: report.trials_run,
        violation: report.violation.map(|v| ViolationRecord {
            lhs: v.lhs,
            rhs: v.rhs,
            mu_cdf: cdf_rows(&v.mu),
            mu_tilde_cdf: cdf_rows(&v.mu_tilde),
            tau: RuleRecord::new(&v.tau, lat),
            tau_tilde: RuleRecord::new(&v.tau_tilde, lat),
        }),
    }
}

/// Increasing differences (exhaustive when the rule space is small enough)
/// and the submartingale check on `trials` sampled ordered pairs.
fn run_check(config: &ExperimentConfig, lat: &LatticeModel, trials: usize) -> Result<CheckSummary, CliError> {
    let f = config.payoff_spec()?;
    let f = f.as_ref();
    let full = InfoTree::full(lat);
    let exhaustive = canonical_rule_count(&full) <= EXHAUSTIVE_RULE_CAP;
    let id = if exhaustive {
        check_increasing_differences_exhaustive(f, lat, &full)?
    } else {
        check_increasing_differences(f, lat, trials, config.seed)
    };

    let mut rng = stream(config.seed, &[1]);
    let mut sub = SubmartingaleSummary {
        pairs: trials,
        passed_pairs: 0,
        passed: true,
        worst_gap: 0.0,
        worst_node: None,
    };
    for _ in 0..trials {
        let (mu, mu_tilde) = sample_ordered_measures(&full, lat, &mut rng);
        let rep = check_submartingale(f, &mu, &mu_tilde, lat)?;
        sub.passed_pairs += rep.passed as usize;
        if rep.worst_gap < sub.worst_gap {
            sub.worst_gap = rep.worst_gap;
            sub.worst_node = rep.node.map(|n| NodeRecord { k: n.k, b_prefix: n.b_prefix, w_prefix: n.w_prefix });
        }
    }
    sub.passed = sub.passed_pairs == trials;

    Ok(CheckSummary {
        payoff: f.name(),
        increasing_differences: id_summary(id, exhaustive, lat),
        submartingale: sub,
    })
}
