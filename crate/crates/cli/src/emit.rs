//! Serialization of run records.

use crate::config::Format;
use crate::error::CliError;
use crate::run::{RunRecord, RunSummary, TaskResult};

fn ser(e: impl std::fmt::Display) -> CliError {
    CliError::Serialize(e.to_string())
}

pub fn emit(record: &RunRecord, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(record).map_err(ser)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => emit_csv(&record.result),
    }
}

/// The task payload alone; equal seeds give equal bytes.
pub fn result_json(record: &RunRecord) -> Result<Vec<u8>, CliError> {
    serde_json::to_vec(&record.result).map_err(ser)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn trace_rows(w: &mut csv::Writer<Vec<u8>>, direction: &str, run: &RunSummary) -> Result<(), CliError> {
    for row in &run.trace {
        w.write_record([
            direction.to_string(),
            row.iteration.to_string(),
            row.expected_time.to_string(),
            row.value.to_string(),
        ])
        .map_err(ser)?;
    }
    Ok(())
}

/// One flat table per task.
pub fn emit_csv(result: &TaskResult) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match result {
        TaskResult::SolveMfe(s) => {
            w.write_record(["direction", "iteration", "expected_time", "value"]).map_err(ser)?;
            trace_rows(&mut w, "top", &s.top)?;
            trace_rows(&mut w, "bottom", &s.bottom)?;
        }
        TaskResult::Check(c) => {
            w.write_record(["check", "passed", "trials", "lhs", "rhs", "worst_gap"]).map_err(ser)?;
            let id = &c.increasing_differences;
            let (lhs, rhs) = match &id.violation {
                Some(v) => (Some(v.lhs), Some(v.rhs)),
                None => (None, None),
            };
            w.write_record([
                "increasing_differences".to_string(),
                id.passed.to_string(),
                id.trials_run.to_string(),
                opt(lhs),
                opt(rhs),
                String::new(),
            ])
            .map_err(ser)?;
            let s = &c.submartingale;
            w.write_record([
                "submartingale".to_string(),
                s.passed.to_string(),
                s.pairs.to_string(),
                String::new(),
                String::new(),
                s.worst_gap.to_string(),
            ])
            .map_err(ser)?;
        }
        TaskResult::EpsNash(e) => {
            w.write_record(["n", "eq_value", "best_dev_value", "epsilon", "stderr"]).map_err(ser)?;
            for r in &e.rows {
                w.write_record([
                    r.n.to_string(),
                    r.eq_value.to_string(),
                    r.best_dev_value.to_string(),
                    r.epsilon.to_string(),
                    opt(r.stderr),
                ])
                .map_err(ser)?;
            }
        }
        TaskResult::Converge(c) => {
            w.write_record(["n", "mean_kolmogorov_distance"]).map_err(ser)?;
            for r in &c.rows {
                w.write_record([r.n.to_string(), r.mean_kolmogorov_distance.to_string()]).map_err(ser)?;
            }
        }
        TaskResult::BankrunDemo(d) => {
            w.write_record(["quantity", "value"]).map_err(ser)?;
            let rows = [
                ("full_recovery_value", d.full_recovery_value.to_string()),
                ("value_max", d.value_max.to_string()),
                ("value_min", d.value_min.to_string()),
                ("hitting_expected_time", d.hitting_rule.expected_time.to_string()),
                ("tau_star_is_hitting", d.tau_star_is_hitting.to_string()),
                ("theta_star_is_hitting", d.theta_star_is_hitting.to_string()),
                ("bracket_width", d.bracket_width.to_string()),
            ];
            for (k, v) in rows {
                w.write_record([k.to_string(), v]).map_err(ser)?;
            }
        }
    }
    w.into_inner().map_err(ser)
}
