use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use timing_cli::{emit, run, CliError, ExperimentConfig, Format, RunRecord, TaskResult, TaskSection};

#[derive(Parser)]
#[command(name = "mfg-timing", version, about = "Mean field games of timing on binomial lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximal and minimal equilibria by monotone iteration
    SolveMfe(Common),
    /// Increasing-differences and submartingale checks
    Check(Common),
    /// ε-Nash gaps of the distributed n-player profile
    EpsNash(Common),
    /// Empirical-law convergence experiment
    Converge(Common),
    /// Public-information bank run against the hitting rule
    BankrunDemo(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; omitted fields take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::SolveMfe(c) => ("solve-mfe", c),
            Command::Check(c) => ("check", c),
            Command::EpsNash(c) => ("eps-nash", c),
            Command::Converge(c) => ("converge", c),
            Command::BankrunDemo(c) => ("bankrun-demo", c),
        }
    }
}

fn load(name: &str, args: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    match &cfg.task {
        None => cfg.task = TaskSection::default_for(name),
        Some(t) if t.name() != name => {
            return Err(CliError::Validation {
                field: "task.name".into(),
                message: format!("config describes `{}` but `{name}` was requested", t.name()),
            })
        }
        Some(_) => {}
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.display().to_string());
    }
    if let Some(fmt) = &args.format {
        cfg.output.format = if fmt == "csv" { Format::Csv } else { Format::Json };
    }
    Ok(cfg)
}

fn summary(record: &RunRecord) -> String {
    match &record.result {
        TaskResult::SolveMfe(s) => format!(
            "converged={} tight={} E[tau*]={:.6} E[theta*]={:.6}",
            s.converged, s.tight, s.tau_star.expected_time, s.theta_star.expected_time
        ),
        TaskResult::Check(c) => format!(
            "increasing_differences passed={} submartingale passed={}/{}",
            c.increasing_differences.passed, c.submartingale.passed_pairs, c.submartingale.pairs
        ),
        TaskResult::EpsNash(e) => {
            let eps: Vec<String> = e.rows.iter().map(|r| format!("{}:{:.3e}", r.n, r.epsilon)).collect();
            format!("epsilon {}", eps.join(" "))
        }
        TaskResult::Converge(c) => {
            let d: Vec<String> = c.rows.iter().map(|r| format!("{}:{:.4}", r.n, r.mean_kolmogorov_distance)).collect();
            format!("distance {}", d.join(" "))
        }
        TaskResult::BankrunDemo(d) => format!(
            "tau*=hit {} theta*=hit {} full recovery {:.6}",
            d.tau_star_is_hitting, d.theta_star_is_hitting, d.full_recovery_value
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = cli.command.parts();
    if let Some(n) = args.threads {
        std::env::set_var("RAYON_NUM_THREADS", n.max(1).to_string());
    }
    let result = load(name, args).and_then(|cfg| {
        let record = run(&cfg)?;
        let bytes = emit(&record, cfg.output.format)?;
        match &cfg.output.path {
            Some(path) => std::fs::write(path, &bytes)?,
            None => {
                use std::io::Write;
                std::io::stdout().write_all(&bytes)?;
            }
        }
        Ok(record)
    });
    match result {
        Ok(record) => {
            eprintln!("{name}: {} ({:.2}s)", summary(&record), record.wall_time_secs);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
