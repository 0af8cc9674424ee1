//! `fefet-imc`: run one experiment and write its artifacts.
//!
//! Exit status is 0 on success, 1 when the run detected an invariant
//! violation and 2 for usage or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fefet_imc::config::{self, SimConfig};
use fefet_imc::experiments::{read_manifest, run_experiment, ExperimentId, Outcome};
use fefet_imc::Error;

/// Worker threads for Monte Carlo and dataset fan-out (defaults to all cores).
const WORKERS_ENV: &str = "FEFET_IMC_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "fefet-imc",
    version,
    about = "Behavioral FeFET in-memory-computing macro simulator"
)]
struct Args {
    /// Experiment id (fig3_example, fig5_example, fig6_hist, fig8_transfer,
    /// fig7_efficiency, fig9_accuracy, fig10_breakdown, oracle_equiv).
    #[arg(long, required_unless_present_any = ["validate_config", "manifest"])]
    experiment: Option<String>,

    /// TOML configuration file; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Seed for every random draw (overrides `macro.seed`).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// `section.key=value`, applied after the config file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print the resolved configuration and exit.
    #[arg(long)]
    validate_config: bool,

    /// Re-run the experiment recorded in a manifest.json.
    #[arg(long, conflicts_with_all = ["experiment", "config", "overrides"])]
    manifest: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn resolve_config(args: &Args) -> Result<SimConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            config::resolve(&path.display().to_string(), &text, &args.overrides)?
        }
        None => config::resolve("<defaults>", "", &args.overrides)?,
    };
    if let Some(seed) = args.seed {
        cfg.macro_.seed = seed;
    }
    Ok(cfg)
}

fn configure_workers() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Run(e.to_string()))
}

fn report(outcome: &Outcome, out: &std::path::Path) {
    println!(
        "{}: wrote {} artifacts to {}",
        outcome.experiment,
        outcome.artifacts.len() + 1,
        out.display()
    );
    for line in &outcome.summary {
        println!("  {line}");
    }
    for v in &outcome.violations {
        eprintln!("violation: {v}");
    }
}

fn run(args: Args) -> Result<bool, Failure> {
    configure_workers()?;
    let (id, cfg) = match &args.manifest {
        Some(path) => {
            let m = read_manifest(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let mut cfg = m.config;
            cfg.macro_.seed = args.seed.unwrap_or(m.seed);
            (Some(m.experiment), cfg)
        }
        None => {
            let id = args.experiment.as_deref().map(str::parse::<ExperimentId>).transpose()?;
            (id, resolve_config(&args)?)
        }
    };
    if args.validate_config {
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    let id = id.ok_or_else(|| Failure::Usage("--experiment is required".into()))?;
    let outcome = run_experiment(id, &cfg, &args.out)?;
    report(&outcome, &args.out);
    Ok(outcome.violations.is_empty())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
