use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sardlab::experiment::{error_exit_code, run, Experiment, ExperimentConfig, RunOutcome};
use sardlab::Result;

/// Sard-property experiments on Carnot groups and polynomial maps.
#[derive(Parser)]
#[command(name = "sardlab", version, about)]
struct Cli {
    /// JSON configuration file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print only the summary line.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical values and widths of the Kupka polynomial map.
    KupkaVerify(ExperimentConfig),
    /// Block norms, truncation gaps and the ε-pipeline of a series map.
    SeriesMap(ExperimentConfig),
    /// Symbolic Endpoint map of a group and basis, checked against RK4.
    EndpointPoly(ExperimentConfig),
    /// Almost-critical scan of a polynomial map.
    CritScan(ExperimentConfig),
    /// ε-entropy dimension of a point cloud.
    EntropyDim(ExperimentConfig),
    /// Vitushkin variations of a point cloud or of almost-critical images.
    Variations(ExperimentConfig),
    /// Kolmogorov n-widths of an ellipsoid, grid or analytic control ball.
    Width(ExperimentConfig),
    /// Surjectivity certificate and target reaching.
    Surjectivity(ExperimentConfig),
    /// Run the experiment named by the configuration file's "experiment" field.
    Run(ExperimentConfig),
}

fn resolve(cli: &Cli) -> Result<(Experiment, ExperimentConfig)> {
    let (named, flags) = match &cli.command {
        Command::KupkaVerify(c) => (Some(Experiment::KupkaVerify), c),
        Command::SeriesMap(c) => (Some(Experiment::SeriesMap), c),
        Command::EndpointPoly(c) => (Some(Experiment::EndpointPoly), c),
        Command::CritScan(c) => (Some(Experiment::CritScan), c),
        Command::EntropyDim(c) => (Some(Experiment::EntropyDim), c),
        Command::Variations(c) => (Some(Experiment::Variations), c),
        Command::Width(c) => (Some(Experiment::Width), c),
        Command::Surjectivity(c) => (Some(Experiment::Surjectivity), c),
        Command::Run(c) => (None, c),
    };
    let base = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = base.overlay(flags)?;
    let experiment = match (named, &cfg.experiment) {
        (Some(e), _) => e,
        (None, Some(name)) => Experiment::parse(name)?,
        (None, None) => {
            return Err(sardlab::Error::InvalidArgument("`run` needs a config file with an \"experiment\" field".into()))
        }
    };
    cfg.experiment = Some(experiment.name().to_string());
    Ok((experiment, cfg))
}

fn report(outcome: &RunOutcome, quiet: bool) {
    if !quiet {
        for c in &outcome.checks {
            println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
        }
    }
    let failed = outcome.checks.iter().filter(|c| !c.passed).count();
    println!(
        "{}: {} checks, {} failed; artifacts in {}",
        outcome.experiment.name(),
        outcome.checks.len(),
        failed,
        outcome.out_dir.display()
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are configuration errors; 2 is reserved for failed checks
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve(&cli).and_then(|(experiment, cfg)| {
        if let Some(t) = cfg.threads {
            // only fails when a pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
        run(experiment, &cfg)
    });
    match result {
        Ok(outcome) => {
            report(&outcome, cli.quiet);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
