use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use streamal::dataio::{generate_synthetic, write_dataset};
use streamal::harness::{
    emit_reports, ensure_writable, recompute_reports, run_experiment, DatasetSource, ExperimentConfig, HarnessError,
};

/// Stream-based graph active learning benchmark.
#[derive(Debug, Parser)]
#[command(name = "streamal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a full experiment and write every report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// overrides `experiment.output_dir`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic dataset described by a config as CSV files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and check a config without touching data files.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rebuild derived reports in a result directory from daily.csv.
    Report {
        #[arg(long)]
        result: PathBuf,
    },
}

fn run(config_path: &Path, out: Option<PathBuf>) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let Some(out) = out {
        config.experiment.output_dir = out;
    }
    config.validate()?;
    let dir = config.experiment.output_dir.clone();
    ensure_writable(&dir)?;
    let dataset = config.load_dataset()?;
    log::info!(
        "dataset {}: {} nodes, {} days",
        dataset.name,
        dataset.node_count(),
        dataset.day_count()
    );
    let result = run_experiment(&config, &dataset)?;
    emit_reports(&result, &dataset.graph, &dir)?;
    if !result.audit.violations.is_empty() {
        return Err(HarnessError::Report(format!(
            "{} holdout isolation violations, first: {}",
            result.audit.violations.len(),
            result.audit.violations[0]
        )));
    }
    if !result.failures.is_empty() {
        log::warn!("{} units failed; see {}", result.failures.len(), dir.display());
    }
    println!("wrote results to {}", dir.display());
    Ok(())
}

fn synth(config_path: &Path, out: &Path) -> Result<(), HarnessError> {
    let config = ExperimentConfig::from_path(config_path)?;
    if config.dataset.source != DatasetSource::Synthetic {
        return Err(HarnessError::Config(
            "synth needs dataset.source = \"synthetic\"".into(),
        ));
    }
    let dataset = generate_synthetic::<f64>(&config.dataset.synthetic, config.dataset.seed)?;
    write_dataset(&dataset, out)?;
    println!(
        "wrote {} nodes over {} days to {}",
        dataset.node_count(),
        dataset.day_count(),
        out.display()
    );
    Ok(())
}

fn validate(config_path: &Path) -> Result<(), HarnessError> {
    ExperimentConfig::from_path(config_path)?.validate()?;
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Synth { config, out } => synth(&config, &out),
        Command::Validate { config } => validate(&config),
        Command::Report { result } => {
            recompute_reports(&result).map(|()| println!("rebuilt reports in {}", result.display()))
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), e.single_line());
            ExitCode::FAILURE
        }
    }
}
