use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use navicontrol_cli::{CliError, ExperimentConfig, Pipeline, Stage};

#[derive(Parser)]
#[command(name = "navicontrol", version, about = "Boundary null-control pipeline for linearized compressible flow")]
struct Cli {
    /// JSON experiment configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run a single stage by name instead of a subcommand.
    #[arg(long, global = true)]
    stage: Option<String>,
    /// Allow horizons T <= 1.
    #[arg(long, global = true)]
    override_time_check: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Eigenvalues, window counts and asymptotic fits.
    Spectrum,
    /// Closed-form eigenfunctions and their defects.
    Eigenfunctions,
    /// Quadratic closeness and Gram bounds.
    RieszCheck,
    /// Observation, moment targets and control synthesis.
    Control,
    /// Finite-difference and modal runs plus identity checks.
    Simulate,
    /// All stages; nonzero exit on any failed check.
    Verify,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::Spectrum => Stage::Spectrum,
            Command::Eigenfunctions => Stage::Eigenfunctions,
            Command::RieszCheck => Stage::RieszCheck,
            Command::Control => Stage::Control,
            Command::Simulate => Stage::Simulate,
            Command::Verify => Stage::Verify,
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Ok(v) = std::env::var("NAVICONTROL_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("NAVICONTROL_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Usage("NAVICONTROL_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let stage = match (&cli.stage, cli.command) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --stage or a subcommand, not both".into())),
        (Some(name), None) => Stage::parse(name).ok_or_else(|| CliError::Usage(format!("unknown stage {name:?}")))?,
        (None, Some(c)) => c.stage(),
        (None, None) => Stage::Verify,
    };
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    let mut pipeline = Pipeline::new(cfg, cli.override_time_check)?;
    pipeline.run(stage)?;
    if stage != Stage::Verify {
        pipeline.write_report()?;
    }
    for st in &pipeline.report.stages {
        for w in &st.warnings {
            eprintln!("warning [{}]: {w}", st.name);
        }
    }
    print!("{}", pipeline.report.summary());
    println!("artifacts in {}", pipeline.out_dir().display());
    Ok(pipeline.report.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
