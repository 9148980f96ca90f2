use clap::{Parser, Subcommand, ValueEnum};
use genskel_core::harness::{
    check_acceptance_floor, run_experiment, Experiment, ExperimentConfig, HarnessError,
    OutputFormat,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulation experiments on genealogical skeletons of critical branching
/// random walks.
#[derive(Parser, Debug)]
#[command(name = "genskel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML file overriding the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Also write SVG plots of each statistic.
    #[arg(long, global = true)]
    plot: bool,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Survival probabilities and moments of generation sizes.
    Survival,
    /// Pair counts by MRCA generation and the rescaled aggregate.
    PairMrca,
    /// Lifetime tail of a uniform vertex of a conditioned tree.
    Lifetime,
    /// Projection distances to nested skeletons.
    SkeletonDensity,
    /// Pair statistics near the branching boundary.
    BranchBoundary,
    /// Shape frequencies of K sampled vertices.
    Shapes,
    /// Exact enumeration of small lattice trees.
    EnumerateLattice,
    /// Randomized exact identity checks.
    GstCheck,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Survival => Experiment::Survival,
            Command::PairMrca => Experiment::PairMrca,
            Command::Lifetime => Experiment::Lifetime,
            Command::SkeletonDensity => Experiment::SkeletonDensity,
            Command::BranchBoundary => Experiment::BranchBoundary,
            Command::Shapes => Experiment::Shapes,
            Command::EnumerateLattice => Experiment::EnumerateLattice,
            Command::GstCheck => Experiment::GstCheck,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Format {
    Json,
    Csv,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let experiment = Experiment::from(cli.command);
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::from_toml(experiment, &text)?;
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.replicas {
        cfg.replicas = v;
    }
    if let Some(v) = cli.threads {
        cfg.threads = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    cfg.plot |= cli.plot;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let output = run_experiment(&cfg)?;
    let dir = PathBuf::from(&cfg.out);
    output.record.write_to(&dir)?;
    for (name, text) in &output.artifacts {
        std::fs::write(dir.join(name), text)
            .map_err(|e| HarnessError::Io(format!("{name}: {e}")))?;
    }
    for c in &output.record.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let m = &output.record.metadata;
    println!(
        "wall clock {:.2}s, content hash {}",
        m.wall_clock_seconds, output.record.content_hash
    );
    if let Some(rate) = m.acceptance_rate {
        println!(
            "acceptance rate {rate:.4e} ({} of {} attempts)",
            m.accepted, m.attempts
        );
    }
    println!("wrote {}", dir.display());
    check_acceptance_floor(&output.record)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genskel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
