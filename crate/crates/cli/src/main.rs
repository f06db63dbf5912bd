use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dhym_cli::commands::{self, Overrides};
use dhym_cli::CliError;

#[derive(Parser)]
#[command(name = "dhym", version, about = "Geodesics, distances and curvature on the space of almost calibrated potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML with [background], [endpoints], ... sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Comma-separated decreasing epsilon list replacing the schedule.
    #[arg(long, global = true)]
    epsilon: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Topological angle, lifted phase and hypercritical flag.
    Phase,
    /// Membership of the endpoint `phi` and its pointwise margin map.
    Member,
    /// Solve one epsilon-geodesic between `phi0` and `phi1`.
    Geodesic,
    /// Extrapolated distance between `phi0` and `phi1`.
    Distance,
    /// Sectional curvature over random 2-planes.
    Curvature,
    /// Comparison-triangle slacks for the endpoints `p`, `q`, `r`.
    Cat0,
    /// The J functional along a path file, or a loop-closure test.
    Jfun,
    /// The full acceptance suite.
    Suite,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let ov = Overrides { out: cli.out, seed: cli.seed, epsilon: cli.epsilon };
    if let Command::Suite = cli.command {
        return commands::suite(cli.config.as_deref(), &ov);
    }
    let path = cli.config.ok_or_else(|| CliError::Config("--config <path> is required for this subcommand".into()))?;
    let (cfg, out) = commands::prepare(&path, &ov)?;
    match cli.command {
        Command::Phase => commands::phase(&cfg, &out),
        Command::Member => commands::member(&cfg, &out),
        Command::Geodesic => commands::geodesic(&cfg, &out),
        Command::Distance => commands::distance(&cfg, &out),
        Command::Curvature => commands::curvature(&cfg, &out),
        Command::Cat0 => commands::cat0(&cfg, &out),
        Command::Jfun => commands::jfun(&cfg, &out),
        Command::Suite => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dhym: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
