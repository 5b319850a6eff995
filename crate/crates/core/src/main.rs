use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tropical_ot::cli::{run_experiment, ExperimentConfig, ProblemKind, RunStatus};

/// Environment variable that overrides the configured output directory.
const OUTPUT_ENV: &str = "TROPOT_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "tropot", about = "Tropical Wasserstein distances on a 2-D grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run {
        config: PathBuf,
        /// Use the 128 x 128 grid instead of the configured one.
        #[arg(long)]
        full_scale: bool,
        /// Output directory; overrides TROPOT_OUTPUT_DIR and the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse a config and build its densities without solving.
    Validate { config: PathBuf },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Version => {
            println!("tropot {}", env!("CARGO_PKG_VERSION"));
            RunStatus::Converged
        }
        Command::Validate { config } => match ExperimentConfig::load(&config).and_then(|c| c.densities().map(|d| (c, d))) {
            Ok((c, (q0, q1))) => {
                println!(
                    "ok: {:?} on {}x{}, source mass {}, target mass {}",
                    c.kind,
                    c.grid.nx,
                    c.grid.ny,
                    q0.mass(),
                    q1.mass()
                );
                if c.kind == ProblemKind::W2
                    && !tropical_ot::w2::support_reachable(&q0, &q1, c.solver.time_slices).unwrap_or(true)
                {
                    println!("note: target support is not reachable in {} time slices; `run` will report infeasible", c.solver.time_slices);
                }
                RunStatus::Converged
            }
            Err(e) => {
                eprintln!("error: {e}");
                RunStatus::ConfigError
            }
        },
        Command::Run { config, full_scale, output_dir } => {
            let out = output_dir.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from));
            let result = ExperimentConfig::load(&config).and_then(|mut c| {
                if full_scale {
                    c.full_scale();
                }
                run_experiment(&c, out.as_deref())
            });
            match result {
                Ok(o) => {
                    println!("distance = {:.10e}", o.distance);
                    println!("iterations = {}", o.iterations);
                    println!("converged = {}", o.status == RunStatus::Converged);
                    println!("output = {}", o.output_dir.display());
                    if o.status != RunStatus::Converged {
                        eprintln!("warning: iteration limit reached before convergence");
                    }
                    o.status
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    RunStatus::of_error(&e)
                }
            }
        }
    };
    ExitCode::from(status.code() as u8)
}
