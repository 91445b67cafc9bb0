use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use axiflow::io::{self, Axis};

/// Mean curvature flow of axially symmetric surfaces with Neumann ends.
#[derive(Parser)]
#[command(name = "axiflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration, run the monitors and classify the singularity.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `output.dir`, then `$AXIFLOW_OUTPUT_ROOT/<stem>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of parameter axes as independent runs.
    Sweep {
        config: PathBuf,
        /// `section.key=v1,v2,...`; repeatable.
        #[arg(long = "axis")]
        axes: Vec<Axis>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent runs (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-analyse the stored trajectory of a run directory.
    Analyze { dir: PathBuf },
    /// Emit plot-ready CSVs and a text summary for a complete run.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out } => match io::load_config(&config) {
            Ok(cfg) => {
                let dir = out.unwrap_or_else(|| io::resolve_output_dir(&cfg, &config));
                io::cmd_run(&cfg, &dir)
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                io::commands::exit_code(&e)
            }
        },
        Command::Sweep { config, axes, out, jobs } => match io::load_config(&config) {
            Ok(cfg) => {
                let dir = out.unwrap_or_else(|| io::resolve_output_dir(&cfg, &config));
                let jobs = jobs.unwrap_or_else(|| {
                    std::thread::available_parallelism().map_or(1, |n| n.get())
                });
                io::cmd_sweep(&cfg, &axes, &dir, jobs)
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                io::commands::exit_code(&e)
            }
        },
        Command::Analyze { dir } => io::cmd_analyze(&dir),
        Command::Report { dir } => io::cmd_report(&dir),
    };
    ExitCode::from(code)
}
