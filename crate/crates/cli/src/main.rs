use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rpod_cli::{bounds_table, inspect, run_experiment, ExperimentConfig};

/// Model reduction harness: balanced and randomized POD pipelines over
/// PDE benchmarks and user-supplied systems.
#[derive(Parser)]
#[command(name = "rpod", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides RPOD_OUT and the config value).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the configured rpod seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Print the sampling-bound table as CSV.
    Bounds {
        /// Assumed ranks.
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        l: Vec<usize>,
        /// Mode-presence fractions in (0, 1].
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        eps: Vec<f64>,
        /// Failure budgets in (0, 1).
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        beta: Vec<f64>,
        /// Repeated-draw count for the combined failure column.
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Print the manifest (and eigenvalues, for modal ROMs) of an artifact
    /// directory.
    Inspect { rom_dir: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed_override,
        } => ExperimentConfig::load(&config).and_then(|cfg| {
            run_experiment(&cfg, out.as_deref(), seed_override).map(|outcome| {
                println!("artifacts written to {}", outcome.out_dir.display());
            })
        }),
        Command::Bounds { l, eps, beta, k } => bounds_table(&l, &eps, &beta, k).map(|csv| {
            print!("{csv}");
        }),
        Command::Inspect { rom_dir } => inspect(&rom_dir).map(|text| {
            print!("{text}");
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
