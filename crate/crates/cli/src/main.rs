use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spacefill::GroundMetric;
use spacefill_cli::{cmd_oracle, cmd_run, cmd_w1, CliError, CliResult, OracleKind};

/// Space-filling designs on model output manifolds.
#[derive(Parser)]
#[command(name = "spacefill", version)]
struct Cli {
    /// Worker threads; defaults to one per core. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler described by a JSON config file or manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw exact samples from a benchmark manifold.
    Oracle {
        /// torus_uniform, torus_inverse_squared or expo.
        #[arg(long)]
        model: String,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the W1 distance between the final images of two CSV files.
    W1 {
        file_a: PathBuf,
        file_b: PathBuf,
        /// euclidean or l1.
        #[arg(long, default_value = "euclidean")]
        metric: String,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run { config, out, seed } => {
            let manifest = cmd_run(&config, &out, seed)?;
            if let Some(n) = manifest.unconverged.filter(|&n| n > 0) {
                eprintln!("warning: {n} evaluations did not reach a steady state");
            }
        }
        Command::Oracle {
            model,
            count,
            seed,
            out,
        } => {
            cmd_oracle(model.parse::<OracleKind>()?, count, seed, &out)?;
        }
        Command::W1 {
            file_a,
            file_b,
            metric,
        } => {
            let metric: GroundMetric = metric.parse()?;
            println!("{}", cmd_w1(&file_a, &file_b, metric)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spacefill: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
