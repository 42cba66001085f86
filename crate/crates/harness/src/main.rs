use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use d3rqn::envsim::StartSet;
use d3rqn_harness::{cmd_eval, cmd_report, cmd_train, load_config, HResult};

#[derive(Parser)]
#[command(name = "d3rqn", version, about = "Recurrent deep Q-learning on a synthetic road")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; `APP_*` environment variables override config keys.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy evaluation of a checkpoint from every start point.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        mode: StartSet,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// Play uniformly random actions instead (baseline).
        #[arg(long)]
        random: bool,
        /// Output directory (default: next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG figures and histogram tables from run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> HResult<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let summary = cmd_train(&cfg)?;
            println!(
                "trained {} steps over {} episodes ({} updates); final checkpoint {}",
                summary.steps,
                summary.episodes,
                summary.updates,
                summary.final_checkpoint.display()
            );
        }
        Command::Eval { checkpoint, mode, trials, random, out } => {
            let result = cmd_eval(&checkpoint, mode, trials, random, out.as_deref())?;
            print!("{}", result.report.table());
            println!("\nwrote {} and {}", result.csv.display(), result.summary_csv.display());
        }
        Command::Report { runs, out } => {
            let files = cmd_report(&runs, &out)?;
            for f in files.figures.iter().chain(files.histogram_csv.iter()) {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
