use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{cmd_probe, cmd_recover, cmd_run, ProbeArgs, RecoverArgs, RunArgs};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nllr", version, about = "Structured estimation from nonlinear observations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trajectory.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Fill the elapsed_ms column (output is then not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Recover a tensor from simulated measurements, starting at a given guess.
    Recover {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long, default_value = "abs")]
        link: String,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long)]
        m: usize,
        /// Tucker rank as r1,r2,r3.
        #[arg(long, value_delimiter = ',', required = true)]
        rank: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        iters: usize,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Reconstruction tensor file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample gradient residuals around a random Tucker truth.
    Probe {
        #[arg(long)]
        config: PathBuf,
        /// CSV file of (dist, residual) pairs.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out, seed, timing } => {
            let res = cmd_run(&RunArgs { config, out, seed, timing })?;
            for p in &res.result.points {
                if p.failures > 0 {
                    eprintln!("sweep value {}: {} of {} trials failed", p.sweep_value, p.failures, p.trials);
                }
            }
            println!("wrote {} and {}", res.trajectory_path.display(), res.summary_path.display());
        }
        Command::Recover { truth, init, link, sigma, m, rank, iters, step, normalize, seed, out } => {
            let rank: [usize; 3] = rank
                .try_into()
                .map_err(|r: Vec<usize>| CliError::Config(format!("--rank: expected 3 values, got {}", r.len())))?;
            let metrics =
                cmd_recover(&RecoverArgs { truth, init, link, sigma, m, rank, iters, step, normalize, seed, out })?;
            println!("{}", metrics.line());
        }
        Command::Probe { config, out, seed } => {
            let pairs = cmd_probe(&ProbeArgs { config, out: out.clone(), seed })?;
            println!("wrote {} probe points to {}", pairs.len(), out.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("nllr: {e}");
            e.exit_code()
        }
    }
}
