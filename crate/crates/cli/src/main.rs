use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridstate_cli::commands::{self, SimulateArgs};
use gridstate_cli::CliError;

/// Synchronous steady states of multi-machine power systems.
#[derive(Debug, Parser)]
#[command(name = "gridstate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve, recover and certify the steady state of a system file.
    SteadyState {
        file: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Polarization override `k=+1` or `k=-1` for machine k (1-based).
        #[arg(long, allow_hyphen_values = true)]
        sigma: Vec<String>,
    },
    /// Integrate from a steady-state result and write the trajectory CSV.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        dt: f64,
        #[arg(long = "t-end")]
        t_end: f64,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Scale every bus voltage by (1 + p) before integrating.
        #[arg(long = "perturb-v", allow_hyphen_values = true)]
        perturb_v: Option<f64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the drift summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Check a trajectory CSV sample by sample.
    Verify {
        file: PathBuf,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Take the inputs from this result instead of the first sample.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Run the numeric identity suite on randomized states.
    Identities {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SteadyState { file, out, sigma } => commands::cmd_steady_state(&file, out.as_deref(), &sigma).map(drop),
        Command::Simulate {
            file,
            from,
            dt,
            t_end,
            record_every,
            perturb_v,
            out,
            summary,
        } => commands::cmd_simulate(&SimulateArgs {
            file: &file,
            from: &from,
            dt,
            t_end,
            record_every,
            perturb_v,
            out: out.as_deref(),
            summary: summary.as_deref(),
        })
        .map(drop),
        Command::Verify { file, traj, tol, from } => commands::cmd_verify(&file, &traj, tol, from.as_deref()).map(drop),
        Command::Identities { file, seed } => commands::cmd_identities(&file, seed).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRIDSTATE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
