use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semiclassical_cli::{run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(
    version,
    about = "Semiclassical moment dynamics for the dissipative atom laser"
)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// `key = value` configuration file; all keys are optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Moment trajectory to `trajectory.csv`.
    Hesd,
    /// Leading-order wave function to `asymptotic.csv`.
    Asymptotic,
    /// Split-step reference solution to `direct.csv`.
    Direct,
    /// Asymptotic against direct solution over several ħ, to `convergence.csv`.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        hbar_list: Vec<f64>,
    },
    /// Density panels of the three reference parameter sets.
    Fig1,
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    let (command, hbars) = match args.command {
        Cmd::Hesd => (Command::Hesd, Vec::new()),
        Cmd::Asymptotic => (Command::Asymptotic, Vec::new()),
        Cmd::Direct => (Command::Direct, Vec::new()),
        Cmd::Compare { hbar_list } => (Command::Compare, hbar_list),
        Cmd::Fig1 => (Command::Fig1, Vec::new()),
    };
    let summary = run(command, &cfg, &hbars)?;
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    for n in &summary.notes {
        println!("{n}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
