use std::path::{Path, PathBuf};
use std::process::ExitCode;

use causalbox::switchdemo::SwitchConfig;
use causalbox_cli::commands::{self, DistanceArgs, Report};
use causalbox_cli::doc::{self, NetworkDoc};
use causalbox_cli::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "causalbox", version, about = "Validate, compose and compare causal boxes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Also write the report (or the composed document) to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every box of a network document, and the composite when there is more than one.
    Validate { path: PathBuf },
    /// Compose the boxes of a network document into one box.
    Compose { path: PathBuf },
    /// Lower-bound the distinguishing advantage between two systems.
    Distance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Built-in demonstrations.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// The quantum switch on control `alpha|0> + beta|1>` and target `phi`.
    Qswitch {
        #[arg(long, default_value = "0.7071067811865476")]
        alpha: String,
        #[arg(long, default_value = "0.7071067811865476")]
        beta: String,
        #[arg(long, default_value = "X")]
        u: String,
        #[arg(long, default_value = "Z")]
        v: String,
        #[arg(long, default_value = "[[1, 0], [0, 0]]")]
        phi: String,
        /// Include the state after every position.
        #[arg(long)]
        trace: bool,
    },
}

fn read_doc(path: &Path) -> Result<NetworkDoc, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    doc::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Validate { path } => commands::validate(&read_doc(path)?),
        Command::Compose { path } => commands::compose(&read_doc(path)?),
        Command::Distance { a, b, seed, budget, grid } => {
            commands::distance(&read_doc(a)?, &read_doc(b)?, &DistanceArgs { seed: *seed, budget: *budget, grid: *grid })
        }
        Command::Demo { which: Demo::Qswitch { alpha, beta, u, v, phi, trace } } => {
            let cfg = SwitchConfig {
                u: commands::parse_gate(u)?,
                v: commands::parse_gate(v)?,
                alpha: commands::parse_complex(alpha)?,
                beta: commands::parse_complex(beta)?,
                phi: commands::parse_qubit(phi)?,
            };
            commands::qswitch(&cfg, *trace)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report.json).expect("reports serialize");
            println!("{text}");
            eprintln!("{}", report.summary);
            if let Some(path) = &cli.out {
                let body = report.artifact.as_deref().unwrap_or(&text);
                if let Err(e) = std::fs::write(path, body) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            if report.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
