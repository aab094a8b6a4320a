use std::path::PathBuf;
use std::process::ExitCode;

use agsp_cli::{execute, CliError, Options, TableKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "agsp", version, about = "Run AGSP and entanglement-spread experiments from a TOML config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shared {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 1 if any checked bound is violated.
    #[arg(long)]
    strict: bool,
    /// log2 of the largest dense state vector.
    #[arg(long)]
    cap_qubits: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Every table requested by the config.
    Run(Shared),
    Spectrum(Shared),
    Spread(Shared),
    AgspCheby(Shared),
    AgspQpe(Shared),
    ProtocolRun(Shared),
    Compress(Shared),
    VerifyBounds(Shared),
    Scaling(Shared),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (shared, table) = match cli.command {
        Command::Run(s) => (s, None),
        Command::Spectrum(s) => (s, Some(TableKind::Spectrum)),
        Command::Spread(s) => (s, Some(TableKind::Spread)),
        Command::AgspCheby(s) => (s, Some(TableKind::Chebyshev)),
        Command::AgspQpe(s) => (s, Some(TableKind::Qpe)),
        Command::ProtocolRun(s) => (s, Some(TableKind::Protocol)),
        Command::Compress(s) => (s, Some(TableKind::Compress)),
        Command::VerifyBounds(s) => (s, Some(TableKind::VerifyBounds)),
        Command::Scaling(s) => (s, Some(TableKind::Scaling)),
    };
    let opts = Options {
        config: shared.config,
        out: shared.out,
        seed: shared.seed,
        strict: shared.strict,
        cap_qubits: shared.cap_qubits,
        tables: table.map(|t| vec![t]),
    };
    match execute(&opts) {
        Ok(report) => {
            for m in &report.messages {
                println!("{m}");
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("agsp: {e}");
            if let CliError::Strict(_) = e {
                eprintln!("agsp: outputs were written; see verify rows with satisfied=false");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
