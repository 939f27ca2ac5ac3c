use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hho_stokes_cli::{parse_config, run, CliError, CommandKind, Overrides};

/// Hybrid high-order solver for generalized Stokes flows.
#[derive(Parser)]
#[command(name = "hho-stokes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the trigonometric benchmark on one mesh.
    Solve(Overrides),
    /// Run the benchmark on a sequence of refined meshes.
    Convergence(Overrides),
    /// Check the power-framed inequalities of the flow law.
    CheckLaw(Overrides),
    /// Print mesh counts and regularity diagnostics.
    MeshInfo(Overrides),
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (kind, flags) = match cli.command {
        Command::Solve(f) => (CommandKind::Solve, f),
        Command::Convergence(f) => (CommandKind::Convergence, f),
        Command::CheckLaw(f) => (CommandKind::CheckLaw, f),
        Command::MeshInfo(f) => (CommandKind::MeshInfo, f),
    };
    let config = parse_config(kind, &flags)?;
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let outcome = run(&config)?;
    print!("{}", outcome.stdout);
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
