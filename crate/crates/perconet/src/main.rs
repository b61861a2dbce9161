use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use perconet::config::{self, EnvOverrides};
use perconet::error::RunError;
use perconet::experiments::Subcommand;

#[derive(Parser)]
#[command(name = "perconet", version, about = "Connection times of random waypoint networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one value, e.g. `--set fleet.R=2.5`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; defaults to `runtime.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Percolation probability tables, one per box size.
    ThetaTable(RunArgs),
    /// Critical intensity bracket from box-size crossings.
    LambdaCr(RunArgs),
    /// Stationary position density of the random waypoint model.
    RwpDensity(RunArgs),
    /// Connection-time fractions of a tagged pair in N-walker fleets.
    ConnectTime(RunArgs),
    /// Finite-N connection times against the deterministic limits.
    LimitCompare(RunArgs),
    /// Long-run ratio against the Monte Carlo ergodic constant.
    Ergodic(RunArgs),
    /// Empirical lower-deviation rates of the connection time.
    Deviations(RunArgs),
    /// Variational large-deviation bound on the reduced arrival chain.
    ChiBound(RunArgs),
    /// Re-run a manifest and verify output checksums.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), RunError> {
    let (cmd, args) = match cli.command {
        Command::Replay { manifest, out } => {
            let m = perconet::replay(&manifest, out.as_deref())?;
            println!("replay ok: {} outputs match", m.outputs.len());
            return Ok(());
        }
        Command::ThetaTable(a) => (Subcommand::ThetaTable, a),
        Command::LambdaCr(a) => (Subcommand::LambdaCr, a),
        Command::RwpDensity(a) => (Subcommand::RwpDensity, a),
        Command::ConnectTime(a) => (Subcommand::ConnectTime, a),
        Command::LimitCompare(a) => (Subcommand::LimitCompare, a),
        Command::Ergodic(a) => (Subcommand::Ergodic, a),
        Command::Deviations(a) => (Subcommand::Deviations, a),
        Command::ChiBound(a) => (Subcommand::ChiBound, a),
    };
    let cfg = config::load(args.config.as_deref(), &EnvOverrides::from_env(), &args.set)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from(&cfg.runtime.output_dir));
    let m = perconet::execute(cmd, &cfg, &out, None)?;
    for name in m.outputs.keys() {
        println!("{}", out.join(name).display());
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
