use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvcompile_cli::{execute, load_config, preset_names, CliError, CommandKind, Overrides};

#[derive(Parser)]
#[command(name = "cvcompile", version, about = "Continuous-variable compiling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an ansatz against a target unitary.
    Compile(RunArgs),
    /// Monte Carlo risk grids for learning phase-space maps.
    Nfl(RunArgs),
    /// Gradient tables and perturbation scans of compiling costs.
    Landscape(RunArgs),
    /// Closed-form identity checks.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (see --list-presets).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Report costs estimated from this many measurement shots alongside the exact ones.
    #[arg(long)]
    shots: Option<u64>,
    /// Fock cutoff override.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Run even when the state size exceeds 2^24 amplitudes.
    #[arg(long)]
    allow_large: bool,
    /// Print preset names and exit.
    #[arg(long)]
    list_presets: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Compile(a) => (CommandKind::Compile, a),
        Command::Nfl(a) => (CommandKind::Nfl, a),
        Command::Landscape(a) => (CommandKind::Landscape, a),
        Command::Verify(a) => (CommandKind::Verify, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(kind: CommandKind, args: RunArgs) -> Result<(), CliError> {
    if args.list_presets {
        for name in preset_names() {
            println!("{name}");
        }
        return Ok(());
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure threads: {e}")))?;
    }
    let overrides = Overrides { seed: args.seed, cutoff: args.cutoff, shots: args.shots, out: args.out };
    let config = load_config(kind, args.config.as_deref(), args.preset.as_deref(), &overrides)?;
    execute(&config, args.allow_large)?;
    Ok(())
}
