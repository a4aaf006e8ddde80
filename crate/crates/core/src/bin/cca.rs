use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cca::cli::{load_config_file, run, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "cca", version, about = "Contextual camouflage search")]
struct Cli {
    /// JSON config file or a previous run's manifest.json; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn a pattern that lowers detection scores of surrounding vehicles.
    Attack(Overrides),
    /// Learn a pattern that raises them.
    Enhance(Overrides),
    /// Evaluate a pattern given with --ours.
    Eval(Overrides),
    /// Compare basic colors and random patterns (and --ours).
    Baselines(Overrides),
    /// Write the transformation grid and synthetic world as JSON.
    Export(Overrides),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::Attack(o) => (Command::Attack, o),
        Cmd::Enhance(o) => (Command::Enhance, o),
        Cmd::Eval(o) => (Command::Eval, o),
        Cmd::Baselines(o) => (Command::Baselines, o),
        Cmd::Export(o) => (Command::Export, o),
    };
    let result = cli
        .config
        .as_deref()
        .map(load_config_file)
        .transpose()
        .map(|file| file.unwrap_or_default().merged_with(flags))
        .and_then(|o| RunConfig::resolve(command, o))
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "status": "error", "kind": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
