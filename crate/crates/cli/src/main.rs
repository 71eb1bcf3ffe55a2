use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mecsim_cli::{load_config, run_config_file, CliError};

#[derive(Parser)]
#[command(name = "mecsim", version, about = "Run caching, offloading and interference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<case>.csv` plus `manifest.json`.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "MECSIM_OUT_DIR", default_value = "results")]
        out: PathBuf,
    },
    /// Check a config and print it with all defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => match run_config_file(&config, seed, &out) {
            Ok(summary) => {
                println!("{}", summary.csv.display());
                println!("{}", summary.manifest.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Validate { config } => match load_config(&config, None) {
            Ok(c) => {
                print!("{}", c.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e.into()),
        },
    }
}
