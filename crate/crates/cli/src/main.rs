use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use optostore_cli::config::RunConfig;
use optostore_cli::{exit_code, presets_text, run, EXIT_CONFIG};

/// Optomechanical light-storage and OMIT simulator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads for parameter sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing output files.
        #[arg(long)]
        force: bool,
        /// Also write a gnuplot script for the CSV outputs.
        #[arg(long)]
        gnuplot: bool,
    },
    /// List device presets and scenarios.
    ListPresets,
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match cli.command {
        Command::ListPresets => {
            print!("{}", presets_text());
            Ok(())
        }
        Command::Validate { config } => RunConfig::from_path(&config)
            .and_then(|cfg| run::validate(&cfg))
            .map(|lines| {
                for l in lines {
                    println!("{l}");
                }
            }),
        Command::Run {
            config,
            out,
            force,
            gnuplot,
        } => RunConfig::from_path(&config)
            .and_then(|cfg| run::execute(&cfg, gnuplot))
            .and_then(|artifacts| artifacts.write_to(&out, force))
            .map(|paths| {
                for p in paths {
                    println!("wrote {}", p.display());
                }
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
