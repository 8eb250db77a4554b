use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hlp_cli::config::ExperimentConfig;
use hlp_cli::run::{resolve_out_dir, run};
use hlp_cli::CliError;
use log::LevelFilter;

#[derive(Parser)]
#[command(name = "hlp", about = "Hybrid Lie-Poisson optimal control experiments", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write CSV, JSON and SVG artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Echoed into report.json; no mode is stochastic yet.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the version.
    Version,
}

fn init_logging() {
    let (level, unknown) = match std::env::var("HLP_LOG").as_deref() {
        Ok("quiet") => (LevelFilter::Off, None),
        Ok("debug") => (LevelFilter::Debug, None),
        Ok("info") | Err(_) => (LevelFilter::Info, None),
        Ok(other) => (LevelFilter::Info, Some(other.to_string())),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
    if let Some(v) = unknown {
        log::warn!("unknown HLP_LOG value {v:?}; using info");
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out, seed } => {
            let (cfg, _) = ExperimentConfig::load(&config)?;
            let out_dir = resolve_out_dir(&cfg, &config, out.as_deref());
            let summary = run(&cfg, &out_dir, seed)?;
            for f in &summary.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let (cfg, _) = ExperimentConfig::load(&config)?;
            println!("{}: ok (mode {})", config.display(), cfg.mode.name());
            Ok(())
        }
        Command::Version => {
            println!("hlp {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; help output is success
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
