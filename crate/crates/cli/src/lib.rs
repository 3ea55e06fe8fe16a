//! Experiment runner for sound-zone isolation studies.
//!
//! Reads a JSON experiment description, sweeps isolation metrics over
//! frequency or scans spatial IPI maps, and writes CSV/JSON results.

// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod runner;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, ResolvedConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "psz", version, about = "Personal sound zone isolation experiments")]
pub struct Cli {
    /// Override the RNG seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "PSZ_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Isolation spectra for every mode, listener case and design source.
    Spectra { config: PathBuf },
    /// Spatial IPI maps, contours and enclosed areas.
    Map { config: PathBuf },
    /// Check a config and print the resolved settings.
    Validate { config: PathBuf },
    /// Print a config populated with the default experiment.
    Template,
}

fn load(cli: &Cli, path: &Path) -> Result<ResolvedConfig, config::ConfigError> {
    let mut cfg = ResolvedConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg = cfg.with_output_dir(out.clone());
    }
    Ok(cfg)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: worker count must be at least 1");
            return EXIT_CONFIG;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    let (path, spectra) = match &cli.command {
        Command::Template => {
            print!("{}", ExperimentConfig::template_json());
            return EXIT_OK;
        }
        Command::Validate { config } => match load(&cli, config) {
            Ok(cfg) => {
                print!("{}", output::json_pretty(&cfg.summary()));
                return EXIT_OK;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        },
        Command::Spectra { config } => (config, true),
        Command::Map { config } => (config, false),
    };
    let cfg = match load(&cli, path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if !spectra && cfg.map.is_none() {
        eprintln!("error: {}: `maps`: section is required for the map command", path.display());
        return EXIT_CONFIG;
    }
    let result = if spectra { runner::run_spectra(&cfg) } else { runner::run_map(&cfg) };
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
