//! `ion-lattice`: configuration-driven front end writing CSV/JSON artifacts.

mod commands;
mod config;
mod error;
mod grid;
mod units;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "ion-lattice", version, about = "Ion Coulomb crystals in an optical lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.directory` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium positions.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Solve under the full-depth lattice instead of the bare trap.
        #[arg(long)]
        lattice: bool,
    },
    /// Mode spectrum continued with lattice depth.
    Modes {
        #[command(flatten)]
        common: Common,
        /// ν_latt grid, `start:stop:count:{lin|geom}` (bare numbers in MHz).
        #[arg(long)]
        grid: Option<String>,
    },
    /// Scattering statistics over lattice depth.
    Scatter {
        #[command(flatten)]
        common: Common,
        /// Depth grid, `start:stop:count:{lin|geom}` (bare numbers in mK).
        #[arg(long)]
        grid: Option<String>,
    },
    /// Crystal temperature from spot profiles.
    Thermometry {
        #[command(flatten)]
        common: Common,
        /// Spot profiles CSV with header `ion_index,axis,pixel,counts`.
        #[arg(long)]
        spots: PathBuf,
        /// Include radial spots in the estimate.
        #[arg(long)]
        radial: bool,
    },
    /// Excess micromotion of the ground-state crystal.
    Micromotion {
        #[command(flatten)]
        common: Common,
    },
}

fn prepare(common: &Common) -> Result<(config::Config, PathBuf), CliError> {
    let cfg = config::load(&common.config)?;
    let out = match (&common.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) if d.is_relative() => common.config.parent().unwrap_or(Path::new(".")).join(d),
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(CliError::config("no output directory: pass --out or set output.directory")),
    };
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Equilibrium { common, lattice } => {
            let (cfg, out) = prepare(&common)?;
            commands::equilibrium(&cfg, &out, lattice)
        }
        Command::Modes { common, grid } => {
            let (cfg, out) = prepare(&common)?;
            commands::modes(&cfg, &out, grid.as_deref())
        }
        Command::Scatter { common, grid } => {
            let (cfg, out) = prepare(&common)?;
            commands::scatter(&cfg, &out, grid.as_deref())
        }
        Command::Thermometry { common, spots, radial } => {
            let (cfg, out) = prepare(&common)?;
            commands::thermometry(&cfg, &out, &spots, radial)
        }
        Command::Micromotion { common } => {
            let (cfg, out) = prepare(&common)?;
            commands::micromotion(&cfg, &out)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("ion-lattice: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
