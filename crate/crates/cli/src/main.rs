//! `grabi` — generalized Rabi model toolkit.
//!
//! Subcommands: spectrum | susy-verify | lindblad evolve|stationary|decay-fit
//! | lattice | map rd|lambda.  Configuration comes from a JSON document
//! (`--config`), with flags overriding fields; identical configuration and
//! build produce byte-identical output files.

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::MapKind;
use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "grabi", version, about = "generalized Rabi model: spectra, SUSY structure, dressed-state Lindblad dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON configuration file; omitted fields take defaults.
    #[arg(long)]
    config: Option<String>,
    /// Output file path (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
    /// Output format for tabular commands.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Override the Fock truncation.
    #[arg(long)]
    nmax: Option<usize>,
    /// Override the interior margin.
    #[arg(long)]
    margin: Option<usize>,
    /// Override a configuration field, e.g. --set g1=1.4 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest levels and the SUSY-line residual, optionally over a sweep.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Verify the supersymmetric structure at the configured point.
    SusyVerify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Dressed-state Lindblad dynamics.
    Lindblad {
        #[command(subcommand)]
        sub: LindbladCommand,
    },
    /// Coupled-cavity chain spectra over a hopping sweep.
    Lattice {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Physical parameter mappings onto the generalized Rabi model.
    Map {
        #[command(subcommand)]
        sub: MapCommand,
    },
}

#[derive(Subcommand)]
enum LindbladCommand {
    /// Trajectory of observables and conserved quantities.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Stationary-manifold dimension and plateau observables.
    Stationary {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exponential decay fit of the conserved functional off the line.
    DecayFit {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Subcommand)]
enum MapCommand {
    /// Rashba–Dresselhaus electron gas in a perpendicular field.
    Rd {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Λ-scheme drive parameters.
    Lambda {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("cannot read config {path}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("cannot parse config {path}: {e}")))?
        }
        None => RunConfig::default(),
    };
    if let Some(n) = common.nmax {
        cfg.trunc.n_max = n;
    }
    if let Some(m) = common.margin {
        cfg.trunc.interior_margin = m;
    }
    for kv in &common.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--set expects KEY=VALUE, got {kv}")))?;
        cfg.apply_set(key.trim(), value.trim()).map_err(CliError::config)?;
    }
    if let Some(fmt) = common.format {
        cfg.output_format = match fmt {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    if let Some(path) = &common.out {
        cfg.output_path = Some(path.clone());
    }
    Ok(cfg)
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let (common, content, cfg) = match command {
        Command::Spectrum { common } => {
            let cfg = load_config(common)?;
            (common, commands::cmd_spectrum(&cfg)?, cfg)
        }
        Command::SusyVerify { common } => {
            let cfg = load_config(common)?;
            (common, commands::cmd_susy_verify(&cfg)?, cfg)
        }
        Command::Lindblad { sub } => match sub {
            LindbladCommand::Evolve { common } => {
                let cfg = load_config(common)?;
                (common, commands::cmd_lindblad_evolve(&cfg)?, cfg)
            }
            LindbladCommand::Stationary { common } => {
                let cfg = load_config(common)?;
                (common, commands::cmd_lindblad_stationary(&cfg)?, cfg)
            }
            LindbladCommand::DecayFit { common } => {
                let cfg = load_config(common)?;
                (common, commands::cmd_lindblad_decay_fit(&cfg)?, cfg)
            }
        },
        Command::Lattice { common } => {
            let cfg = load_config(common)?;
            (common, commands::cmd_lattice(&cfg)?, cfg)
        }
        Command::Map { sub } => match sub {
            MapCommand::Rd { common } => {
                let cfg = load_config(common)?;
                (common, commands::cmd_map(&cfg, MapKind::Rd)?, cfg)
            }
            MapCommand::Lambda { common } => {
                let cfg = load_config(common)?;
                (common, commands::cmd_map(&cfg, MapKind::Lambda)?, cfg)
            }
        },
    };
    let path = common.out.as_deref().or(cfg.output_path.as_deref());
    output::emit(path, &content)
        .map_err(|e| CliError::io(format!("cannot write output: {e}")))?;
    Ok(())
}

fn main() {
    // bit-identical reruns: keep the dense kernels on one thread; sweeps
    // parallelize over independent work items instead
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli.command) {
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code);
    }
}
