//! `hhl`: runs the solver pipeline, sweeps, tomography and spectrum exports,
//! writing JSON/CSV artifacts plus a `manifest.json` that `hhl replay` can
//! re-run bit-for-bit.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hhl_core::tomography::CatalogKind;

use commands::{Invocation, RunManifest, StateChoice};
use config::{Config, Decimal, Mode};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hhl",
    version,
    about = "Quantum linear-system solver simulator"
)]
struct Cli {
    /// TOML (or JSON) run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for stochastic readout noise; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "hhl-out")]
    out: PathBuf,
    /// Rotation mode; overrides the config.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Decoherence model; overrides the config.
    #[arg(long, global = true, value_enum)]
    noise: Option<Switch>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline and write report.json.
    Solve {
        /// Also write the carbon spectrum of the final state.
        #[arg(long)]
        spectrum: bool,
    },
    /// Sweep r or t0 and write sweep.csv.
    Sweep {
        /// r values: `a..b` (inclusive) or a comma list. Default 1..8.
        #[arg(long, value_parser = parse_r_values)]
        r: Option<RValues>,
        /// Comma-separated t0 values.
        #[arg(long, value_parser = parse_t0_values)]
        t0: Option<T0Values>,
    },
    /// Simulate readout records, reconstruct, and write tomography.json.
    Tomography {
        #[arg(long, value_enum)]
        catalog: Option<CatalogArg>,
        /// Fit peak intensities from synthetic spectra.
        #[arg(long)]
        fit: bool,
    },
    /// Write spectrum.csv and peaks.json.
    Spectrum {
        #[arg(long, value_enum, default_value = "final")]
        state: StateChoice,
        /// Readout pulse applied first, e.g. `YEEE*swap13`.
        #[arg(long)]
        pulse: Option<String>,
    },
    /// Re-run a manifest.json into --out.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CatalogArg {
    Full,
    Partial,
}

#[derive(Debug, Clone, PartialEq)]
struct RValues(Vec<u32>);

#[derive(Debug, Clone, PartialEq)]
struct T0Values(Vec<Decimal>);

fn parse_r_values(s: &str) -> Result<RValues, String> {
    let parse = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("'{x}': {e}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        Ok(RValues((a..=b).collect()))
    } else {
        s.split(',')
            .map(parse)
            .collect::<Result<_, _>>()
            .map(RValues)
    }
}

fn parse_t0_values(s: &str) -> Result<T0Values, String> {
    s.split(',')
        .map(|x| match x.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Decimal(v)),
            _ => Err(format!("'{x}' is not a finite number")),
        })
        .collect::<Result<_, _>>()
        .map(T0Values)
}

fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(mode) = cli.mode {
        config.solver.mode = mode;
    }
    if let Some(noise) = cli.noise {
        config.noise.enabled = matches!(noise, Switch::On);
    }
    Ok(config)
}

fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<RunManifest, CliError> {
    let (invocation, config) = match cli.command {
        Command::Replay { ref manifest } => {
            let m = load_manifest(manifest)?;
            (m.invocation, m.config)
        }
        ref command => {
            let config = resolve_config(&cli)?;
            let invocation = match command {
                Command::Solve { spectrum } => Invocation::Solve {
                    spectrum: *spectrum,
                },
                Command::Sweep { r, t0 } => Invocation::Sweep {
                    r: r.as_ref().map(|v| v.0.clone()),
                    t0: t0.as_ref().map(|v| v.0.clone()),
                },
                Command::Tomography { catalog, fit } => Invocation::Tomography {
                    catalog: match catalog {
                        Some(CatalogArg::Full) => CatalogKind::Full,
                        Some(CatalogArg::Partial) => CatalogKind::Partial,
                        None => config.tomography.catalog,
                    },
                    fit: *fit || config.tomography.fit,
                },
                Command::Spectrum { state, pulse } => Invocation::Spectrum {
                    state: *state,
                    pulse: pulse.clone(),
                },
                Command::Replay { .. } => unreachable!(),
            };
            (invocation, config)
        }
    };
    commands::run(&invocation, &config, &cli.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let out = cli.out.clone();
    match execute(cli) {
        Ok(manifest) => {
            for file in &manifest.outputs {
                println!("{}", out.join(file).display());
            }
            println!("{}", out.join(commands::MANIFEST_FILE).display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
