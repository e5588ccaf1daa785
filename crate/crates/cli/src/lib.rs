//! Command-line front end: ingest raw CSI logs, augment spectrogram files,
//! render previews, run ablations and verify datasets.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{cmd_ablate, cmd_augment, cmd_ingest, cmd_preview, cmd_verify};
pub use config::{Overrides, RunConfig};
pub use error::{exit, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Md,
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "csiaug", version, about = "CSI spectrogram ingestion, augmentation and ablation")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value_t)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn raw CSI logs into spectrogram files and a manifest.
    Ingest,
    /// Augment spectrogram files with the configured pipeline.
    Augment {
        /// Input files; defaults to `augment.inputs` from the config.
        inputs: Vec<PathBuf>,
    },
    /// Render a spectrogram file as a grayscale PNG.
    Preview { input: PathBuf, output: PathBuf },
    /// Train and evaluate every arm of the configured experiment.
    Ablate,
    /// Check manifests against the files they list.
    Verify {
        /// Manifests; defaults to every entry of `datasets` in the config.
        manifests: Vec<PathBuf>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Schema(vec!["--config: required for this command".into()]))?;
    RunConfig::load(path, &Overrides { seed: cli.seed, out: cli.out.clone() })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Runs one parsed invocation, writing results to `out` and diagnostics to
/// `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    match &cli.command {
        Command::Ingest => {
            let s = cmd_ingest(&load(cli)?)?;
            for w in &s.warnings {
                writeln!(err, "warning: {w}").map_err(io)?;
            }
            if cli.format == OutputFormat::Json {
                write!(out, "{}", json(&s)).map_err(io)?;
            } else {
                for (p, records, n) in &s.sources {
                    writeln!(out, "{}: {records} records, {n} spectrograms", p.display()).map_err(io)?;
                }
                writeln!(out, "{} files written, manifest {}", s.files.len(), s.manifest.display()).map_err(io)?;
            }
        }
        Command::Augment { inputs } => {
            let s = cmd_augment(&load(cli)?, inputs)?;
            if cli.format == OutputFormat::Json {
                write!(out, "{}", json(&s)).map_err(io)?;
            } else {
                writeln!(out, "{} files augmented", s.outputs.len()).map_err(io)?;
                if let Some(p) = &s.draw_log {
                    writeln!(out, "draw log: {}", p.display()).map_err(io)?;
                }
            }
        }
        Command::Preview { input, output } => cmd_preview(input, output)?,
        Command::Ablate => {
            let o = cmd_ablate(&load(cli)?)?;
            let text = match cli.format {
                OutputFormat::Md => o.report.markdown.clone(),
                OutputFormat::Csv => o.report.csv.clone(),
                OutputFormat::Json => json(&o.summary),
            };
            write!(out, "{text}").map_err(io)?;
            let failed = o.summary.failed_runs();
            if failed > 0 {
                return Err(CliError::Runtime(format!("{failed} run(s) failed; details in {}", o.results.display())));
            }
        }
        Command::Verify { manifests } => {
            let manifests = if manifests.is_empty() { load(cli)?.datasets.into_values().collect() } else { manifests.clone() };
            if manifests.is_empty() {
                return Err(CliError::Schema(vec!["verify: no manifests given".into()]));
            }
            let reports = cmd_verify(&manifests)?;
            if cli.format == OutputFormat::Json {
                write!(out, "{}", json(&reports)).map_err(io)?;
            } else {
                for r in &reports {
                    write!(out, "{r}").map_err(io)?;
                }
            }
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.subset.as_str()).collect();
            if !failed.is_empty() {
                return Err(CliError::Verify(failed.join(", ")));
            }
        }
    }
    Ok(())
}
