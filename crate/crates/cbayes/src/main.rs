use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use cbayes::config::{default_config, load_config};
use cbayes::tools::{self, HellingerConfig, MapConfig, PriorSampleConfig};
use cbayes::{csv_export, read_file, run_document, write_file};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cbayes", version, about = "Random-series priors and posterior well-posedness diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write its JSON report.
    Run {
        /// stability, consistency, convexity, metrics, audit or map_demo
        experiment: String,
        /// Experiment config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the report points as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw coefficient vectors (and optionally field values) from a series prior.
    SamplePrior {
        #[arg(long)]
        config: PathBuf,
        /// Coefficient CSV.
        #[arg(long)]
        out: PathBuf,
        /// Field values on the config grid.
        #[arg(long)]
        values: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Hellinger and total variation distance between two posteriors.
    Hellinger {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// MAP point under a Laplace prior and Gaussian noise.
    Map {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const DEFAULT_SEED: u64 = 1;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { experiment, config, out, csv, seed } => {
            let cfg = match &config {
                Some(path) => load_config(path, &experiment, seed)?,
                None => default_config(&experiment, seed.unwrap_or(DEFAULT_SEED))?,
            };
            let doc = run_document(&cfg)?;
            cbayes::report::write_report(&doc, &out)?;
            if let Some(path) = csv {
                csv_export::write_points(&doc.report.points, create(&path)?)?;
            }
            for v in doc.report.verdicts.iter().filter(|v| !v.pass) {
                eprintln!("FAIL {}: observed {} (tolerance {})", v.name, v.observed, v.tolerance);
            }
            Ok(doc.report.pass)
        }
        Command::SamplePrior { config, out, values, seed } => {
            let cfg: PriorSampleConfig = parse(&config)?;
            let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            let (draws, grid) = tools::sample_prior(&cfg, seed)?;
            csv_export::write_coefficients(&draws, create(&out)?)?;
            if let Some(path) = values {
                csv_export::write_field_values(&grid, create(&path)?)?;
            }
            Ok(true)
        }
        Command::Hellinger { config, out, seed } => {
            let cfg: HellingerConfig = parse(&config)?;
            let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            let result = tools::distances(&cfg, seed)?;
            write_json(&out, &result)?;
            Ok(true)
        }
        Command::Map { config, out } => {
            let cfg: MapConfig = parse(&config)?;
            write_json(&out, &tools::map_point(&cfg)?)?;
            Ok(true)
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(write_file(path, &bytes)?)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}
