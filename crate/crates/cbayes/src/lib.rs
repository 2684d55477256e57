//! File formats and runners around `cbayes-core`: JSON experiment configs
//! and reports, CSV exports, and the inputs of the one-shot subcommands.

pub mod config;
pub mod csv_export;
pub mod report;
pub mod tools;

pub use config::{load_config, parse_config};
pub use report::{render_report, run_document, ReportDocument};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] cbayes_core::Error),
    #[error("config is for experiment {found:?}, but {requested:?} was requested")]
    ExperimentMismatch { requested: String, found: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io { path: path.display().to_string(), source })
}
