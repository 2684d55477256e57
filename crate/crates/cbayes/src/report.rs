use std::path::Path;

use cbayes_core::experiments::{run, ExperimentConfig, ExperimentReport};
use serde::{Deserialize, Serialize};

use crate::config::config_hash;
use crate::{write_file, Result};

/// Report file: the embedded config is enough to regenerate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub report: ExperimentReport,
}

pub fn run_document(cfg: &ExperimentConfig) -> Result<ReportDocument> {
    let report = run(cfg)?;
    Ok(ReportDocument {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg)?,
        config: cfg.clone(),
        report,
    })
}

/// Pretty JSON with a trailing newline.
pub fn render_report(doc: &ReportDocument) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(doc)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_report(doc: &ReportDocument, path: &Path) -> Result<()> {
    write_file(path, &render_report(doc)?)
}
