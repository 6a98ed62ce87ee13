//! Result persistence: JSON reports with reproducibility metadata and
//! RFC 4180 CSV tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TOOL_NAME: &str = "nvm-bench";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NVM_BENCH_OUT_DIR";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub tool_version: String,
    pub report_schema_version: u32,
    pub experiment: String,
    pub technology: String,
    pub seed: u64,
    /// SHA-256 of the resolved configuration.
    pub config_hash: String,
    /// Wall-clock creation time; not part of any hash or comparison.
    pub generated_at: String,
}

impl Meta {
    pub fn new(experiment: &str, technology: &str, seed: u64, config_hash: String) -> Self {
        Meta {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            report_schema_version: REPORT_SCHEMA_VERSION,
            experiment: experiment.into(),
            technology: technology.into(),
            seed,
            config_hash,
            generated_at: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<C, R> {
    pub meta: Meta,
    pub config: C,
    pub result: R,
}

/// `<experiment>_<technology>_<seed>` with `-` mapped to `_`.
pub fn output_stem(experiment: &str, technology: &str, seed: u64) -> String {
    format!("{experiment}_{technology}_{seed}").replace('-', "_")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPaths {
    pub json: PathBuf,
    pub csv: PathBuf,
}

impl OutputPaths {
    /// An explicit JSON path wins (the CSV sits next to it); otherwise the
    /// stem is placed in `dir`, or the working directory.
    pub fn resolve(out: Option<&Path>, dir: Option<&Path>, stem: &str) -> Self {
        let json = match out {
            Some(p) => p.to_path_buf(),
            None => dir.unwrap_or(Path::new(".")).join(format!("{stem}.json")),
        };
        OutputPaths {
            csv: json.with_extension("csv"),
            json,
        }
    }

    /// A sibling file sharing the JSON stem, e.g. `<stem>.params.bin`.
    pub fn sibling(&self, suffix: &str) -> PathBuf {
        let stem = self.json.file_stem().unwrap_or_default().to_string_lossy();
        self.json.with_file_name(format!("{stem}.{suffix}"))
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn csv_string<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, csv_string(rows)?)?;
    Ok(())
}

/// Parses a report and drops `meta.generated_at`, leaving the part that
/// must be reproducible.
pub fn reproducible_payload(json: &str) -> Result<serde_json::Value> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(meta) = v.get_mut("meta").and_then(|m| m.as_object_mut()) {
        meta.remove("generated_at");
    }
    Ok(v)
}
