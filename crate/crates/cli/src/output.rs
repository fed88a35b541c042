//! Artifact writers and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{Format, RunConfig};

pub const OUT_DIR_ENV: &str = "HSMIX_OUT";

pub fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(f)))
}

/// Writes `rows` as `<stem>.csv`, or `<stem>.jsonl` when the format is jsonl.
pub fn write_table<T: Serialize>(dir: &Path, stem: &str, rows: &[T], format: Format) -> Result<PathBuf> {
    match format {
        Format::Jsonl => {
            let (path, mut w) = create(dir, &format!("{stem}.jsonl"))?;
            for r in rows {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            Ok(path)
        }
        Format::Csv | Format::Binary => {
            let (path, w) = create(dir, &format!("{stem}.csv"))?;
            let mut wr = csv::Writer::from_writer(w);
            for r in rows {
                wr.serialize(r)?;
            }
            wr.flush()?;
            Ok(path)
        }
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path)
}

/// `git describe` of the source tree the binary was built from.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub seed: u64,
    pub git_describe: String,
    pub wall_time_s: f64,
    pub timestamp_unix: u64,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub config: RunConfig,
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<PathBuf> {
    write_json(dir, "manifest.json", m)
}
