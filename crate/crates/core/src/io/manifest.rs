//! Writing a complete run to a directory, with a manifest of content hashes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    format_date, write_events_csv, write_events_jsonl, write_pgm, write_scalogram_csv, write_series_csv,
    AnalysisConfig,
};
use crate::cwt::Scalogram;
use crate::pipeline::RunResults;
use crate::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: usize,
    pub dt_days: f64,
    pub start: String,
    pub dropped_rows: usize,
    pub sigma_hat: f64,
    pub critical: f64,
    pub maxima: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: AnalysisConfig,
    pub summary: RunSummary,
    pub files: Vec<FileEntry>,
}

fn hash_file(path: &Path) -> Result<FileEntry> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileEntry {
        name: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn write_scalogram(dir: &Path, stem: &str, sc: &Scalogram) -> Result<()> {
    let modulus = sc.modulus();
    let periods: Vec<f64> = sc.grid.periods().iter().map(|p| p * sc.dt).collect();
    write_scalogram_csv(&dir.join(format!("{stem}.csv")), &modulus, &periods, sc.t0, sc.dt)?;
    write_pgm(&dir.join(format!("{stem}.pgm")), &modulus)
}

/// Writes every artifact of `run` into `out_dir` (created if needed) and
/// returns the manifest, which is also written as `manifest.json`.
pub fn write_outputs(run: &RunResults, out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let f = &run.filtered;
    write_series_csv(&out_dir.join("filtered.csv"), f.t0(), f.dt(), f.values())?;
    write_scalogram(out_dir, "scalogram", &run.scalogram)?;
    write_scalogram(out_dir, "element_scalogram", &run.element_scalogram)?;
    let records = run.event_records();
    write_events_jsonl(&out_dir.join("events.jsonl"), &records)?;
    write_events_csv(&out_dir.join("events.csv"), &records)?;
    let cfg_path = out_dir.join("config.toml");
    std::fs::write(&cfg_path, run.config.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;

    let names = [
        "filtered.csv",
        "scalogram.csv",
        "scalogram.pgm",
        "element_scalogram.csv",
        "element_scalogram.pgm",
        "events.jsonl",
        "events.csv",
        "config.toml",
    ];
    let files = names.iter().map(|n| hash_file(&out_dir.join(n))).collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        config: run.config.clone(),
        summary: RunSummary {
            samples: f.len(),
            dt_days: f.dt(),
            start: format_date(f.t0()),
            dropped_rows: run.dropped,
            sigma_hat: run.detection.noise.sigma_hat,
            critical: run.detection.noise.critical,
            maxima: run.detection.maxima.len(),
            events: run.detection.events.len(),
        },
        files,
    };
    let path = out_dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Re-hashes every file listed in `dir/manifest.json`.
pub fn verify_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    for entry in &manifest.files {
        let actual = hash_file(&dir.join(&entry.name))?;
        if actual != *entry {
            return Err(Error::Manifest(format!("{} does not match its recorded hash", entry.name)));
        }
    }
    Ok(manifest)
}
