//! CSV ingestion, configuration, and the on-disk formats for series,
//! scalograms, events and run manifests.
//!
//! Times are carried as days since 1970-01-01 (UTC) and written as ISO-8601
//! dates, with a time-of-day only when it is not midnight.

mod config;
mod manifest;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detect::{Element, ElementEvent};
use crate::preprocess::RawSeries;
use crate::{Error, Result};

pub use config::{load_config, parse_overrides, AnalysisConfig, ConfigOverrides, NoiseMethodName, Period, DAYS_PER_YEAR};
pub use manifest::{verify_manifest, write_outputs, FileEntry, Manifest, MANIFEST_NAME};

/// Values treated as missing when reading a series.
pub const DEFAULT_MISSING: &[&str] = &["", ".", "NA", "NaN", "nan", "null"];

const SECONDS_PER_DAY: f64 = 86_400.0;

fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS[.fff]` (also with a space) or an
/// RFC 3339 timestamp with offset into days since the epoch.
pub fn parse_date(text: &str) -> Option<f64> {
    let t = text.trim();
    let naive = if let Ok(d) = NaiveDate::parse_from_str(t, "%Y-%m-%d") {
        d.and_hms_opt(0, 0, 0)?
    } else if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        dt.naive_utc()
    } else {
        NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| NaiveDateTime::parse_from_str(t, "%Y-%m-%d %H:%M:%S%.f"))
            .ok()?
    };
    let delta = naive - epoch();
    Some(delta.num_milliseconds() as f64 / 1000.0 / SECONDS_PER_DAY)
}

/// Inverse of [`parse_date`], rounded to the second.
pub fn format_date(days: f64) -> String {
    let secs = (days * SECONDS_PER_DAY).round() as i64;
    let when = epoch() + chrono::Duration::seconds(secs);
    if secs.rem_euclid(86_400) == 0 {
        when.format("%Y-%m-%d").to_string()
    } else {
        when.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

/// Rounds to nine significant digits.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn fmt9(x: f64) -> String {
    format!("{}", sig9(x))
}

/// A series read from CSV, with the number of rows dropped as missing.
#[derive(Debug, Clone)]
pub struct CsvSeries {
    pub raw: RawSeries,
    pub dropped: usize,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a dated series. Lines starting with `#` are ignored; rows whose
/// value is one of `missing` are dropped and counted.
pub fn read_csv(path: &Path, date_column: &str, value_column: &str, missing: &[&str]) -> Result<CsvSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, 1, format!("no column named `{name}` in header")))
    };
    let (di, vi) = (column(date_column)?, column(value_column)?);

    let (mut times, mut values, mut dropped) = (Vec::new(), Vec::new(), 0);
    let mut last: Option<f64> = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let date = record.get(di).unwrap_or("");
        let value = record.get(vi).unwrap_or("");
        if missing.contains(&value) {
            dropped += 1;
            continue;
        }
        let t = parse_date(date).ok_or_else(|| parse_err(path, line, format!("cannot parse date `{date}`")))?;
        let v: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(path, line, format!("cannot parse value `{value}`")))?;
        if let Some(prev) = last {
            if t <= prev {
                return Err(parse_err(path, line, format!("date `{date}` is not after the previous row")));
            }
        }
        last = Some(t);
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(Error::EmptySeries);
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with missing values", path.display());
    }
    Ok(CsvSeries {
        raw: RawSeries::new(times, values)?,
        dropped,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `date,value` rows.
pub fn write_series_csv(path: &Path, t0: f64, dt: f64, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "date,value").map_err(io)?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{},{}", format_date(t0 + i as f64 * dt), fmt9(*v)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// First row: `period` then one timestamp per column. Each further row: the
/// scale's period in time units, then the modulus.
pub fn write_scalogram_csv(path: &Path, modulus: &Array2<f64>, periods: &[f64], t0: f64, dt: f64) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "period").map_err(io)?;
    for i in 0..modulus.ncols() {
        write!(w, ",{}", format_date(t0 + i as f64 * dt)).map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (row, p) in modulus.rows().into_iter().zip(periods) {
        write!(w, "{}", fmt9(*p)).map_err(io)?;
        for v in row {
            write!(w, ",{}", fmt9(*v)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Decades of modulus below the maximum shown before clipping to black.
pub const PGM_DECADES: f64 = 4.0;

/// Grey level for modulus `m` against the image maximum `max`:
/// `255 · (log10(m/max) + 4) / 4`, clipped to `[0, 255]`.
pub fn pgm_level(m: f64, max: f64) -> u8 {
    if !(m > 0.0 && max > 0.0) {
        return 0;
    }
    let x = ((m / max).log10() + PGM_DECADES) / PGM_DECADES;
    (255.0 * x.clamp(0.0, 1.0)).round() as u8
}

/// Binary greyscale image, one row per scale (row 0 = finest), one column per
/// sample, log-scaled by [`pgm_level`].
pub fn write_pgm(path: &Path, modulus: &Array2<f64>) -> Result<()> {
    let (h, wd) = modulus.dim();
    let max = modulus.iter().copied().fold(0.0, f64::max);
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "P5\n# log10 modulus over {PGM_DECADES} decades below the maximum\n{wd} {h}\n255\n").map_err(io)?;
    let bytes: Vec<u8> = modulus.iter().map(|&m| pgm_level(m, max)).collect();
    w.write_all(&bytes).map_err(io)?;
    w.flush().map_err(io)
}

/// One event as written to JSON-lines and CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_iso: String,
    pub t_sample: f64,
    pub c_abs: f64,
    pub c_phase_rad: f64,
    pub rho_samples: f64,
    pub period: f64,
    pub omega_rho: f64,
    pub significance: f64,
    pub overlap_flag: bool,
}

impl From<&ElementEvent> for EventRecord {
    fn from(e: &ElementEvent) -> Self {
        EventRecord {
            t_iso: format_date(e.time),
            t_sample: sig9(e.t_sample),
            c_abs: sig9(e.c_abs()),
            c_phase_rad: sig9(e.c_phase()),
            rho_samples: sig9(e.rho),
            period: sig9(e.period),
            omega_rho: sig9(e.omega_rho),
            significance: sig9(e.significance),
            overlap_flag: e.overlap,
        }
    }
}

impl EventRecord {
    pub fn element(&self) -> Element {
        Element {
            t: self.t_sample,
            c: Complex64::from_polar(self.c_abs, self.c_phase_rad),
            rho: self.rho_samples,
        }
    }
}

pub fn write_events_jsonl(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for e in events {
        let line = serde_json::to_string(e).expect("event serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_events_csv(path: &Path, events: &[EventRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record([
        "t_iso",
        "t_sample",
        "c_abs",
        "c_phase_rad",
        "rho_samples",
        "period",
        "omega_rho",
        "significance",
        "overlap_flag",
    ])
    .map_err(to_io)?;
    for e in events {
        w.serialize(e).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_events_jsonl(path: &Path) -> Result<Vec<EventRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(path, i as u64 + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Element list for synthesis: CSV with columns `t` (samples), `c_abs`,
/// `c_phase` (radians) and `rho` (samples).
pub fn read_element_spec(path: &Path) -> Result<Vec<Element>> {
    #[derive(Deserialize)]
    struct Row {
        t: f64,
        c_abs: f64,
        c_phase: f64,
        rho: f64,
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        if !(row.c_abs > 0.0 && row.rho > 0.0 && row.c_phase.is_finite() && row.t.is_finite()) {
            return Err(parse_err(path, out.len() as u64 + 2, "c_abs and rho must be positive"));
        }
        out.push(Element {
            t: row.t,
            c: Complex64::from_polar(row.c_abs, row.c_phase),
            rho: row.rho,
        });
    }
    Ok(out)
}
