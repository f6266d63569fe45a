//! CSV trace files and the JSON corpus manifest.
//!
//! A trace file has the header `t_s,voltage_v` and strictly increasing time
//! stamps. The manifest is a JSON array of entries pointing at trace files,
//! with paths relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{TraceMeta, VoltageTrace};
use crate::error::{Error, Result};
use crate::mode::Mode;

const MODULE: &str = "signal";

/// Maximum relative disagreement between the inferred and declared rate.
pub const RATE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub mode: Option<Mode>,
    pub user_id: String,
    pub trace_id: String,
    pub sampling_rate_hz: f64,
}

impl ManifestEntry {
    pub fn meta(&self) -> TraceMeta {
        TraceMeta {
            label: self.mode,
            user_id: self.user_id.clone(),
            trace_id: self.trace_id.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    t_s: f64,
    voltage_v: f64,
}

/// Reads a trace CSV and checks its time column against the declared rate.
pub fn read_trace_csv(path: &Path, declared_rate_hz: f64, meta: TraceMeta) -> Result<VoltageTrace> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })?;
    let headers = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "voltage_v"] {
        return Err(Error::input(
            MODULE,
            format!("{}: expected header t_s,voltage_v", path.display()),
        ));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?;
        if let Some(prev) = times.last() {
            if row.t_s <= *prev {
                return Err(Error::input(
                    MODULE,
                    format!("{}: time column not increasing at t = {}", path.display(), row.t_s),
                ));
            }
        }
        times.push(row.t_s);
        samples.push(row.voltage_v);
    }
    if samples.len() < 2 {
        return Err(Error::input(
            MODULE,
            format!("{}: need at least two samples to infer the rate", path.display()),
        ));
    }
    let span = times[times.len() - 1] - times[0];
    let inferred = (samples.len() - 1) as f64 / span;
    if ((inferred - declared_rate_hz) / declared_rate_hz).abs() > RATE_TOLERANCE {
        return Err(Error::input(
            MODULE,
            format!(
                "{}: inferred rate {inferred:.4} Hz differs from declared {declared_rate_hz} Hz",
                path.display()
            ),
        ));
    }
    VoltageTrace::new(samples, declared_rate_hz, meta)
}

/// Writes a trace as `t_s,voltage_v` with time stamps `i / rate`.
pub fn write_trace_csv(path: &Path, trace: &VoltageTrace) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: path.to_owned(),
        source,
    };
    writer.write_record(["t_s", "voltage_v"]).map_err(csv_err)?;
    for (i, v) in trace.samples.iter().enumerate() {
        let t = i as f64 / trace.sampling_rate_hz;
        writer
            .write_record([t.to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    for e in &entries {
        if !(e.sampling_rate_hz.is_finite() && e.sampling_rate_hz > 0.0) {
            return Err(Error::input(
                MODULE,
                format!("manifest entry {} has a non-positive rate", e.trace_id),
            ));
        }
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let text = serde_json::to_string_pretty(entries).map_err(|e| Error::json("manifest", e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads every trace listed in a manifest.
pub fn load_corpus(manifest_path: &Path) -> Result<Vec<VoltageTrace>> {
    let base = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    read_manifest(manifest_path)?
        .iter()
        .map(|e| {
            let p = resolve(&base, &e.path);
            read_trace_csv(&p, e.sampling_rate_hz, e.meta())
        })
        .collect()
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
