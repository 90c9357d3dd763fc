//! Waveform CSV reading and writing.
//!
//! Accepted shapes (fields separated by `,`, `;` or tab):
//!
//! - a header row naming the channels; the first column whose name contains
//!   `horiz` is used, or the only column when there is just one
//! - no header and one column: the samples themselves
//! - no header and six columns: the FEMTO acquisition row
//!   `hour, minute, second, microsecond, horizontal, vertical`
//! - no header and any other width: the first column
//!
//! Every data row must have the same field count as the first one; a short
//! row is reported as a length mismatch (truncated file).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{Axis, DatasetManifest, ManifestEntry, WaveformRecord};

pub fn load_waveform(manifest: &DatasetManifest, entry: &ManifestEntry) -> Result<WaveformRecord> {
    let path = manifest.resolve(entry);
    let samples = read_horizontal(&path)?;
    if let Some(expected) = entry.expected_len {
        if samples.len() != expected {
            return Err(Error::LengthMismatch {
                path,
                message: format!("expected {expected} samples, read {}", samples.len()),
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::LengthMismatch {
            path,
            message: "no samples".into(),
        });
    }
    Ok(WaveformRecord {
        bearing_id: entry.bearing_id.clone(),
        condition_id: entry.condition_id.clone(),
        seq_index: entry.seq_index,
        samples,
        sampling_rate_hz: entry.sampling_rate_hz,
        fault_label: entry.fault_label.clone(),
        axis: Axis::Horizontal,
    })
}

fn split_fields(line: &str) -> Vec<&str> {
    let sep = if line.contains(',') {
        ','
    } else if line.contains(';') {
        ';'
    } else {
        '\t'
    };
    line.split(sep).map(str::trim).collect()
}

/// Read the horizontal channel of a waveform file.
pub fn read_horizontal(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();

    let Some(&(_, first)) = lines.peek() else {
        return Ok(Vec::new());
    };
    let first_fields = split_fields(first);
    let is_header = first_fields.iter().any(|f| f.parse::<f64>().is_err());
    let (column, width) = if is_header {
        lines.next();
        let col = if first_fields.len() == 1 {
            0
        } else {
            first_fields
                .iter()
                .position(|f| f.to_ascii_lowercase().contains("horiz"))
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row: 1,
                    message: format!("no horizontal column in header {first:?}"),
                })?
        };
        (col, first_fields.len())
    } else {
        let col = if first_fields.len() == 6 { 4 } else { 0 };
        (col, first_fields.len())
    };

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        let fields = split_fields(line);
        if fields.len() != width {
            return Err(Error::LengthMismatch {
                path: path.to_path_buf(),
                message: format!("row {row} has {} fields, expected {width}", fields.len()),
            });
        }
        let raw = fields[column];
        let value: f64 = raw.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("malformed number {raw:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                message: format!("non-finite value {raw:?}"),
            });
        }
        samples.push(value);
    }
    Ok(samples)
}

/// Write a single-channel waveform with a `horizontal` header. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_waveform_csv(path: &Path, samples: &[f64]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "horizontal")?;
        for x in samples {
            writeln!(out, "{x}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
