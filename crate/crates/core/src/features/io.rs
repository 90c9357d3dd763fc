//! Feature matrices on disk: one CSV row per sample plus a JSON sidecar
//! (`<file>.json`) describing the family, window parameters and columns.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureSample, StftSpec, WindowSpec};

pub const PROVENANCE_COLUMNS: [&str; 5] = [
    "bearing_id",
    "condition_id",
    "seq_index",
    "window_index",
    "window_start_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub schema_version: u32,
    pub family: FeatureFamily,
    pub window: WindowSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stft: Option<StftSpec>,
    pub provenance_columns: Vec<String>,
    pub feature_columns: Vec<String>,
    pub n_samples: usize,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_features(
    path: &Path,
    samples: &[FeatureSample],
    family: FeatureFamily,
    window: &WindowSpec,
    stft: &StftSpec,
) -> Result<FeatureSidecar> {
    let columns = family.column_names(window.length, stft);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PROVENANCE_COLUMNS.iter().copied().chain(columns.iter().map(String::as_str)))?;
    for s in samples {
        if s.values.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: s.values.len(),
            });
        }
        let mut row = vec![
            s.bearing_id.clone(),
            s.condition_id.clone(),
            s.waveform_seq_index.to_string(),
            s.window_index.to_string(),
            s.window_start_time_s.to_string(),
        ];
        row.extend(s.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let sidecar = FeatureSidecar {
        schema_version: 1,
        family,
        window: *window,
        stft: (family == FeatureFamily::Stft).then_some(*stft),
        provenance_columns: PROVENANCE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        feature_columns: columns,
        n_samples: samples.len(),
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))?;
    Ok(sidecar)
}

pub fn read_features(path: &Path) -> Result<(FeatureSidecar, Vec<FeatureSample>)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: FeatureSidecar = serde_json::from_str(&text)?;
    let mut r = csv::Reader::from_path(path)?;
    let width = PROVENANCE_COLUMNS.len() + sidecar.feature_columns.len();
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != width {
            return Err(Error::LengthMismatch {
                path: path.to_path_buf(),
                message: format!("row {row} has {} fields, expected {width}", rec.len()),
            });
        }
        let parse_err = |field: &str| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("malformed field {field:?}"),
        };
        let num = |idx: usize| -> Result<f64> { rec[idx].parse::<f64>().map_err(|_| parse_err(&rec[idx])) };
        let int = |idx: usize| -> Result<usize> { rec[idx].parse::<usize>().map_err(|_| parse_err(&rec[idx])) };
        let values = (PROVENANCE_COLUMNS.len()..width).map(num).collect::<Result<Vec<_>>>()?;
        samples.push(FeatureSample {
            bearing_id: rec[0].to_string(),
            condition_id: rec[1].to_string(),
            waveform_seq_index: int(2)?,
            window_index: int(3)?,
            window_start_time_s: num(4)?,
            family: sidecar.family,
            values,
        });
    }
    Ok((sidecar, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let samples: Vec<FeatureSample> = (0..3)
            .map(|i| FeatureSample {
                bearing_id: "1_1".into(),
                condition_id: "1".into(),
                waveform_seq_index: i,
                window_index: 0,
                window_start_time_s: 0.0,
                family: FeatureFamily::Time,
                values: (0..12).map(|k| (k as f64 + 0.1) / (i as f64 + 3.0)).collect(),
            })
            .collect();
        let spec = WindowSpec::default();
        let side = write_features(&path, &samples, FeatureFamily::Time, &spec, &StftSpec::default()).unwrap();
        assert_eq!(side.feature_columns[0], "mean");
        let (side2, back) = read_features(&path).unwrap();
        assert_eq!(side, side2);
        assert_eq!(back, samples);
    }
}
