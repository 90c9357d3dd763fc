//! Label files: one CSV row per entry with columns
//! `bearing_id, seq_index, window_index, label, method, onset`. An empty
//! `window_index` covers every window of the waveform; an empty `onset` means
//! no onset was found. Method parameters and warnings go to a JSON sidecar
//! (`<file>.json`) and are restored when it is present.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::io::sidecar_path;
use crate::labeling::{Label, LabelAssignment, LabelEntry, LabelMethod};

pub const LABEL_COLUMNS: [&str; 6] = ["bearing_id", "seq_index", "window_index", "label", "method", "onset"];

#[derive(Debug, Default, Serialize, Deserialize)]
struct Sidecar {
    params: BTreeMap<String, serde_json::Value>,
    warnings: BTreeMap<String, Vec<String>>,
}

pub fn write_labels(path: &Path, assignments: &[LabelAssignment]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LABEL_COLUMNS)?;
    let mut side = Sidecar::default();
    for a in assignments {
        let onset = a.onset_seq_index.map(|o| o.to_string()).unwrap_or_default();
        let method = a.method.to_string();
        for e in &a.entries {
            let window = e.window_index.map(|w| w.to_string()).unwrap_or_default();
            w.write_record([
                a.bearing_id.as_str(),
                &e.seq_index.to_string(),
                &window,
                &e.label.to_string(),
                &method,
                &onset,
            ])?;
        }
        side.params.insert(a.bearing_id.clone(), a.params.clone());
        if !a.warnings.is_empty() {
            side.warnings.insert(a.bearing_id.clone(), a.warnings.clone());
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let sp = sidecar_path(path);
    fs::write(&sp, serde_json::to_string_pretty(&side)?).map_err(|e| Error::io(&sp, e))?;
    Ok(())
}

fn parse_method(s: &str) -> Option<LabelMethod> {
    match s {
        "threshold" => Some(LabelMethod::Threshold),
        "pca_kmeans" => Some(LabelMethod::PcaKmeans),
        "declared" => Some(LabelMethod::Declared),
        _ => None,
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelAssignment>> {
    let sp = sidecar_path(path);
    let side: Sidecar = if sp.exists() {
        serde_json::from_str(&fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?)?
    } else {
        Sidecar::default()
    };
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<LabelAssignment> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        if rec.len() != LABEL_COLUMNS.len() {
            return Err(bad(format!("{} fields, expected {}", rec.len(), LABEL_COLUMNS.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("malformed integer {s:?}")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { int(s).map(Some) };
        let bearing = &rec[0];
        let method = parse_method(&rec[4]).ok_or_else(|| bad(format!("unknown method {:?}", &rec[4])))?;
        let entry = LabelEntry {
            seq_index: int(&rec[1])?,
            window_index: opt(&rec[2])?,
            label: Label::from(&rec[3]),
        };
        let onset = opt(&rec[5])?;
        match out.last_mut() {
            Some(a) if a.bearing_id == bearing => {
                if a.method != method || a.onset_seq_index != onset {
                    return Err(bad(format!("bearing {bearing}: inconsistent method or onset")));
                }
                a.entries.push(entry);
            }
            _ => out.push(LabelAssignment {
                bearing_id: bearing.to_string(),
                method,
                params: side.params.get(bearing).cloned().unwrap_or(serde_json::Value::Null),
                onset_seq_index: onset,
                entries: vec![entry],
                warnings: side.warnings.get(bearing).cloned().unwrap_or_default(),
            }),
        }
    }
    Ok(out)
}
