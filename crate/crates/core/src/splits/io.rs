//! Split files: CSV rows of `bearing_id, seq_index, window_index, partition`,
//! with strategy, seed and bearing table in a `<file>.json` sidecar.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::io::sidecar_path;
use crate::features::SampleKey;
use crate::splits::{BearingTable, SplitAssignment, SplitEntry, SplitStrategy};

pub const SPLIT_COLUMNS: [&str; 4] = ["bearing_id", "seq_index", "window_index", "partition"];

#[derive(Serialize, Deserialize)]
struct Sidecar {
    strategy: SplitStrategy,
    seed: Option<u64>,
    #[serde(default)]
    bearing_table: Option<BearingTable>,
    #[serde(default)]
    warnings: Vec<String>,
}

pub fn write_split(path: &Path, split: &SplitAssignment) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SPLIT_COLUMNS)?;
    for e in &split.entries {
        w.write_record([
            e.key.bearing_id.as_str(),
            &e.key.seq_index.to_string(),
            &e.key.window_index.to_string(),
            e.partition.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = Sidecar {
        strategy: split.strategy,
        seed: split.seed,
        bearing_table: split.bearing_table.clone(),
        warnings: split.warnings.clone(),
    };
    let sp = sidecar_path(path);
    fs::write(&sp, serde_json::to_string_pretty(&side)?).map_err(|e| Error::io(&sp, e))?;
    Ok(())
}

pub fn read_split(path: &Path) -> Result<SplitAssignment> {
    let sp = sidecar_path(path);
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?)?;
    let mut r = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row: i + 2,
            message,
        };
        if rec.len() != SPLIT_COLUMNS.len() {
            return Err(bad(format!("{} fields, expected {}", rec.len(), SPLIT_COLUMNS.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("malformed integer {s:?}")));
        entries.push(SplitEntry {
            key: SampleKey {
                bearing_id: rec[0].to_string(),
                seq_index: int(&rec[1])?,
                window_index: int(&rec[2])?,
            },
            partition: rec[3].parse().map_err(|_| bad(format!("unknown partition {:?}", &rec[3])))?,
        });
    }
    entries.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(SplitAssignment {
        strategy: side.strategy,
        seed: side.seed,
        entries,
        bearing_table: side.bearing_table,
        warnings: side.warnings,
    })
}
