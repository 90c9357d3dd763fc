//! Dataset manifests and directory scanning.
//!
//! Layout conventions (all waveform files are `.csv`):
//!
//! - `femto_like`: `<root>/**/Bearing<c>_<k>/acc_<n>.csv` (the `Bearing`
//!   prefix is optional). Bearing id `<c>_<k>`, condition `<c>`, 25.6 kHz.
//! - `xjtu_like`: `<root>/[<condition>/]Bearing<c>_<k>/<n>.csv`. Condition is
//!   the parent directory name when present, else `<c>`. 25.6 kHz.
//! - `cwru_like`: `<root>/<rate>k_<location>/<B|IR|OR>/<diameter>/<file>.csv`
//!   for faulted recordings and `<root>/[<rate>k_<location>/]Normal/<file>.csv`
//!   for baselines. The bearing id is the path of directories below the root
//!   (`12k_Fan/IR/007`), or `Normal/<stem>` for baselines so that distinct
//!   baseline recordings can land in distinct partitions. Fault labels are
//!   `<class>/<inches>` (`BALL/0.007`, `IR/0.021`) or `Normal`. Rate is taken
//!   from the `<rate>k` token; a bare `Normal` directory is 48 kHz. The file
//!   stem is kept verbatim as the condition id.
//!
//! Within a bearing, files are ordered by their numeric index (femto/xjtu) or
//! by file name (cwru) and `seq_index` is the 0-based rank in that order.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    FemtoLike,
    XjtuLike,
    CwruLike,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "femto" | "femto_like" => Ok(Layout::FemtoLike),
            "xjtu" | "xjtu_like" => Ok(Layout::XjtuLike),
            "cwru" | "cwru_like" => Ok(Layout::CwruLike),
            other => Err(Error::Config(format!("unknown layout {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest root unless absolute.
    pub path: PathBuf,
    pub bearing_id: String,
    pub condition_id: String,
    pub seq_index: usize,
    pub sampling_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_label: Option<String>,
    /// When set, loading fails unless exactly this many samples are read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub dataset_id: String,
    #[serde(default)]
    pub layout: Option<Layout>,
    pub root: PathBuf,
    pub records: Vec<ManifestEntry>,
    #[serde(default)]
    pub rejects: Vec<Reject>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn new(dataset_id: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            dataset_id: dataset_id.into(),
            layout: None,
            root: root.into(),
            records: Vec::new(),
            rejects: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    /// Sort records by (bearing, seq) so iteration order is canonical.
    pub fn sort(&mut self) {
        self.records
            .sort_by(|a, b| (&a.bearing_id, a.seq_index).cmp(&(&b.bearing_id, b.seq_index)));
    }

    pub fn bearings(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|r| r.bearing_id.clone()).collect();
        ids.dedup();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Check the manifest invariants: unique (bearing, seq) pairs, positive
    /// rates and, when `check_paths`, that every file exists.
    pub fn validate(&self, check_paths: bool) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "manifest schema_version {} unsupported (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.records {
            if !seen.insert((e.bearing_id.as_str(), e.seq_index)) {
                return Err(Error::InvalidInput(format!(
                    "duplicate record ({}, {})",
                    e.bearing_id, e.seq_index
                )));
            }
            if !(e.sampling_rate_hz > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "non-positive sampling rate for ({}, {})",
                    e.bearing_id, e.seq_index
                )));
            }
            if check_paths {
                let p = self.resolve(e);
                if !p.is_file() {
                    return Err(Error::io(
                        p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "manifest entry missing"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    /// Load a manifest. A relative `root` is resolved against the manifest
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)?;
        if m.root.is_relative() {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            m.root = base.join(&m.root);
        }
        m.validate(true)?;
        Ok(m)
    }
}

/// Enumerate every recording under `root` following `layout`.
///
/// Files that do not fit the layout are collected in `rejects`. An empty
/// tree yields an empty manifest with a warning.
pub fn scan_dataset(root: &Path, layout: Layout) -> Result<DatasetManifest> {
    let dataset_id = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let mut manifest = DatasetManifest::new(dataset_id, root);
    manifest.layout = Some(layout);

    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    files.sort();

    // bearing id -> (sort key, entry)
    let mut groups: BTreeMap<String, Vec<(SortKey, ManifestEntry)>> = BTreeMap::new();
    for file in files {
        let rel = file.strip_prefix(root).unwrap_or(&file).to_path_buf();
        let parsed = match layout {
            Layout::FemtoLike => parse_femto(&rel),
            Layout::XjtuLike => parse_xjtu(&rel),
            Layout::CwruLike => parse_cwru(&rel),
        };
        match parsed {
            Ok((key, entry)) => groups.entry(entry.bearing_id.clone()).or_default().push((key, entry)),
            Err(reason) => manifest.rejects.push(Reject { path: rel, reason }),
        }
    }

    for (bearing, mut entries) in groups {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                manifest.warnings.push(format!(
                    "bearing {bearing}: duplicate index in {} and {}",
                    w[0].1.path.display(),
                    w[1].1.path.display()
                ));
            }
        }
        for (i, (_, mut entry)) in entries.into_iter().enumerate() {
            entry.seq_index = i;
            manifest.records.push(entry);
        }
    }

    if manifest.records.is_empty() {
        let msg = format!("no recordings found under {}", root.display());
        warn!("{msg}");
        manifest.warnings.push(msg);
    }
    if !manifest.rejects.is_empty() {
        warn!("{} files did not match the {:?} layout", manifest.rejects.len(), layout);
    }
    Ok(manifest)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for item in rd {
        let item = item.map_err(|e| Error::io(dir, e))?;
        let path = item.path();
        let ft = item.file_type().map_err(|e| Error::io(&path, e))?;
        if ft.is_dir() {
            collect_files(&path, out)?;
        } else if ft.is_file() {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SortKey {
    Number(u64),
    Name(String),
}

type Parsed = std::result::Result<(SortKey, ManifestEntry), String>;

fn components(rel: &Path) -> Vec<String> {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect()
}

fn csv_stem(name: &str) -> Option<&str> {
    let (stem, ext) = name.rsplit_once('.')?;
    ext.eq_ignore_ascii_case("csv").then_some(stem)
}

/// `Bearing1_3` or `1_3` -> ("1_3", "1").
fn parse_bearing_dir(name: &str) -> Option<(String, String)> {
    let id = name.strip_prefix("Bearing").unwrap_or(name);
    let (c, k) = id.split_once('_')?;
    let numeric = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    (numeric(c) && numeric(k)).then(|| (id.to_string(), c.to_string()))
}

fn entry(rel: &Path, bearing_id: String, condition_id: String, rate: f64) -> ManifestEntry {
    ManifestEntry {
        path: rel.to_path_buf(),
        bearing_id,
        condition_id,
        seq_index: 0,
        sampling_rate_hz: rate,
        fault_label: None,
        expected_len: None,
    }
}

const FEMTO_RATE_HZ: f64 = 25_600.0;
const XJTU_RATE_HZ: f64 = 25_600.0;

fn parse_femto(rel: &Path) -> Parsed {
    let parts = components(rel);
    let [.., dir, file] = parts.as_slice() else {
        return Err("file not inside a bearing directory".into());
    };
    let (bearing, condition) =
        parse_bearing_dir(dir).ok_or_else(|| format!("directory {dir:?} is not a bearing id"))?;
    let stem = csv_stem(file).ok_or("not a .csv file")?;
    let n = stem
        .strip_prefix("acc_")
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| format!("file name {file:?} is not acc_<n>.csv"))?;
    Ok((SortKey::Number(n), entry(rel, bearing, condition, FEMTO_RATE_HZ)))
}

fn parse_xjtu(rel: &Path) -> Parsed {
    let parts = components(rel);
    let (condition_dir, dir, file) = match parts.as_slice() {
        [dir, file] => (None, dir, file),
        [cond, dir, file] => (Some(cond.clone()), dir, file),
        _ => return Err("expected [<condition>/]<bearing>/<n>.csv".into()),
    };
    let (bearing, condition) =
        parse_bearing_dir(dir).ok_or_else(|| format!("directory {dir:?} is not a bearing id"))?;
    let stem = csv_stem(file).ok_or("not a .csv file")?;
    let n = stem
        .parse::<u64>()
        .map_err(|_| format!("file name {file:?} is not <n>.csv"))?;
    Ok((
        SortKey::Number(n),
        entry(rel, bearing, condition_dir.unwrap_or(condition), XJTU_RATE_HZ),
    ))
}

fn rate_from_group(group: &str) -> Option<f64> {
    let token = group.split('_').next()?;
    let k = token.strip_suffix('k').or_else(|| token.strip_suffix('K'))?;
    k.parse::<f64>().ok().map(|v| v * 1000.0)
}

fn fault_class(dir: &str) -> Option<&'static str> {
    match dir.to_ascii_uppercase().as_str() {
        "B" | "BALL" => Some("BALL"),
        "IR" => Some("IR"),
        "OR" => Some("OR"),
        _ => None,
    }
}

/// `007` or `0.007` -> `0.007`.
fn diameter(dir: &str) -> Option<String> {
    if let Some(frac) = dir.strip_prefix("0.") {
        return (!frac.is_empty() && frac.bytes().all(|b| b.is_ascii_digit())).then(|| dir.to_string());
    }
    (dir.len() == 3 && dir.bytes().all(|b| b.is_ascii_digit())).then(|| format!("0.{dir}"))
}

const CWRU_NORMAL_RATE_HZ: f64 = 48_000.0;

fn parse_cwru(rel: &Path) -> Parsed {
    let parts = components(rel);
    let file = parts.last().ok_or("empty path")?;
    let stem = csv_stem(file).ok_or("not a .csv file")?.to_string();
    match parts.as_slice() {
        [normal, _] if normal.eq_ignore_ascii_case("normal") => {
            let mut e = entry(rel, format!("Normal/{stem}"), stem.clone(), CWRU_NORMAL_RATE_HZ);
            e.fault_label = Some("Normal".into());
            Ok((SortKey::Name(stem), e))
        }
        [group, normal, _] if normal.eq_ignore_ascii_case("normal") => {
            let rate = rate_from_group(group).ok_or_else(|| format!("group {group:?} lacks a <rate>k token"))?;
            let mut e = entry(rel, format!("{group}/Normal/{stem}"), stem.clone(), rate);
            e.fault_label = Some("Normal".into());
            Ok((SortKey::Name(stem), e))
        }
        [group, fault, diam, _] => {
            let rate = rate_from_group(group).ok_or_else(|| format!("group {group:?} lacks a <rate>k token"))?;
            let class = fault_class(fault).ok_or_else(|| format!("unknown fault directory {fault:?}"))?;
            let inches = diameter(diam).ok_or_else(|| format!("unknown fault diameter {diam:?}"))?;
            let mut e = entry(rel, format!("{group}/{fault}/{diam}"), stem.clone(), rate);
            e.fault_label = Some(format!("{class}/{inches}"));
            Ok((SortKey::Name(stem), e))
        }
        _ => Err("expected <group>/<fault>/<diameter>/<file>.csv or Normal/<file>.csv".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(root: &Path, rel: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, "horizontal\n0.0\n").unwrap();
    }

    #[test]
    fn femto_tree_enumerates_in_acquisition_order() {
        let dir = tempfile::tempdir().unwrap();
        for b in ["Bearing1_1", "Bearing1_2"] {
            // written out of order on purpose
            for n in [3, 1, 5, 2, 4] {
                touch(dir.path(), &format!("Learning_set/{b}/acc_{n:05}.csv"));
            }
        }
        touch(dir.path(), "Learning_set/Bearing1_1/temp_00001.csv");
        let m = scan_dataset(dir.path(), Layout::FemtoLike).unwrap();
        assert_eq!(m.records.len(), 10);
        assert_eq!(m.rejects.len(), 1);
        for b in ["1_1", "1_2"] {
            let seqs: Vec<usize> = m.records.iter().filter(|r| r.bearing_id == b).map(|r| r.seq_index).collect();
            assert_eq!(seqs, vec![0, 1, 2, 3, 4]);
        }
        let first = &m.records[0];
        assert!(first.path.ends_with("acc_00001.csv"));
        assert_eq!(first.condition_id, "1");
        assert_eq!(first.sampling_rate_hz, 25_600.0);
        assert!(first.fault_label.is_none());
    }

    #[test]
    fn cwru_tree_carries_fault_labels() {
        let dir = tempfile::tempdir().unwrap();
        for fault in ["B", "IR", "OR"] {
            for d in ["007", "014", "021"] {
                touch(dir.path(), &format!("12k_Fan/{fault}/{d}/{fault}{d}_0.csv"));
            }
        }
        touch(dir.path(), "Normal/Normal_0.csv");
        let m = scan_dataset(dir.path(), Layout::CwruLike).unwrap();
        assert_eq!(m.records.len(), 10);
        let labels: HashSet<_> = m.records.iter().filter_map(|r| r.fault_label.clone()).collect();
        for class in ["BALL", "IR", "OR"] {
            for inches in ["0.007", "0.014", "0.021"] {
                assert!(labels.contains(&format!("{class}/{inches}")), "{class}/{inches}");
            }
        }
        assert!(labels.contains("Normal"));
        let ir = m.records.iter().find(|r| r.bearing_id == "12k_Fan/IR/021").unwrap();
        assert_eq!(ir.sampling_rate_hz, 12_000.0);
        let normal = m.records.iter().find(|r| r.bearing_id == "Normal/Normal_0").unwrap();
        assert_eq!(normal.sampling_rate_hz, 48_000.0);
    }

    #[test]
    fn xjtu_tree_uses_condition_directory() {
        let dir = tempfile::tempdir().unwrap();
        for n in [10, 2, 1] {
            touch(dir.path(), &format!("35Hz12kN/Bearing1_1/{n}.csv"));
        }
        let m = scan_dataset(dir.path(), Layout::XjtuLike).unwrap();
        let order: Vec<_> = m.records.iter().map(|r| r.path.file_name().unwrap().to_owned()).collect();
        assert_eq!(order, vec!["1.csv", "2.csv", "10.csv"]);
        assert!(m.records.iter().all(|r| r.condition_id == "35Hz12kN"));
    }

    #[test]
    fn empty_directory_is_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        let m = scan_dataset(dir.path(), Layout::FemtoLike).unwrap();
        assert!(m.records.is_empty());
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn missing_root_is_io_error() {
        let err = scan_dataset(Path::new("/definitely/not/here"), Layout::XjtuLike).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn repeated_scans_are_identical_and_manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for n in 1..=3 {
            touch(dir.path(), &format!("Bearing2_1/acc_{n:05}.csv"));
        }
        let a = scan_dataset(dir.path(), Layout::FemtoLike).unwrap();
        let b = scan_dataset(dir.path(), Layout::FemtoLike).unwrap();
        assert_eq!(a, b);
        let path = dir.path().join("m.json");
        a.save(&path).unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap(), a);
    }

    #[test]
    fn validate_rejects_duplicates() {
        let mut m = DatasetManifest::new("x", "/tmp");
        let e = entry(Path::new("a.csv"), "1_1".into(), "1".into(), 1.0);
        m.records.push(e.clone());
        m.records.push(e);
        assert!(m.validate(false).is_err());
    }
}
