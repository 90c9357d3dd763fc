use std::collections::BTreeMap;

use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::{ManifestEntry, WaveformRecord};
use crate::labeling::{Label, LabelAssignment, LabelEntry, LabelMethod};

#[derive(Debug, Clone, PartialEq)]
pub struct DeclaredLabels {
    /// One assignment per bearing, sorted by bearing id.
    pub assignments: Vec<LabelAssignment>,
    /// Distinct classes in vocabulary order.
    pub classes: Vec<Label>,
    pub warnings: Vec<String>,
}

/// Class of a declared fault label. A size or location suffix after `/`
/// is dropped (`BALL/0.007` is class `BALL`); `Normal` in any case maps to
/// the normal class.
pub fn fault_class(raw: &str) -> Label {
    let class = raw.split('/').next().unwrap_or(raw).trim();
    Label::from(class)
}

/// Pass declared fault labels through as waveform-level labels.
pub fn declared_labels(entries: &[ManifestEntry]) -> Result<DeclaredLabels> {
    build(
        entries
            .iter()
            .map(|e| (e.bearing_id.as_str(), e.seq_index, e.fault_label.as_deref(), e.path.display().to_string())),
    )
}

/// As [`declared_labels`], reading labels carried by loaded records.
pub fn declared_from_records(records: &[WaveformRecord]) -> Result<DeclaredLabels> {
    build(
        records
            .iter()
            .map(|r| (r.bearing_id.as_str(), r.seq_index, r.fault_label.as_deref(), r.ident())),
    )
}

fn build<'a>(items: impl Iterator<Item = (&'a str, usize, Option<&'a str>, String)>) -> Result<DeclaredLabels> {
    let mut by_bearing: BTreeMap<&str, Vec<LabelEntry>> = BTreeMap::new();
    for (bearing, seq, label, what) in items {
        let raw = label.ok_or_else(|| Error::InvalidInput(format!("{what}: no declared fault label")))?;
        by_bearing.entry(bearing).or_default().push(LabelEntry {
            seq_index: seq,
            window_index: None,
            label: fault_class(raw),
        });
    }
    if by_bearing.is_empty() {
        return Err(Error::InvalidInput("no records to label".into()));
    }
    let mut classes = Vec::new();
    let assignments: Vec<LabelAssignment> = by_bearing
        .into_iter()
        .map(|(bearing, mut entries)| {
            entries.sort_by_key(|e| e.seq_index);
            classes.extend(entries.iter().map(|e| e.label.clone()));
            LabelAssignment {
                bearing_id: bearing.to_string(),
                method: LabelMethod::Declared,
                params: json!({}),
                onset_seq_index: None,
                entries,
                warnings: Vec::new(),
            }
        })
        .collect();
    classes.sort();
    classes.dedup();
    let mut warnings = Vec::new();
    if classes.len() < 2 {
        let w = format!("declared labels contain a single class ({}); unusable for training", classes[0]);
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(DeclaredLabels {
        assignments,
        classes,
        warnings,
    })
}

/// Documented failure modes of the XJTU-SY run-to-failure bearings.
pub fn xjtu_fault_types() -> BTreeMap<String, String> {
    [
        ("1_1", "OR"),
        ("1_2", "OR"),
        ("1_3", "OR"),
        ("1_4", "CAGE"),
        ("1_5", "IR and OR"),
        ("2_1", "IR"),
        ("2_2", "OR"),
        ("2_3", "CAGE"),
        ("2_4", "OR"),
        ("2_5", "OR"),
        ("3_1", "OR"),
        ("3_2", "COBI"),
        ("3_3", "IR"),
        ("3_4", "IR"),
        ("3_5", "OR"),
    ]
    .into_iter()
    .map(|(b, f)| (b.to_string(), f.to_string()))
    .collect()
}

/// Replace `failure` in each run-to-failure assignment with the bearing's
/// documented fault type. Every bearing must appear in `fault_types`.
pub fn apply_fault_types(
    assignments: &[LabelAssignment],
    fault_types: &BTreeMap<String, String>,
) -> Result<Vec<LabelAssignment>> {
    let missing: Vec<String> = assignments
        .iter()
        .filter(|a| !fault_types.contains_key(&a.bearing_id))
        .map(|a| a.bearing_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingBearings(missing));
    }
    Ok(assignments
        .iter()
        .map(|a| a.with_fault_class(&Label::from(fault_types[&a.bearing_id].as_str())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn entry(bearing: &str, seq: usize, label: Option<&str>) -> ManifestEntry {
        ManifestEntry {
            path: PathBuf::from(format!("{bearing}/{seq}.csv")),
            bearing_id: bearing.into(),
            condition_id: "0".into(),
            seq_index: seq,
            sampling_rate_hz: 12_000.0,
            fault_label: label.map(str::to_string),
            expected_len: None,
        }
    }

    #[test]
    fn cwru_like_four_classes() {
        let entries = vec![
            entry("12k_Drive/OR/007", 0, Some("OR/0.007")),
            entry("12k_Drive/IR/007", 0, Some("IR/0.007")),
            entry("12k_Drive/B/007", 0, Some("BALL/0.007")),
            entry("12k_Drive/B/014", 0, Some("BALL/0.014")),
            entry("Normal/0", 0, Some("Normal")),
        ];
        let d = declared_labels(&entries).unwrap();
        let names: Vec<String> = d.classes.iter().map(|c| c.to_string()).collect();
        assert_eq!(names, vec!["normal", "BALL", "IR", "OR"]);
        assert!(d.warnings.is_empty());
        assert_eq!(d.assignments.len(), 5);
    }

    #[test]
    fn xjtu_like_six_classes() {
        let entries: Vec<ManifestEntry> = ["OR", "IR", "CAGE", "IR and OR", "COBI", "Normal"]
            .iter()
            .enumerate()
            .map(|(i, l)| entry(&format!("b{i}"), 0, Some(l)))
            .collect();
        let d = declared_labels(&entries).unwrap();
        assert_eq!(d.classes.len(), 6);
        assert!(d.classes.contains(&Label::Fault("IR and OR".into())));
    }

    #[test]
    fn all_normal_warns() {
        let d = declared_labels(&[entry("n", 0, Some("normal")), entry("n", 1, Some("Normal"))]).unwrap();
        assert_eq!(d.classes, vec![Label::Normal]);
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn missing_label_is_an_error() {
        let err = declared_labels(&[entry("a", 0, Some("IR")), entry("a", 1, None)]).unwrap_err();
        assert!(err.to_string().contains("a/1.csv"));
    }

    #[test]
    fn multiclass_counts_binarize_to_their_sum() {
        // per-class failure window counts: OR, IR, CAGE, COBI, IR and OR
        let counts = [("OR", 4928), ("IR", 1152), ("CAGE", 3136), ("COBI", 32), ("IR and OR", 2832)];
        let mut entries = Vec::new();
        for (class, n) in counts {
            for i in 0..n {
                entries.push(entry(class, i, Some(class)));
            }
        }
        let d = declared_labels(&entries).unwrap();
        let failures: usize = d
            .assignments
            .iter()
            .map(|a| a.binarize().entries.iter().filter(|e| e.label == Label::Failure).count())
            .sum();
        assert_eq!(failures, 12_080);
        assert_ne!(failures, 12_032);
    }

    #[test]
    fn fault_types_replace_failure() {
        let a = LabelAssignment {
            bearing_id: "1_4".into(),
            method: LabelMethod::Threshold,
            params: json!({}),
            onset_seq_index: Some(1),
            entries: vec![
                LabelEntry { seq_index: 0, window_index: None, label: Label::Normal },
                LabelEntry { seq_index: 1, window_index: None, label: Label::Failure },
            ],
            warnings: vec![],
        };
        let out = apply_fault_types(&[a.clone()], &xjtu_fault_types()).unwrap();
        assert_eq!(out[0].entries[1].label, Label::Fault("CAGE".into()));
        assert_eq!(out[0].entries[0].label, Label::Normal);

        let mut other = a;
        other.bearing_id = "9_9".into();
        assert!(matches!(
            apply_fault_types(&[other], &xjtu_fault_types()),
            Err(Error::MissingBearings(_))
        ));
    }
}
