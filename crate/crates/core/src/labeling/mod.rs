//! Class labels for windows: threshold and PCA/k-means segmentation of
//! run-to-failure sequences, or pass-through of declared fault labels.

pub mod declared;
pub mod io;
pub mod kmeans;
pub mod pca;
pub mod pca_kmeans;
pub mod threshold;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSample, SampleKey};

pub use declared::{declared_labels, DeclaredLabels};
pub use io::{read_labels, write_labels};
pub use pca_kmeans::{pca_kmeans_label, PcaKmeansParams};
pub use threshold::threshold_label;

/// A class label. Ordering (used for vocabularies) puts `Normal` first, then
/// `Failure`, then named fault classes alphabetically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum Label {
    Normal,
    Failure,
    Fault(String),
}

impl Label {
    pub fn is_normal(&self) -> bool {
        matches!(self, Label::Normal)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Normal => f.write_str("normal"),
            Label::Failure => f.write_str("failure"),
            Label::Fault(name) => f.write_str(name),
        }
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        if s.eq_ignore_ascii_case("normal") {
            Label::Normal
        } else if s.eq_ignore_ascii_case("failure") {
            Label::Failure
        } else {
            Label::Fault(s.to_string())
        }
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::from(s.as_str())
    }
}

impl From<Label> for String {
    fn from(l: Label) -> Self {
        l.to_string()
    }
}

impl std::str::FromStr for Label {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(Label::from(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMethod {
    Threshold,
    PcaKmeans,
    Declared,
}

impl fmt::Display for LabelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMethod::Threshold => "threshold",
            LabelMethod::PcaKmeans => "pca_kmeans",
            LabelMethod::Declared => "declared",
        })
    }
}

/// A label for one window, or for every window of a waveform when
/// `window_index` is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub seq_index: usize,
    pub window_index: Option<usize>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub bearing_id: String,
    pub method: LabelMethod,
    pub params: serde_json::Value,
    pub onset_seq_index: Option<usize>,
    pub entries: Vec<LabelEntry>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl LabelAssignment {
    /// Label for a window: an exact window entry wins over a waveform-level one.
    pub fn lookup(&self, seq_index: usize, window_index: usize) -> Option<&Label> {
        let mut waveform_level = None;
        for e in &self.entries {
            if e.seq_index == seq_index {
                match e.window_index {
                    Some(w) if w == window_index => return Some(&e.label),
                    None => waveform_level = Some(&e.label),
                    _ => {}
                }
            }
        }
        waveform_level
    }

    /// Distinct labels, in vocabulary order.
    pub fn classes(&self) -> Vec<Label> {
        let mut c: Vec<Label> = self.entries.iter().map(|e| e.label.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Replace every fault class with `failure`.
    pub fn binarize(&self) -> LabelAssignment {
        let mut out = self.clone();
        for e in &mut out.entries {
            if !e.label.is_normal() {
                e.label = Label::Failure;
            }
        }
        out
    }

    /// Replace `failure` with a named fault class, leaving normal windows as
    /// they are.
    pub fn with_fault_class(&self, class: &Label) -> LabelAssignment {
        let mut out = self.clone();
        for e in &mut out.entries {
            if e.label == Label::Failure {
                e.label = class.clone();
            }
        }
        out
    }
}

/// Free-function form of [`LabelAssignment::binarize`].
pub fn binarize(assignment: &LabelAssignment) -> LabelAssignment {
    assignment.binarize()
}

/// Index over many assignments for joining labels onto feature samples.
#[derive(Debug, Default)]
pub struct LabelIndex<'a> {
    by_bearing: HashMap<&'a str, &'a LabelAssignment>,
}

impl<'a> LabelIndex<'a> {
    pub fn new(assignments: &'a [LabelAssignment]) -> Self {
        LabelIndex {
            by_bearing: assignments.iter().map(|a| (a.bearing_id.as_str(), a)).collect(),
        }
    }

    pub fn get(&self, key: &SampleKey) -> Option<&'a Label> {
        self.by_bearing
            .get(key.bearing_id.as_str())
            .and_then(|a| a.lookup(key.seq_index, key.window_index))
    }

    /// Label every sample, failing on the first one with no label.
    pub fn label_samples(&self, samples: &[FeatureSample]) -> Result<Vec<Label>> {
        samples
            .iter()
            .map(|s| {
                self.get(&s.key()).cloned().ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "no label for {} seq {} window {}",
                        s.bearing_id, s.waveform_seq_index, s.window_index
                    ))
                })
            })
            .collect()
    }
}
