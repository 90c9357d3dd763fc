//! Loading vibration recordings into [`WaveformRecord`]s.
//!
//! Three on-disk layouts are recognized by [`scan_dataset`]; see
//! [`manifest`] for the directory conventions. Waveforms are delimited text,
//! manifests are JSON.

pub mod manifest;
pub mod resample;
pub mod waveform;

use serde::{Deserialize, Serialize};

pub use manifest::{scan_dataset, DatasetManifest, Layout, ManifestEntry, Reject};
pub use resample::{design_lowpass, downsample, ANTI_ALIAS_TAPS};
pub use waveform::{load_waveform, write_waveform_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// One acquired vibration snapshot, samples in g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    pub bearing_id: String,
    pub condition_id: String,
    pub seq_index: usize,
    pub samples: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub fault_label: Option<String>,
    pub axis: Axis,
}

impl WaveformRecord {
    /// Largest absolute sample value.
    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }

    /// Short identity used in diagnostics, e.g. `1_1#17`.
    pub fn ident(&self) -> String {
        format!("{}#{}", self.bearing_id, self.seq_index)
    }
}
