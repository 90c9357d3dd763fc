//! Windowing and the three feature families.

pub mod io;
pub mod spectral;
pub mod time;
pub mod window;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::WaveformRecord;

pub use io::{read_features, write_features, FeatureSidecar};
pub use spectral::{hann, rfft_features, stft_features, StftSpec};
pub use time::{time_features, TimeFeatures, TIME_FEATURE_NAMES};
pub use window::{segment, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureFamily {
    Time,
    Rfft,
    Stft,
}

impl FeatureFamily {
    pub const ALL: [FeatureFamily; 3] = [FeatureFamily::Rfft, FeatureFamily::Time, FeatureFamily::Stft];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Time => "TIME",
            FeatureFamily::Rfft => "RFFT",
            FeatureFamily::Stft => "STFT",
        }
    }

    pub fn dimension(self, window_len: usize, stft: &StftSpec) -> usize {
        match self {
            FeatureFamily::Time => TIME_FEATURE_NAMES.len(),
            FeatureFamily::Rfft => window_len / 2 + 1,
            FeatureFamily::Stft => stft.output_len(window_len),
        }
    }

    /// Column names for a feature vector of this family.
    pub fn column_names(self, window_len: usize, stft: &StftSpec) -> Vec<String> {
        match self {
            FeatureFamily::Time => TIME_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            FeatureFamily::Rfft => (0..=window_len / 2).map(|k| format!("bin_{k}")).collect(),
            FeatureFamily::Stft => (0..stft.frames(window_len))
                .flat_map(|f| (0..stft.bins()).map(move |k| format!("t{f}_bin_{k}")))
                .collect(),
        }
    }
}

impl std::fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TIME" => Ok(FeatureFamily::Time),
            "RFFT" => Ok(FeatureFamily::Rfft),
            "STFT" => Ok(FeatureFamily::Stft),
            other => Err(Error::Config(format!("unknown feature family {other:?}"))),
        }
    }
}

/// Identity of one window: (bearing, waveform, window).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub bearing_id: String,
    pub seq_index: usize,
    pub window_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSample {
    pub bearing_id: String,
    pub condition_id: String,
    pub waveform_seq_index: usize,
    pub window_index: usize,
    pub window_start_time_s: f64,
    pub family: FeatureFamily,
    pub values: Vec<f64>,
}

impl FeatureSample {
    pub fn key(&self) -> SampleKey {
        SampleKey {
            bearing_id: self.bearing_id.clone(),
            seq_index: self.waveform_seq_index,
            window_index: self.window_index,
        }
    }

    fn ident(&self) -> String {
        format!("{}#{}/w{}", self.bearing_id, self.waveform_seq_index, self.window_index)
    }
}

/// Compute one family's vector for a single window.
pub fn featurize_window(window: &[f64], family: FeatureFamily, stft: &StftSpec) -> Result<Vec<f64>> {
    match family {
        FeatureFamily::Time => Ok(time_features(window)?.values.to_vec()),
        FeatureFamily::Rfft => Ok(rfft_features(window)),
        FeatureFamily::Stft => stft_features(window, stft),
    }
}

/// Window every record and compute `family` features, ordered by
/// (bearing, seq, window). Windows are absolute-timed relative to the start
/// of their waveform. Any non-finite value fails the extraction.
pub fn extract(
    records: &[WaveformRecord],
    family: FeatureFamily,
    window: &WindowSpec,
    stft: &StftSpec,
) -> Result<Vec<FeatureSample>> {
    window.validate()?;
    if family == FeatureFamily::Stft {
        stft.validate(window.length)?;
    }
    let per_record: Vec<Vec<FeatureSample>> = records
        .par_iter()
        .map(|rec| {
            let windows = segment(rec, window)?;
            windows
                .iter()
                .enumerate()
                .map(|(w, win)| {
                    let values = featurize_window(win, family, stft)?;
                    let sample = FeatureSample {
                        bearing_id: rec.bearing_id.clone(),
                        condition_id: rec.condition_id.clone(),
                        waveform_seq_index: rec.seq_index,
                        window_index: w,
                        window_start_time_s: (w * window.hop()) as f64 / rec.sampling_rate_hz,
                        family,
                        values,
                    };
                    if let Some(i) = sample.values.iter().position(|v| !v.is_finite()) {
                        let feature = family
                            .column_names(window.length, stft)
                            .get(i)
                            .cloned()
                            .unwrap_or_else(|| i.to_string());
                        return Err(Error::NonFinite {
                            sample: sample.ident(),
                            feature,
                        });
                    }
                    Ok(sample)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples: Vec<FeatureSample> = per_record.into_iter().flatten().collect();
    samples.sort_by(|a, b| {
        (&a.bearing_id, a.waveform_seq_index, a.window_index).cmp(&(&b.bearing_id, b.waveform_seq_index, b.window_index))
    });
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Axis;

    fn records(n: usize, len: usize) -> Vec<WaveformRecord> {
        (0..n)
            .rev()
            .map(|i| WaveformRecord {
                bearing_id: "2_1".into(),
                condition_id: "2".into(),
                seq_index: i,
                samples: (0..len).map(|t| ((t * (i + 1)) as f64 * 0.01).sin()).collect(),
                sampling_rate_hz: 25_600.0,
                fault_label: None,
                axis: Axis::Horizontal,
            })
            .collect()
    }

    #[test]
    fn xjtu_shaped_counts() {
        let recs = records(10, 32768);
        let out = extract(&recs, FeatureFamily::Time, &WindowSpec::default(), &StftSpec::default()).unwrap();
        assert_eq!(out.len(), 210);
        assert!(out.iter().all(|s| s.values.len() == 12));
        // canonical order regardless of input order
        assert_eq!(out[0].waveform_seq_index, 0);
        assert_eq!(out[20].window_index, 20);
        assert_eq!(out[21].waveform_seq_index, 1);
        assert!((out[1].window_start_time_s - 1536.0 / 25_600.0).abs() < 1e-15);
    }

    #[test]
    fn femto_shaped_counts() {
        let recs = records(3, 2560);
        let out = extract(&recs, FeatureFamily::Rfft, &WindowSpec::default(), &StftSpec::default()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|s| s.values.len() == 1025));
        let stft = extract(&recs, FeatureFamily::Stft, &WindowSpec::default(), &StftSpec::default()).unwrap();
        assert!(stft.iter().all(|s| s.values.len() == FeatureFamily::Stft.dimension(2048, &StftSpec::default())));
    }

    #[test]
    fn extraction_is_deterministic_across_thread_counts() {
        let recs = records(6, 4096);
        let spec = WindowSpec::new(1024, 0.25).unwrap();
        let a = extract(&recs, FeatureFamily::Time, &spec, &StftSpec::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| extract(&recs, FeatureFamily::Time, &spec, &StftSpec::default()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn short_record_propagates_identity() {
        let recs = records(1, 100);
        let err = extract(&recs, FeatureFamily::Rfft, &WindowSpec::default(), &StftSpec::default()).unwrap_err();
        assert!(err.to_string().contains("2_1#0"));
    }
}
