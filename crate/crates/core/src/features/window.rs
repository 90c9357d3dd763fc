use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::WaveformRecord;

/// Window length in samples and fractional overlap between neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub overlap_fraction: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            length: 2048,
            overlap_fraction: 0.25,
        }
    }
}

impl WindowSpec {
    pub fn new(length: usize, overlap_fraction: f64) -> Result<Self> {
        let spec = WindowSpec {
            length,
            overlap_fraction,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!(
                "overlap fraction {} outside [0, 1)",
                self.overlap_fraction
            )));
        }
        if self.hop() == 0 {
            return Err(Error::Config("window hop rounds to zero".into()));
        }
        Ok(())
    }

    /// `round(length * (1 - overlap))`.
    pub fn hop(&self) -> usize {
        (self.length as f64 * (1.0 - self.overlap_fraction)).round() as usize
    }

    /// `floor((n - length) / hop) + 1`, or 0 when `n < length`.
    pub fn count(&self, n: usize) -> usize {
        if n < self.length {
            0
        } else {
            (n - self.length) / self.hop() + 1
        }
    }

    pub fn starts(&self, n: usize) -> impl Iterator<Item = usize> {
        let hop = self.hop();
        (0..self.count(n)).map(move |i| i * hop)
    }
}

/// Split a record into windows; the trailing remainder shorter than a hop is
/// dropped.
pub fn segment<'a>(record: &'a WaveformRecord, spec: &WindowSpec) -> Result<Vec<&'a [f64]>> {
    spec.validate()?;
    let n = record.samples.len();
    if n < spec.length {
        return Err(Error::WindowTooLong {
            record: record.ident(),
            len: n,
            window: spec.length,
        });
    }
    Ok(spec
        .starts(n)
        .map(|s| &record.samples[s..s + spec.length])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Axis;
    use proptest::prelude::*;

    fn record(n: usize) -> WaveformRecord {
        WaveformRecord {
            bearing_id: "1_1".into(),
            condition_id: "1".into(),
            seq_index: 3,
            samples: (0..n).map(|i| i as f64).collect(),
            sampling_rate_hz: 25_600.0,
            fault_label: None,
            axis: Axis::Horizontal,
        }
    }

    #[test]
    fn femto_and_xjtu_window_counts() {
        let spec = WindowSpec::default();
        assert_eq!(spec.hop(), 1536);
        assert_eq!(segment(&record(2560), &spec).unwrap().len(), 1);
        assert_eq!(segment(&record(32768), &spec).unwrap().len(), 21);
    }

    #[test]
    fn short_record_is_an_error() {
        let err = segment(&record(2047), &WindowSpec::default()).unwrap_err();
        match err {
            Error::WindowTooLong { record, .. } => assert_eq!(record, "1_1#3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(WindowSpec::new(0, 0.0).is_err());
        assert!(WindowSpec::new(16, 1.0).is_err());
        assert!(WindowSpec::new(2, 0.9).is_err());
    }

    proptest! {
        #[test]
        fn window_count_formula(n in 1usize..5000, len in 1usize..600, overlap in 0.0f64..0.95) {
            let spec = WindowSpec { length: len, overlap_fraction: overlap };
            prop_assume!(spec.hop() >= 1);
            let rec = record(n);
            match segment(&rec, &spec) {
                Ok(ws) => {
                    prop_assert!(n >= len);
                    prop_assert_eq!(ws.len(), (n - len) / spec.hop() + 1);
                    let last_end = (ws.len() - 1) * spec.hop() + len;
                    prop_assert!(last_end <= n);
                    prop_assert!(n - last_end < spec.hop());
                    for (i, w) in ws.iter().enumerate() {
                        prop_assert_eq!(w.len(), len);
                        prop_assert_eq!(w[0], (i * spec.hop()) as f64);
                    }
                }
                Err(_) => prop_assert!(n < len),
            }
        }
    }
}
