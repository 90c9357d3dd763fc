use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::WaveformRecord;
use crate::labeling::{Label, LabelAssignment, LabelEntry, LabelMethod};

/// First-exceedance labeling of one bearing's waveform sequence.
///
/// The onset is the first waveform whose largest absolute sample is strictly
/// above `threshold_g`; it and every later waveform are `failure`, earlier
/// ones `normal`. Entries are waveform-level (they cover every window).
pub fn threshold_label(records: &[WaveformRecord], threshold_g: f64) -> Result<LabelAssignment> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidInput("threshold labeling needs at least one waveform".into()))?;
    if !(threshold_g > 0.0) {
        return Err(Error::Config(format!("threshold must be positive, got {threshold_g}")));
    }
    for w in records.windows(2) {
        if w[1].bearing_id != first.bearing_id {
            return Err(Error::InvalidInput("threshold labeling takes a single bearing".into()));
        }
        if w[1].seq_index <= w[0].seq_index {
            return Err(Error::InvalidInput(format!(
                "bearing {}: records not in acquisition order at seq {}",
                first.bearing_id, w[1].seq_index
            )));
        }
    }
    let onset = records
        .iter()
        .find(|r| r.peak_abs() > threshold_g)
        .map(|r| r.seq_index);
    let entries = records
        .iter()
        .map(|r| LabelEntry {
            seq_index: r.seq_index,
            window_index: None,
            label: match onset {
                Some(o) if r.seq_index >= o => Label::Failure,
                _ => Label::Normal,
            },
        })
        .collect();
    Ok(LabelAssignment {
        bearing_id: first.bearing_id.clone(),
        method: LabelMethod::Threshold,
        params: json!({ "threshold_g": threshold_g }),
        onset_seq_index: onset,
        entries,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Axis;
    use proptest::prelude::*;

    fn with_peaks(peaks: &[f64]) -> Vec<WaveformRecord> {
        peaks
            .iter()
            .enumerate()
            .map(|(i, &p)| WaveformRecord {
                bearing_id: "1_1".into(),
                condition_id: "1".into(),
                seq_index: i,
                samples: vec![0.1, -p, 0.5 * p],
                sampling_rate_hz: 1.0,
                fault_label: None,
                axis: Axis::Horizontal,
            })
            .collect()
    }

    fn pattern(a: &LabelAssignment) -> String {
        a.entries
            .iter()
            .map(|e| if e.label == Label::Failure { 'F' } else { 'N' })
            .collect()
    }

    #[test]
    fn first_exceedance() {
        let recs = with_peaks(&[1.0, 2.0, 6.0, 3.0, 12.0]);
        let ten = threshold_label(&recs, 10.0).unwrap();
        assert_eq!(ten.onset_seq_index, Some(4));
        assert_eq!(pattern(&ten), "NNNNF");
        let five = threshold_label(&recs, 5.0).unwrap();
        assert_eq!(five.onset_seq_index, Some(2));
        assert_eq!(pattern(&five), "NNFFF");
    }

    #[test]
    fn no_exceedance() {
        let a = threshold_label(&with_peaks(&[1.0, 2.0, 3.0]), 10.0).unwrap();
        assert_eq!(a.onset_seq_index, None);
        assert_eq!(pattern(&a), "NNN");
    }

    #[test]
    fn empty_and_unordered_inputs() {
        assert!(threshold_label(&[], 5.0).is_err());
        let mut recs = with_peaks(&[1.0, 2.0]);
        recs.swap(0, 1);
        assert!(threshold_label(&recs, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn labels_are_monotone(peaks in proptest::collection::vec(0.0f64..20.0, 1..60), thr in 0.5f64..15.0) {
            let p = pattern(&threshold_label(&with_peaks(&peaks), thr).unwrap());
            let first_f = p.find('F').unwrap_or(p.len());
            prop_assert!(p[first_f..].chars().all(|c| c == 'F'));
            prop_assert!(p[..first_f].chars().all(|c| c == 'N'));
        }
    }
}
