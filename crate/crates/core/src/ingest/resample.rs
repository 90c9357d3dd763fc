//! Integer-factor decimation with a windowed-sinc anti-aliasing filter.
//!
//! The filter is a 127-tap linear-phase FIR low-pass (Hamming window) with
//! its cutoff at 0.8 of the new Nyquist frequency and unity DC gain. The
//! filter is centered on each retained sample, so there is no group delay:
//! output sample `m` is `sum_k h[k] * x[m*D + 63 - k]`, with samples outside
//! the record treated as zero. Output length is `ceil(N / D)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ingest::WaveformRecord;

pub const ANTI_ALIAS_TAPS: usize = 127;
const CUTOFF_OF_NYQUIST: f64 = 0.8;

/// Windowed-sinc low-pass; `cutoff` is in cycles per sample (0 < cutoff < 0.5).
pub fn design_lowpass(taps: usize, cutoff: f64) -> Vec<f64> {
    assert!(taps % 2 == 1, "odd tap count keeps the filter symmetric about a sample");
    let mid = (taps / 2) as f64;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|c| *c /= sum);
    h
}

fn decimation_factor(source: f64, target: f64) -> Result<usize> {
    if !(target > 0.0) || !(source > 0.0) {
        return Err(Error::UnsupportedRate(format!("rates must be positive ({source} -> {target})")));
    }
    let ratio = source / target;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(Error::UnsupportedRate(format!(
            "{source} Hz -> {target} Hz is not an integer decimation"
        )));
    }
    Ok(factor as usize)
}

pub fn downsample(record: &WaveformRecord, target_rate_hz: f64) -> Result<WaveformRecord> {
    let factor = decimation_factor(record.sampling_rate_hz, target_rate_hz)?;
    if factor == 1 {
        return Ok(record.clone());
    }
    let cutoff = CUTOFF_OF_NYQUIST * 0.5 / factor as f64;
    let h = design_lowpass(ANTI_ALIAS_TAPS, cutoff);
    let x = &record.samples;
    let half = (ANTI_ALIAS_TAPS / 2) as isize;
    let n = x.len() as isize;
    let out_len = x.len().div_ceil(factor);
    let samples = (0..out_len)
        .map(|m| {
            let center = (m * factor) as isize;
            h.iter()
                .enumerate()
                .map(|(k, c)| {
                    let idx = center + half - k as isize;
                    if (0..n).contains(&idx) {
                        c * x[idx as usize]
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    Ok(WaveformRecord {
        samples,
        sampling_rate_hz: target_rate_hz,
        ..record.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Axis;

    fn tone(freq: f64, rate: f64, n: usize) -> WaveformRecord {
        WaveformRecord {
            bearing_id: "x".into(),
            condition_id: "c".into(),
            seq_index: 0,
            samples: (0..n).map(|i| (2.0 * PI * freq * i as f64 / rate).sin()).collect(),
            sampling_rate_hz: rate,
            fault_label: None,
            axis: Axis::Horizontal,
        }
    }

    /// Amplitude of the component at `freq` over the interior of `x` (edges
    /// trimmed to avoid the zero-padded transient), by direct correlation.
    fn tone_amplitude(x: &[f64], rate: f64, freq: f64, trim: usize) -> f64 {
        let x = &x[trim..x.len() - trim];
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * i as f64 / rate;
            re += v * ph.cos();
            im += v * ph.sin();
        }
        2.0 * (re * re + im * im).sqrt() / x.len() as f64
    }

    fn dominant_frequency(x: &[f64], rate: f64) -> f64 {
        let n = x.len();
        (1..n / 2)
            .map(|k| {
                let f = k as f64 * rate / n as f64;
                (f, tone_amplitude(x, rate, f, 0))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    #[test]
    fn factor_one_is_identity() {
        let r = tone(1000.0, 12_000.0, 500);
        assert_eq!(downsample(&r, 12_000.0).unwrap(), r);
    }

    #[test]
    fn non_integer_factor_is_rejected() {
        let r = tone(1000.0, 25_600.0, 100);
        assert!(matches!(downsample(&r, 12_000.0), Err(Error::UnsupportedRate(_))));
        assert!(matches!(downsample(&r, 51_200.0), Err(Error::UnsupportedRate(_))));
    }

    #[test]
    fn passband_tone_survives() {
        let r = tone(1000.0, 48_000.0, 4800);
        let d = downsample(&r, 12_000.0).unwrap();
        assert_eq!(d.samples.len(), 1200);
        assert_eq!(d.sampling_rate_hz, 12_000.0);
        assert!((dominant_frequency(&d.samples, 12_000.0) - 1000.0).abs() < 1e-9);
        assert!((tone_amplitude(&d.samples, 12_000.0, 1000.0, 40) - 1.0).abs() < 0.01);
    }

    #[test]
    fn alias_is_suppressed_relative_to_naive_decimation() {
        // 7 kHz folds to 5 kHz at a 12 kHz output rate.
        let r = tone(7000.0, 48_000.0, 48_000);
        let filtered = downsample(&r, 12_000.0).unwrap();
        let naive: Vec<f64> = r.samples.iter().step_by(4).copied().collect();
        let trim = 32;
        let a_filtered = tone_amplitude(&filtered.samples, 12_000.0, 5000.0, trim);
        let a_naive = tone_amplitude(&naive, 12_000.0, 5000.0, trim);
        let suppression_db = 20.0 * (a_naive / a_filtered).log10();
        assert!(a_naive > 0.9, "naive decimation keeps the alias at full strength");
        assert!(suppression_db >= 40.0, "suppression {suppression_db:.1} dB");
    }

    #[test]
    fn output_length_rounds_up() {
        for n in [1, 3, 4, 5, 127, 1001] {
            let d = downsample(&tone(10.0, 48_000.0, n), 12_000.0).unwrap();
            assert_eq!(d.samples.len(), n.div_ceil(4));
        }
    }

    #[test]
    fn zero_padding_at_the_edges() {
        // A constant input is attenuated only where the filter overhangs the record.
        let mut r = tone(0.0, 48_000.0, 4000);
        r.samples.iter_mut().for_each(|x| *x = 1.0);
        let d = downsample(&r, 12_000.0).unwrap();
        let h = design_lowpass(ANTI_ALIAS_TAPS, 0.1);
        let expected_first: f64 = h[..=63].iter().sum();
        assert!((d.samples[0] - expected_first).abs() < 1e-12);
        assert!((d.samples[500] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_commutes() {
        let r = tone(3100.0, 48_000.0, 1000);
        let mut scaled = r.clone();
        scaled.samples.iter_mut().for_each(|x| *x *= -3.7);
        let a = downsample(&r, 12_000.0).unwrap();
        let b = downsample(&scaled, 12_000.0).unwrap();
        let scale = b.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((y - (-3.7) * x).abs() <= 1e-9 * scale);
        }
    }
}
