//! Synthetic vibration datasets with known ground truth.
//!
//! Each waveform is the sum of
//!
//! - white Gaussian noise with standard deviation `noise_sigma_g`,
//! - a shaft tone of amplitude `shaft_amplitude_g` at `shaft_hz` with a
//!   random phase per waveform,
//! - for faulted waveforms, a train of impacts repeating at
//!   `fault_char_freq_hz`. Each impact is an exponentially decaying sinusoid
//!   at the carrier (resonance) frequency, scaled so its continuous peak equals
//!   the impact amplitude. Impact times are `offset + k*T + j_k*0.01*T` with
//!   `j_k` uniform in `[-1, 1)`, so the jitter does not accumulate.
//!
//! Impact amplitude is `noise_sigma_g * 10^(impulse_snr_db / 20)` for
//! injected faults. In a run-to-failure sequence it starts at that value at
//! the onset waveform `floor(onset_fraction * n_waveforms)` and grows
//! linearly or geometrically to `end_amplitude_g` at the last waveform.
//!
//! Waveform `i` draws from [`Stream::new(seed, i)`](crate::rng::Stream), so
//! output is independent of generation order.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_waveform_csv, Axis, WaveformRecord};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultType {
    None,
    InnerRace,
    OuterRace,
    Ball,
    Cage,
    Compound,
}

impl FaultType {
    /// Class name used for declared labels.
    pub fn label(self) -> &'static str {
        match self {
            FaultType::None => "Normal",
            FaultType::InnerRace => "IR",
            FaultType::OuterRace => "OR",
            FaultType::Ball => "BALL",
            FaultType::Cage => "CAGE",
            FaultType::Compound => "COBI",
        }
    }

    fn default_carrier_hz(self) -> f64 {
        match self {
            FaultType::None => 0.0,
            FaultType::InnerRace => 3000.0,
            FaultType::OuterRace => 4000.0,
            FaultType::Ball => 5000.0,
            FaultType::Cage => 2000.0,
            FaultType::Compound => 3500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub onset_fraction: f64,
    pub growth: Growth,
    pub end_amplitude_g: f64,
}

fn default_shaft_amplitude() -> f64 {
    0.5
}
fn default_decay() -> f64 {
    0.0015
}
fn default_bearing() -> String {
    "1_1".into()
}
fn default_condition() -> String {
    "1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub shaft_hz: f64,
    pub sampling_rate_hz: f64,
    pub fault_type: FaultType,
    pub fault_char_freq_hz: f64,
    pub impulse_snr_db: f64,
    #[serde(default)]
    pub degradation: Option<Degradation>,
    pub noise_sigma_g: f64,
    pub n_waveforms: usize,
    pub waveform_len: usize,
    pub seed: u64,
    /// Resonance excited by each impact; defaults per fault type.
    #[serde(default)]
    pub carrier_hz: Option<f64>,
    #[serde(default = "default_shaft_amplitude")]
    pub shaft_amplitude_g: f64,
    #[serde(default = "default_decay")]
    pub impulse_decay_s: f64,
    #[serde(default = "default_bearing")]
    pub bearing_id: String,
    #[serde(default = "default_condition")]
    pub condition_id: String,
}

impl Default for SynthConfig {
    /// A FEMTO-shaped healthy bearing: 25.6 kHz, 2560-point waveforms.
    fn default() -> Self {
        SynthConfig {
            shaft_hz: 30.0,
            sampling_rate_hz: 25_600.0,
            fault_type: FaultType::None,
            fault_char_freq_hz: 90.0,
            impulse_snr_db: 20.0,
            degradation: None,
            noise_sigma_g: 0.5,
            n_waveforms: 100,
            waveform_len: 2560,
            seed: 0,
            carrier_hz: None,
            shaft_amplitude_g: default_shaft_amplitude(),
            impulse_decay_s: default_decay(),
            bearing_id: default_bearing(),
            condition_id: default_condition(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sampling_rate_hz / 2.0;
        let positive = [
            ("shaft_hz", self.shaft_hz),
            ("sampling_rate_hz", self.sampling_rate_hz),
            ("fault_char_freq_hz", self.fault_char_freq_hz),
            ("noise_sigma_g", self.noise_sigma_g),
            ("impulse_decay_s", self.impulse_decay_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.shaft_amplitude_g < 0.0 {
            return Err(Error::Config("shaft_amplitude_g must be nonnegative".into()));
        }
        if self.n_waveforms == 0 || self.waveform_len == 0 {
            return Err(Error::Config("n_waveforms and waveform_len must be positive".into()));
        }
        if self.fault_char_freq_hz >= nyquist || self.shaft_hz >= nyquist {
            return Err(Error::Config(format!("frequencies must lie below Nyquist ({nyquist} Hz)")));
        }
        if self.fault_type != FaultType::None && self.carrier() >= nyquist {
            return Err(Error::Config(format!("carrier {} Hz is above Nyquist", self.carrier())));
        }
        if let Some(d) = &self.degradation {
            if !(d.onset_fraction > 0.0 && d.onset_fraction < 1.0) {
                return Err(Error::Config("onset_fraction must lie strictly inside (0, 1)".into()));
            }
            if !(d.end_amplitude_g > 0.0) {
                return Err(Error::Config("end_amplitude_g must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn carrier(&self) -> f64 {
        self.carrier_hz.unwrap_or_else(|| self.fault_type.default_carrier_hz())
    }

    fn base_amplitude(&self) -> f64 {
        self.noise_sigma_g * 10f64.powf(self.impulse_snr_db / 20.0)
    }

    pub fn onset_index(&self) -> Option<usize> {
        self.degradation
            .map(|d| (d.onset_fraction * self.n_waveforms as f64).floor() as usize)
    }

    /// Impact amplitude for waveform `i` (0 when no impacts are present).
    pub fn impact_amplitude(&self, i: usize) -> f64 {
        if self.fault_type == FaultType::None {
            return 0.0;
        }
        let Some(d) = self.degradation else {
            return self.base_amplitude();
        };
        let onset = self.onset_index().unwrap_or(0);
        if i < onset {
            return 0.0;
        }
        let span = self.n_waveforms.saturating_sub(1).saturating_sub(onset);
        let progress = if span == 0 { 1.0 } else { (i - onset) as f64 / span as f64 };
        let start = self.base_amplitude();
        match d.growth {
            Growth::Linear => start + (d.end_amplitude_g - start) * progress,
            Growth::Exponential => start * (d.end_amplitude_g / start).powf(progress),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bearing_id: String,
    pub fault_type: FaultType,
    pub onset_index: Option<usize>,
    /// Impact amplitude per waveform, g.
    pub impact_amplitude_g: Vec<f64>,
    /// Largest absolute sample per waveform, g.
    pub peak_abs_g: Vec<f64>,
    pub seed: u64,
}

impl GroundTruth {
    /// Index of the first waveform whose peak exceeds `threshold_g`.
    pub fn first_exceedance(&self, threshold_g: f64) -> Option<usize> {
        self.peak_abs_g.iter().position(|&p| p > threshold_g)
    }
}

struct ImpactTrain {
    rate_hz: f64,
    carrier_hz: f64,
    amplitude: f64,
}

fn burst_peak(carrier_hz: f64, decay_s: f64) -> f64 {
    // max over t >= 0 of exp(-t/tau) sin(w t), reached at tan(w t) = w tau
    let w = 2.0 * PI * carrier_hz;
    let t = (w * decay_s).atan() / w;
    (-t / decay_s).exp() * (w * t).sin()
}

fn add_impacts(samples: &mut [f64], rate_hz: f64, decay_s: f64, train: &ImpactTrain, rng: &mut Stream) {
    let period = 1.0 / train.rate_hz;
    let norm = train.amplitude / burst_peak(train.carrier_hz, decay_s);
    let duration = samples.len() as f64 / rate_hz;
    let ringing = (10.0 * decay_s * rate_hz).ceil() as usize;
    let offset = rng.uniform() * period;
    let w = 2.0 * PI * train.carrier_hz;
    let mut k = 0usize;
    loop {
        let jitter = rng.uniform_range(-1.0, 1.0) * 0.01 * period;
        let t0 = offset + k as f64 * period + jitter;
        if t0 >= duration {
            break;
        }
        k += 1;
        if t0 < 0.0 {
            continue;
        }
        let first = (t0 * rate_hz).ceil() as usize;
        for n in first..(first + ringing).min(samples.len()) {
            let t = n as f64 / rate_hz - t0;
            samples[n] += norm * (-t / decay_s).exp() * (w * t).sin();
        }
    }
}

fn synth_waveform(cfg: &SynthConfig, index: usize) -> Vec<f64> {
    let mut rng = Stream::new(cfg.seed, index as u64);
    let fs = cfg.sampling_rate_hz;
    let phase = rng.uniform() * 2.0 * PI;
    let mut x: Vec<f64> = (0..cfg.waveform_len)
        .map(|n| {
            let t = n as f64 / fs;
            cfg.noise_sigma_g * rng.normal() + cfg.shaft_amplitude_g * (2.0 * PI * cfg.shaft_hz * t + phase).sin()
        })
        .collect();
    let amplitude = cfg.impact_amplitude(index);
    if amplitude > 0.0 {
        let carrier = cfg.carrier();
        let mut trains = vec![ImpactTrain {
            rate_hz: cfg.fault_char_freq_hz,
            carrier_hz: carrier,
            amplitude,
        }];
        if cfg.fault_type == FaultType::Compound {
            // secondary train: 1.5x the rate, 1.3x the carrier (capped below Nyquist)
            trains.push(ImpactTrain {
                rate_hz: (1.5 * cfg.fault_char_freq_hz).min(0.45 * fs),
                carrier_hz: (1.3 * carrier).min(0.45 * fs),
                amplitude,
            });
        }
        for train in &trains {
            add_impacts(&mut x, fs, cfg.impulse_decay_s, train, &mut rng);
        }
    }
    x
}

fn generate(cfg: &SynthConfig) -> (Vec<WaveformRecord>, GroundTruth) {
    let fault_label = cfg.fault_type.label().to_string();
    let records: Vec<WaveformRecord> = (0..cfg.n_waveforms)
        .into_par_iter()
        .map(|i| WaveformRecord {
            bearing_id: cfg.bearing_id.clone(),
            condition_id: cfg.condition_id.clone(),
            seq_index: i,
            samples: synth_waveform(cfg, i),
            sampling_rate_hz: cfg.sampling_rate_hz,
            fault_label: Some(fault_label.clone()),
            axis: Axis::Horizontal,
        })
        .collect();
    let truth = GroundTruth {
        bearing_id: cfg.bearing_id.clone(),
        fault_type: cfg.fault_type,
        onset_index: cfg.onset_index(),
        impact_amplitude_g: (0..cfg.n_waveforms).map(|i| cfg.impact_amplitude(i)).collect(),
        peak_abs_g: records.iter().map(WaveformRecord::peak_abs).collect(),
        seed: cfg.seed,
    };
    (records, truth)
}

/// A degrading bearing: healthy until the onset waveform, then impacts of
/// growing amplitude. Records carry no fault label (the sequence must be
/// labeled post hoc); the fault type is reported in the ground truth.
pub fn generate_run_to_failure(cfg: &SynthConfig) -> Result<(Vec<WaveformRecord>, GroundTruth)> {
    cfg.validate()?;
    if cfg.degradation.is_none() {
        return Err(Error::Config("run-to-failure generation needs a degradation block".into()));
    }
    if cfg.fault_type == FaultType::None {
        return Err(Error::Config("run-to-failure generation needs a fault type".into()));
    }
    let (mut records, truth) = generate(cfg);
    records.iter_mut().for_each(|r| r.fault_label = None);
    Ok((records, truth))
}

/// A stationary recording set where every waveform carries the fault
/// signature and the declared fault label.
pub fn generate_injected(cfg: &SynthConfig) -> Result<(Vec<WaveformRecord>, GroundTruth)> {
    cfg.validate()?;
    if cfg.degradation.is_some() {
        return Err(Error::Config("injected-fault generation takes no degradation block".into()));
    }
    Ok(generate(cfg))
}

/// Add a fixed tone of `10^(gain_db/20)` g at `nuisance_freq_hz` (zero phase
/// at the start of each waveform) to every record of `bearing_id`.
pub fn add_bearing_nuisance(
    records: &[WaveformRecord],
    bearing_id: &str,
    nuisance_gain_db: f64,
    nuisance_freq_hz: f64,
) -> Result<Vec<WaveformRecord>> {
    let amplitude = 10f64.powf(nuisance_gain_db / 20.0);
    let mut out = records.to_vec();
    if amplitude == 0.0 {
        return Ok(out);
    }
    for r in out.iter_mut().filter(|r| r.bearing_id == bearing_id) {
        if nuisance_freq_hz >= r.sampling_rate_hz / 2.0 || !(nuisance_freq_hz > 0.0) {
            return Err(Error::Config(format!(
                "nuisance frequency {nuisance_freq_hz} Hz is outside (0, Nyquist)"
            )));
        }
        let w = 2.0 * PI * nuisance_freq_hz / r.sampling_rate_hz;
        for (n, x) in r.samples.iter_mut().enumerate() {
            *x += amplitude * (w * n as f64).sin();
        }
    }
    Ok(out)
}

/// Write records as a `femto_like` tree: `<dir>/Bearing<id>/acc_<n>.csv`
/// with `n` starting at 1.
pub fn write_femto_tree(dir: &Path, records: &[WaveformRecord]) -> Result<()> {
    for r in records {
        let path = dir
            .join(format!("Bearing{}", r.bearing_id))
            .join(format!("acc_{:05}.csv", r.seq_index + 1));
        write_waveform_csv(&path, &r.samples)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r2f(seed: u64) -> SynthConfig {
        SynthConfig {
            fault_type: FaultType::OuterRace,
            degradation: Some(Degradation {
                onset_fraction: 0.8,
                growth: Growth::Linear,
                end_amplitude_g: 30.0,
            }),
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn onset_index_is_floor_of_fraction() {
        let (_, truth) = generate_run_to_failure(&r2f(1)).unwrap();
        assert_eq!(truth.onset_index, Some(80));
        assert_eq!(truth.impact_amplitude_g[79], 0.0);
        assert!(truth.impact_amplitude_g[80] > 0.0);
    }

    #[test]
    fn last_waveform_peak_matches_end_amplitude() {
        for seed in 0..5 {
            let (recs, _) = generate_run_to_failure(&r2f(seed)).unwrap();
            let peak = recs.last().unwrap().peak_abs();
            // 30 g impact, 6 sigma of 0.5 g noise either way
            assert!((24.0..=36.0).contains(&peak), "seed {seed}: {peak}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (a, ta) = generate_run_to_failure(&r2f(9)).unwrap();
        let (b, tb) = generate_run_to_failure(&r2f(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate_run_to_failure(&r2f(10)).unwrap();
        assert_ne!(a[0].samples, c[0].samples);
    }

    #[test]
    fn exponential_growth_hits_both_ends() {
        let mut cfg = r2f(0);
        cfg.degradation.as_mut().unwrap().growth = Growth::Exponential;
        let start = cfg.impact_amplitude(80);
        assert!((start - 0.5 * 10.0).abs() < 1e-12);
        assert!((cfg.impact_amplitude(99) - 30.0).abs() < 1e-9);
        assert!(cfg.impact_amplitude(90) < 0.5 * (start + 30.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = r2f(0);
        cfg.degradation.as_mut().unwrap().onset_fraction = 1.0;
        assert!(generate_run_to_failure(&cfg).is_err());
        let mut cfg = SynthConfig::default();
        cfg.fault_char_freq_hz = 20_000.0;
        assert!(generate_injected(&cfg).is_err());
        assert!(generate_injected(&r2f(0)).is_err());
        assert!(generate_run_to_failure(&SynthConfig::default()).is_err());
    }

    #[test]
    fn injected_records_carry_labels() {
        let cfg = SynthConfig {
            fault_type: FaultType::InnerRace,
            n_waveforms: 3,
            ..SynthConfig::default()
        };
        let (recs, truth) = generate_injected(&cfg).unwrap();
        assert!(recs.iter().all(|r| r.fault_label.as_deref() == Some("IR")));
        assert_eq!(truth.onset_index, None);
    }

    #[test]
    fn zero_gain_nuisance_is_identity() {
        let (recs, _) = generate_injected(&SynthConfig {
            n_waveforms: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(add_bearing_nuisance(&recs, "1_1", f64::NEG_INFINITY, 700.0).unwrap(), recs);
        let tinted = add_bearing_nuisance(&recs, "1_1", 0.0, 700.0).unwrap();
        assert_ne!(tinted, recs);
        let other = add_bearing_nuisance(&recs, "9_9", 0.0, 700.0).unwrap();
        assert_eq!(other, recs);
    }

    #[test]
    fn burst_peak_normalization() {
        let (carrier, tau) = (3000.0, 0.0015);
        let p = burst_peak(carrier, tau);
        let dense = (0..200_000)
            .map(|i| {
                let t = i as f64 * 1e-8;
                (-t / tau).exp() * (2.0 * PI * carrier * t).sin()
            })
            .fold(f64::MIN, f64::max);
        assert!((p - dense).abs() < 1e-6);
    }
}
