#![allow(dead_code)]

use std::path::Path;

use faultbench::features::{FeatureFamily, StftSpec, WindowSpec};
use faultbench::labeling::PcaKmeansParams;
use faultbench::models::{ModelKind, ModelSpec};
use faultbench::runner::config::Nuisance;
use faultbench::runner::{ExperimentConfig, LabelingConfig, SourceConfig, SplitConfig, SynthBearing, Task};
use faultbench::splits::{BearingTable, SplitStrategy};
use faultbench::synthgen::{Degradation, FaultType, Growth, SynthConfig};

pub const SMALL_WINDOW: WindowSpec = WindowSpec {
    length: 512,
    overlap_fraction: 0.25,
};

/// Characteristic rate and resonance per fault type.
pub fn signature(fault: FaultType) -> (f64, f64) {
    match fault {
        FaultType::None => (90.0, 0.0),
        FaultType::InnerRace => (162.0, 3000.0),
        FaultType::OuterRace => (107.0, 4300.0),
        FaultType::Ball => (141.0, 5600.0),
        FaultType::Cage => (12.0, 2000.0),
        FaultType::Compound => (162.0, 3500.0),
    }
}

pub fn injected_bearing(id: &str, fault: FaultType, snr_db: f64, n_waveforms: usize, seed: u64) -> SynthBearing {
    let (rate, carrier) = signature(fault);
    SynthBearing {
        config: SynthConfig {
            fault_type: fault,
            fault_char_freq_hz: rate,
            carrier_hz: (fault != FaultType::None).then_some(carrier),
            impulse_snr_db: snr_db,
            n_waveforms,
            waveform_len: 2048,
            seed,
            bearing_id: id.to_string(),
            ..SynthConfig::default()
        },
        nuisance: None,
    }
}

/// `per_class` bearings for each fault type, named `<LABEL>_<i>`, plus a
/// table sending bearing 0 to val, bearing 1 to test, the rest to train.
pub fn injected_fleet(
    faults: &[FaultType],
    per_class: usize,
    snr_db: f64,
    n_waveforms: usize,
    seed: u64,
) -> (Vec<SynthBearing>, BearingTable) {
    let mut bearings = Vec::new();
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (fi, &f) in faults.iter().enumerate() {
        for i in 0..per_class {
            let id = format!("{}_{i}", f.label());
            let s = seed.wrapping_mul(1000) + (fi * 100 + i) as u64;
            bearings.push(injected_bearing(&id, f, snr_db, n_waveforms, s));
            match i {
                0 => val.push(id),
                1 => test.push(id),
                _ => train.push(id),
            }
        }
    }
    (bearings, BearingTable::new(train, val, test))
}

pub fn r2f_config(seed: u64, end_amplitude_g: f64, snr_db: f64) -> SynthConfig {
    SynthConfig {
        fault_type: FaultType::OuterRace,
        degradation: Some(Degradation {
            onset_fraction: 0.8,
            growth: Growth::Linear,
            end_amplitude_g,
        }),
        impulse_snr_db: snr_db,
        seed,
        ..SynthConfig::default()
    }
}

pub fn experiment(
    out: &Path,
    bearings: Vec<SynthBearing>,
    table: BearingTable,
    task: Task,
    labeling: LabelingConfig,
    models: &[ModelKind],
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: 1,
        name: "synthetic".into(),
        seed,
        source: SourceConfig::Synthetic {
            dataset_id: "synthetic".into(),
            bearings,
        },
        labeling,
        task,
        window: SMALL_WINDOW,
        stft: StftSpec {
            sub_len: 128,
            sub_overlap: 0.5,
        },
        families: vec![FeatureFamily::Rfft],
        split: SplitConfig {
            strategy: SplitStrategy::ByBearing,
            table: None,
            inline_table: Some(table),
            fractions: [0.6, 0.2, 0.2],
        },
        models: models.iter().map(|&k| ModelSpec::new(k, 0)).collect(),
        metric_modes: None,
        output_dir: out.to_path_buf(),
        save_models: true,
    }
}

pub fn with_nuisance(bearings: &mut [SynthBearing], gain_db: f64) {
    for (i, b) in bearings.iter_mut().enumerate() {
        b.nuisance = Some(Nuisance {
            gain_db,
            freq_hz: 600.0 + 250.0 * i as f64,
        });
    }
}

pub fn pca_labeling() -> LabelingConfig {
    LabelingConfig::PcaKmeans {
        params: PcaKmeansParams::default(),
        fault_types: None,
    }
}
