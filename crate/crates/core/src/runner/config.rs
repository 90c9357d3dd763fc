use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureFamily, StftSpec, WindowSpec};
use crate::labeling::PcaKmeansParams;
use crate::metrics::ScoreMode;
use crate::models::ModelSpec;
use crate::splits::{BearingTable, SplitStrategy};
use crate::synthgen::SynthConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding `output_dir`.
pub const ENV_OUTPUT: &str = "FAULTBENCH_OUT";
/// Environment variable setting the worker thread count.
pub const ENV_THREADS: &str = "FAULTBENCH_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Multiclass,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }

    /// Headline scoring mode for the task.
    pub fn score_mode(self) -> ScoreMode {
        match self {
            Task::Binary => ScoreMode::Binary,
            Task::Multiclass => ScoreMode::Macro,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nuisance {
    pub gain_db: f64,
    pub freq_hz: f64,
}

/// One synthetic bearing. Run-to-failure when `degradation` is set,
/// injected-fault otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthBearing {
    #[serde(flatten)]
    pub config: SynthConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nuisance: Option<Nuisance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Manifest {
        path: PathBuf,
        /// Downsample every record to this rate first.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resample_hz: Option<f64>,
    },
    Synthetic {
        #[serde(default = "default_dataset_id")]
        dataset_id: String,
        bearings: Vec<SynthBearing>,
    },
}

fn default_dataset_id() -> String {
    "synthetic".into()
}

/// Where multiclass fault names come from for run-to-failure labelers:
/// `"xjtu"`, `"ground_truth"` (synthetic sources), or a JSON file mapping
/// bearing id to fault name.
pub type FaultTypeSource = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelingConfig {
    Threshold {
        threshold_g: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fault_types: Option<FaultTypeSource>,
    },
    PcaKmeans {
        #[serde(default)]
        params: PcaKmeansParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fault_types: Option<FaultTypeSource>,
    },
    Declared,
}

impl LabelingConfig {
    pub fn name(&self) -> String {
        match self {
            LabelingConfig::Threshold { threshold_g, .. } => format!("threshold_{threshold_g}g"),
            LabelingConfig::PcaKmeans { .. } => "pca_kmeans".into(),
            LabelingConfig::Declared => "declared".into(),
        }
    }

    pub fn fault_types(&self) -> Option<&str> {
        match self {
            LabelingConfig::Threshold { fault_types, .. } | LabelingConfig::PcaKmeans { fault_types, .. } => {
                fault_types.as_deref()
            }
            LabelingConfig::Declared => None,
        }
    }
}

fn default_fractions() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub strategy: SplitStrategy,
    /// Built-in table name or JSON path; required for `by_bearing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline_table: Option<BearingTable>,
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
}

impl SplitConfig {
    pub fn bearing_table(&self) -> Result<BearingTable> {
        match (&self.inline_table, &self.table) {
            (Some(t), _) => {
                t.validate()?;
                Ok(t.clone())
            }
            (None, Some(spec)) => BearingTable::load(spec),
            (None, None) => Err(Error::Config("by_bearing split needs a bearing table".into())),
        }
    }
}

fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_families() -> Vec<FeatureFamily> {
    vec![FeatureFamily::Rfft]
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// Root seed; every stochastic stage derives its seed from it.
    #[serde(default)]
    pub seed: u64,
    pub source: SourceConfig,
    pub labeling: LabelingConfig,
    pub task: Task,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub stft: StftSpec,
    #[serde(default = "default_families")]
    pub families: Vec<FeatureFamily>,
    pub split: SplitConfig,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    /// Modes scored for every cell; defaults to the task's headline mode
    /// plus macro.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_modes: Option<Vec<ScoreMode>>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Write each fitted model under `models/`.
    #[serde(default = "default_true")]
    pub save_models: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file; relative paths inside it resolve against the
    /// file's directory, and `FAULTBENCH_OUT` replaces `output_dir`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let SourceConfig::Manifest { path: p, .. } = &mut cfg.source {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.apply_env();
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Ok(out) = std::env::var(ENV_OUTPUT) {
            if !out.is_empty() {
                self.output_dir = PathBuf::from(out);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema_version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.window.validate()?;
        if self.families.contains(&FeatureFamily::Stft) {
            self.stft.validate(self.window.length)?;
        }
        if self.families.is_empty() {
            return Err(Error::Config("at least one feature family is required".into()));
        }
        let mut fams = self.families.clone();
        fams.sort();
        fams.dedup();
        if fams.len() != self.families.len() {
            return Err(Error::Config("feature families listed twice".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        match &self.source {
            SourceConfig::Synthetic { bearings, .. } => {
                if bearings.is_empty() {
                    return Err(Error::Config("synthetic source has no bearings".into()));
                }
                let mut ids: Vec<&str> = bearings.iter().map(|b| b.config.bearing_id.as_str()).collect();
                ids.sort();
                if ids.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Config("synthetic bearing ids must be unique".into()));
                }
                for b in bearings {
                    b.config.validate()?;
                }
            }
            SourceConfig::Manifest { resample_hz, .. } => {
                if resample_hz.is_some_and(|r| !(r > 0.0)) {
                    return Err(Error::Config("resample_hz must be positive".into()));
                }
            }
        }
        match &self.labeling {
            LabelingConfig::Threshold { threshold_g, .. } if !(*threshold_g > 0.0) => {
                return Err(Error::Config("threshold_g must be positive".into()));
            }
            LabelingConfig::PcaKmeans { params, .. } if params.n_clusters == 0 || params.n_components == 0 => {
                return Err(Error::Config("pca_kmeans needs positive n_clusters and n_components".into()));
            }
            _ => {}
        }
        if self.task == Task::Multiclass
            && !matches!(self.labeling, LabelingConfig::Declared)
            && self.labeling.fault_types().is_none()
        {
            return Err(Error::Config(
                "multiclass run-to-failure labeling needs fault_types (\"xjtu\", \"ground_truth\" or a file)".into(),
            ));
        }
        match self.split.strategy {
            SplitStrategy::ByBearing => {
                self.split.bearing_table()?;
            }
            SplitStrategy::Random => {
                let f = self.split.fractions;
                if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("split fractions {f:?} must be in [0,1] and sum to 1")));
                }
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> Vec<ScoreMode> {
        match &self.metric_modes {
            Some(m) => m.clone(),
            None => match self.task {
                Task::Binary => vec![ScoreMode::Binary, ScoreMode::Macro],
                Task::Multiclass => vec![ScoreMode::Macro],
            },
        }
    }

    /// Canonical JSON used for the config hash: the parsed config with
    /// `output_dir` blanked, so relocating outputs does not change it.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Ok(serde_json::to_string(&c)?)
    }
}

/// Load a map of bearing id to fault name.
pub fn load_fault_table(spec: &str) -> Result<BTreeMap<String, String>> {
    if spec.eq_ignore_ascii_case("xjtu") {
        return Ok(crate::labeling::declared::xjtu_fault_types());
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("fault table {spec}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "source": {"type": "synthetic", "bearings": [
            {"shaft_hz": 30, "sampling_rate_hz": 25600, "fault_type": "inner_race",
             "fault_char_freq_hz": 120, "impulse_snr_db": 10, "noise_sigma_g": 0.5,
             "n_waveforms": 4, "waveform_len": 2048, "seed": 1, "bearing_id": "a",
             "nuisance": {"gain_db": -6, "freq_hz": 700}}
        ]},
        "labeling": {"method": "declared"},
        "task": "multiclass",
        "split": {"strategy": "random"},
        "models": [{"kind": "gaussian_nb"}]
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.families, vec![FeatureFamily::Rfft]);
        assert_eq!(c.split.fractions, [0.8, 0.1, 0.1]);
        assert_eq!(c.window, WindowSpec::default());
        assert_eq!(c.modes(), vec![ScoreMode::Macro]);
        match &c.source {
            SourceConfig::Synthetic { bearings, .. } => {
                assert_eq!(bearings[0].nuisance.as_ref().unwrap().freq_hz, 700.0);
                assert_eq!(bearings[0].config.bearing_id, "a");
            }
            _ => panic!(),
        }
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            MINIMAL.replace("\"random\"", "\"by_bearing\""),
            MINIMAL.replace("\"declared\"", "\"threshold\", \"threshold_g\": 10"),
            MINIMAL.replace("\"task\"", "\"bogus\": 1, \"task\""),
            MINIMAL.replace("\"gaussian_nb\"}", "\"gaussian_nb\", \"hyperparams\": {\"var_smoothing\": -1}}"),
            MINIMAL.replace("\"models\"", "\"families\": [], \"models\""),
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn canonical_json_ignores_output_dir() {
        let mut a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let b = a.clone();
        a.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
    }
}
