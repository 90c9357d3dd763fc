//! Config-driven orchestration: source, labels, features, split, model grid,
//! report. Every stage writes its output under the experiment's output
//! directory (`labels.csv`, `features_<FAMILY>.csv`, `split.csv`,
//! `models/`, `report.{json,md,csv}`).

pub mod compare;
pub mod config;
pub mod pipeline;
pub mod report;

pub use compare::{compare_labelers, compare_splits, LabelerComparison, SplitComparison};
pub use config::{ExperimentConfig, LabelingConfig, SourceConfig, SplitConfig, SynthBearing, Task};
pub use pipeline::{run_experiment, write_report};
pub use report::{render_report, Cell, EvaluationReport, ReportFormat};
