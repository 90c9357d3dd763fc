use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureFamily;
use crate::metrics::{ConfusionMatrix, MetricSet, ScoreMode};
use crate::models::{FitInfo, ModelKind};
use crate::runner::config::Task;
use crate::splits::{LeakageReport, Partition, SplitStrategy};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCounts {
    pub partition: Partition,
    pub total: usize,
    pub per_class: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BearingOnset {
    pub bearing_id: String,
    pub detected: Option<usize>,
    /// Known onset for synthetic bearings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<usize>,
    pub n_failure_windows: usize,
    pub n_windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Per-bearing labeler fit (PCA, k-means, thresholds).
    Labeler,
    Standardizer,
    Model,
    EarlyStopping,
}

/// The partitions whose samples fed one fitted statistic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitProvenance {
    pub statistic: Statistic,
    /// Cell (`MODEL/FAMILY`) or bearing id.
    pub owner: String,
    pub partitions: Vec<Partition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelKind,
    pub family: FeatureFamily,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<MetricSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Cell {
    pub fn failed(model: ModelKind, family: FeatureFamily, reason: String) -> Self {
        Cell {
            model,
            family,
            metrics: Vec::new(),
            confusion: None,
            fit: None,
            error: Some(reason),
        }
    }

    pub fn metric(&self, mode: ScoreMode) -> Option<&MetricSet> {
        self.metrics.iter().find(|m| m.mode == mode)
    }

    pub fn f_macro(&self) -> Option<f64> {
        self.metrics.first().map(|m| m.f_macro)
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.model.short_name(), self.family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub name: String,
    pub dataset_id: String,
    pub task: Task,
    pub split_strategy: SplitStrategy,
    pub labeling: String,
    pub fingerprint: Fingerprint,
    pub sample_counts: Vec<PartitionCounts>,
    pub leakage: LeakageReport,
    pub onsets: Vec<BearingOnset>,
    pub cells: Vec<Cell>,
    pub provenance: Vec<FitProvenance>,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn cell(&self, model: ModelKind, family: FeatureFamily) -> Option<&Cell> {
        self.cells.iter().find(|c| c.model == model && c.family == family)
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn headline_mode(&self) -> ScoreMode {
        self.task.score_mode()
    }

    /// Check that no standardizer, model or early-stopping statistic saw
    /// test data, that models saw only train, and, under a bearing split,
    /// that each bearing's labeler saw one partition.
    pub fn check_provenance(&self) -> Result<()> {
        for p in &self.provenance {
            let ok = match p.statistic {
                Statistic::Standardizer | Statistic::Model => p.partitions == [Partition::Train],
                Statistic::EarlyStopping => p.partitions.iter().all(|&q| q == Partition::Val),
                Statistic::Labeler => self.split_strategy != SplitStrategy::ByBearing || p.partitions.len() <= 1,
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "{:?} for {} was fit on {:?}",
                    p.statistic, p.owner, p.partitions
                )));
            }
        }
        Ok(())
    }
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

fn sanitize(reason: &str) -> String {
    reason.replace(['|', '\n', '\r'], " ")
}

/// Render the report. JSON is the canonical serialization; markdown has one
/// row per (model, family) with models as row groups.
pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => Ok(render_markdown(report)),
    }
}

pub const CSV_COLUMNS: [&str; 15] = [
    "model",
    "family",
    "task",
    "split",
    "mode",
    "status",
    "accuracy",
    "precision",
    "recall",
    "f",
    "f_macro",
    "macro_precision",
    "macro_recall",
    "n_test",
    "error",
];

fn render_csv(report: &EvaluationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    let task = report.task.as_str();
    let split = match report.split_strategy {
        SplitStrategy::ByBearing => "by_bearing",
        SplitStrategy::Random => "random",
    };
    for c in &report.cells {
        let model = c.model.short_name();
        let family = c.family.as_str();
        if let Some(e) = &c.error {
            w.write_record([model, family, task, split, "", "error", "", "", "", "", "", "", "", "", e.as_str()])?;
            continue;
        }
        let n_test = c.confusion.as_ref().map(|m| m.total().to_string()).unwrap_or_default();
        for m in &c.metrics {
            let mode = match m.mode {
                ScoreMode::Binary => "binary",
                ScoreMode::Macro => "macro",
            };
            let nums = [m.accuracy, m.precision, m.recall, m.f, m.f_macro, m.macro_precision, m.macro_recall].map(|v| v.to_string());
            let mut row = vec![model, family, task, split, mode, "ok"];
            row.extend(nums.iter().map(String::as_str));
            row.push(&n_test);
            row.push("");
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn render_markdown(r: &EvaluationReport) -> String {
    let mode = r.headline_mode();
    let f_name = match mode {
        ScoreMode::Binary => "F",
        ScoreMode::Macro => "F_mac",
    };
    let split = match r.split_strategy {
        SplitStrategy::ByBearing => "bearing split",
        SplitStrategy::Random => "random split",
    };
    let mut s = String::new();
    let title = if r.name.is_empty() { r.dataset_id.as_str() } else { r.name.as_str() };
    let _ = writeln!(s, "# {title}\n");
    let _ = writeln!(
        s,
        "{} classification on `{}` with {}, labels from {}.\n",
        r.task.as_str(),
        r.dataset_id,
        split,
        r.labeling
    );
    let _ = writeln!(
        s,
        "config `{}`, version {}\n",
        r.fingerprint.config_hash, r.fingerprint.code_version
    );

    let mut classes: Vec<&String> = r.sample_counts.iter().flat_map(|p| p.per_class.keys()).collect();
    classes.sort();
    classes.dedup();
    let _ = writeln!(s, "## Samples\n");
    let _ = write!(s, "| Split | Total |");
    for c in &classes {
        let _ = write!(s, " {c} |");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "|---|---|{}", "---|".repeat(classes.len()));
    for p in &r.sample_counts {
        let _ = write!(s, "| {} | {} |", p.partition, p.total);
        for c in &classes {
            let _ = write!(s, " {} |", p.per_class.get(*c).copied().unwrap_or(0));
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s);

    let _ = writeln!(s, "## Results\n");
    if r.cells.is_empty() {
        let _ = writeln!(s, "No models were configured.\n");
    } else {
        let best = r
            .cells
            .iter()
            .filter_map(|c| c.metric(mode).map(|m| m.f))
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(s, "| Model | Features | Acc | {f_name} | Prec | Rec |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        let mut last_model = None;
        for c in &r.cells {
            let model = if last_model == Some(c.model) { "" } else { c.model.short_name() };
            last_model = Some(c.model);
            match (&c.error, c.metric(mode)) {
                (Some(e), _) => {
                    let _ = writeln!(s, "| {model} | {} | ERR({}) | - | - | - |", c.family, sanitize(e));
                }
                (None, Some(m)) => {
                    let f = if m.f == best {
                        format!("**{}**", fmt3(m.f))
                    } else {
                        fmt3(m.f)
                    };
                    let _ = writeln!(
                        s,
                        "| {model} | {} | {} | {f} | {} | {} |",
                        c.family,
                        fmt3(m.accuracy),
                        fmt3(m.precision),
                        fmt3(m.recall)
                    );
                }
                (None, None) => {
                    let _ = writeln!(s, "| {model} | {} | ERR(no {f_name} computed) | - | - | - |", c.family);
                }
            }
        }
        let _ = writeln!(s);
    }

    if !r.onsets.is_empty() {
        let _ = writeln!(s, "## Failure onsets\n");
        let _ = writeln!(s, "| Bearing | Detected | Truth | Failure windows |");
        let _ = writeln!(s, "|---|---|---|---|");
        for o in &r.onsets {
            let d = o.detected.map(|v| v.to_string()).unwrap_or_else(|| "none".into());
            let t = o.truth.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "| {} | {d} | {t} | {}/{} |", o.bearing_id, o.n_failure_windows, o.n_windows);
        }
        let _ = writeln!(s);
    }

    let _ = writeln!(s, "## Leakage\n");
    if r.leakage.leak_free {
        let _ = writeln!(s, "No bearing spans more than one split ({} bearings).\n", r.leakage.n_bearings);
    } else {
        let _ = writeln!(
            s,
            "{} of {} bearings span more than one split.\n",
            r.leakage.offending.len(),
            r.leakage.n_bearings
        );
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "## Warnings\n");
        for w in &r.warnings {
            let _ = writeln!(s, "- {w}");
        }
        let _ = writeln!(s);
    }
    s
}
