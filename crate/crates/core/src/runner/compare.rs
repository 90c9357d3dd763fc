use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureFamily;
use crate::models::ModelKind;
use crate::runner::config::{ExperimentConfig, LabelingConfig};
use crate::runner::pipeline::run_experiment;
use crate::runner::report::{BearingOnset, EvaluationReport};
use crate::splits::SplitStrategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDelta {
    pub model: ModelKind,
    pub family: FeatureFamily,
    pub by_bearing_f_macro: Option<f64>,
    pub random_f_macro: Option<f64>,
    /// `random - by_bearing`.
    pub delta: Option<f64>,
    pub random_exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitComparison {
    pub by_bearing: EvaluationReport,
    pub random: EvaluationReport,
    pub cells: Vec<SplitDelta>,
}

impl SplitComparison {
    pub fn delta(&self, model: ModelKind, family: FeatureFamily) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.family == family)
            .and_then(|c| c.delta)
    }

    pub fn failed_cells(&self) -> usize {
        self.by_bearing.failed_cells() + self.random.failed_cells()
    }
}

/// Run `cfg` under a bearing split and a random split with the same seed,
/// in `by_bearing/` and `random/` below the output directory.
pub fn compare_splits(cfg: &ExperimentConfig) -> Result<SplitComparison> {
    let run = |strategy: SplitStrategy, dir: &str| {
        let mut c = cfg.clone();
        c.split.strategy = strategy;
        c.output_dir = cfg.output_dir.join(dir);
        run_experiment(&c)
    };
    let by_bearing = run(SplitStrategy::ByBearing, "by_bearing")?;
    let random = run(SplitStrategy::Random, "random")?;
    let cells = by_bearing
        .cells
        .iter()
        .map(|b| {
            let r = random.cell(b.model, b.family);
            let bf = b.f_macro();
            let rf = r.and_then(|c| c.f_macro());
            let delta = bf.zip(rf).map(|(b, r)| r - b);
            SplitDelta {
                model: b.model,
                family: b.family,
                by_bearing_f_macro: bf,
                random_f_macro: rf,
                delta,
                random_exceeds: delta.is_some_and(|d| d > 0.0),
            }
        })
        .collect();
    let cmp = SplitComparison {
        by_bearing,
        random,
        cells,
    };
    fs::write(cfg.output_dir.join("compare_splits.json"), serde_json::to_string_pretty(&cmp)? + "\n")
        .map_err(|e| Error::io(&cfg.output_dir, e))?;
    fs::write(cfg.output_dir.join("compare_splits.md"), render_split_comparison(&cmp))
        .map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(cmp)
}

fn opt3(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "ERR".into())
}

pub fn render_split_comparison(c: &SplitComparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Bearing split vs random split\n");
    let _ = writeln!(s, "F_mac on the test split; delta is random minus bearing split.\n");
    let _ = writeln!(s, "| Model | Features | Bearing split | Random split | Delta | Random higher |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for d in &c.cells {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            d.model.short_name(),
            d.family,
            opt3(d.by_bearing_f_macro),
            opt3(d.random_f_macro),
            d.delta.map(|v| format!("{v:+.3}")).unwrap_or_else(|| "ERR".into()),
            if d.random_exceeds { "yes" } else { "no" }
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerRun {
    pub method: String,
    pub label_counts: BTreeMap<String, usize>,
    pub onsets: Vec<BearingOnset>,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerComparison {
    pub runs: Vec<LabelerRun>,
    /// Bearings where a labeler found no failure at all.
    pub misses: Vec<String>,
    pub caveat: String,
}

pub const LABELER_CAVEAT: &str = "Each labeler produces its own failure region, so the test sets differ \
between methods and downstream metrics are not directly comparable.";

/// Run `cfg` once per labeling method, in a subdirectory named after it.
pub fn compare_labelers(cfg: &ExperimentConfig, methods: &[LabelingConfig]) -> Result<LabelerComparison> {
    if methods.is_empty() {
        return Err(Error::Config("compare_labelers needs at least one method".into()));
    }
    let mut runs = Vec::new();
    let mut misses = Vec::new();
    for m in methods {
        let mut c = cfg.clone();
        c.labeling = m.clone();
        let name = m.name();
        c.output_dir = cfg.output_dir.join(&name);
        let report = run_experiment(&c)?;
        let mut label_counts = BTreeMap::new();
        for p in &report.sample_counts {
            for (k, v) in &p.per_class {
                *label_counts.entry(k.clone()).or_insert(0) += v;
            }
        }
        for o in &report.onsets {
            if o.detected.is_none() {
                misses.push(format!("{name}: no failure found for bearing {}", o.bearing_id));
            }
        }
        runs.push(LabelerRun {
            method: name,
            label_counts,
            onsets: report.onsets.clone(),
            report,
        });
    }
    let cmp = LabelerComparison {
        runs,
        misses,
        caveat: LABELER_CAVEAT.into(),
    };
    fs::write(cfg.output_dir.join("compare_labelers.json"), serde_json::to_string_pretty(&cmp)? + "\n")
        .map_err(|e| Error::io(&cfg.output_dir, e))?;
    fs::write(cfg.output_dir.join("compare_labelers.md"), render_labeler_comparison(&cmp))
        .map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(cmp)
}

pub fn render_labeler_comparison(c: &LabelerComparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Labeler comparison\n");
    let _ = writeln!(s, "> {}\n", c.caveat);
    let _ = writeln!(s, "## Onsets\n");
    let _ = write!(s, "| Bearing | Truth |");
    for r in &c.runs {
        let _ = write!(s, " {} |", r.method);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "|---|---|{}", "---|".repeat(c.runs.len()));
    let mut bearings: Vec<&BearingOnset> = c.runs.iter().flat_map(|r| &r.onsets).collect();
    bearings.sort_by(|a, b| a.bearing_id.cmp(&b.bearing_id));
    bearings.dedup_by(|a, b| a.bearing_id == b.bearing_id);
    for b in bearings {
        let truth = b.truth.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        let _ = write!(s, "| {} | {truth} |", b.bearing_id);
        for r in &c.runs {
            let d = r
                .onsets
                .iter()
                .find(|o| o.bearing_id == b.bearing_id)
                .and_then(|o| o.detected)
                .map(|v| v.to_string())
                .unwrap_or_else(|| "none".into());
            let _ = write!(s, " {d} |");
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s, "\n## Label counts\n");
    for r in &c.runs {
        let counts: Vec<String> = r.label_counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
        let _ = writeln!(s, "- {}: {}", r.method, counts.join(", "));
    }
    let _ = writeln!(s, "\n## Model results\n");
    let _ = write!(s, "| Model | Features |");
    for r in &c.runs {
        let _ = write!(s, " {} F_mac |", r.method);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "|---|---|{}", "---|".repeat(c.runs.len()));
    if let Some(first) = c.runs.first() {
        for cell in &first.report.cells {
            let _ = write!(s, "| {} | {} |", cell.model.short_name(), cell.family);
            for r in &c.runs {
                let v = r.report.cell(cell.model, cell.family).and_then(|x| x.f_macro());
                let _ = write!(s, " {} |", opt3(v));
            }
            let _ = writeln!(s);
        }
    }
    if !c.misses.is_empty() {
        let _ = writeln!(s, "\n## Missed failures\n");
        for m in &c.misses {
            let _ = writeln!(s, "- {m}");
        }
    }
    s
}
