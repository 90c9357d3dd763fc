//! Confusion-matrix metrics.
//!
//! Precision, recall and F1 are 0 whenever their denominator is 0. Binary
//! mode reports the positive class's scores as the headline precision,
//! recall and F; the positive class is `failure` when present, otherwise the
//! second class in vocabulary order. Macro mode reports unweighted means
//! over classes. Both sets of numbers are always filled in.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<Label>,
    /// Rows are true classes, columns predicted classes.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[Label], classes: &[Label]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let index: HashMap<&Label, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    let lookup = |l: &Label| index.get(l).copied().ok_or_else(|| Error::UnknownLabel(l.to_string()));
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[lookup(t)?][lookup(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Binary,
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mode: ScoreMode,
    pub accuracy: f64,
    /// Headline precision/recall/F for `mode`.
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub f_macro: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<Label>,
    pub per_class: Vec<ClassScores>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn score(cm: &ConfusionMatrix, mode: ScoreMode) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidInput("cannot score an empty confusion matrix".into()));
    }
    let k = cm.classes.len();
    let per_class: Vec<ClassScores> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let predicted: u64 = (0..k).map(|r| cm.counts[r][c]).sum();
            let actual: u64 = cm.counts[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            ClassScores {
                label: cm.classes[c].clone(),
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: actual,
            }
        })
        .collect();
    let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let macro_precision = mean(|c| c.precision);
    let macro_recall = mean(|c| c.recall);
    let f_macro = mean(|c| c.f1);
    let accuracy = ratio(cm.trace(), total);

    let (precision, recall, f, positive_class) = match mode {
        ScoreMode::Macro => (macro_precision, macro_recall, f_macro, None),
        ScoreMode::Binary => {
            if k != 2 {
                return Err(Error::InvalidInput(format!("binary scoring needs 2 classes, got {k}")));
            }
            let pos = cm.classes.iter().position(|c| *c == Label::Failure).unwrap_or(1);
            let s = &per_class[pos];
            (s.precision, s.recall, s.f1, Some(s.label.clone()))
        }
    };
    Ok(MetricSet {
        mode,
        accuracy,
        precision,
        recall,
        f,
        macro_precision,
        macro_recall,
        f_macro,
        positive_class,
        per_class,
    })
}

/// Expected accuracy of a classifier that guesses class `c` with
/// probability `p_c` on data distributed by the same `p`: `sum p_c^2`.
pub fn expected_dummy_accuracy(class_probs: &[f64]) -> Result<f64> {
    if class_probs.is_empty()
        || class_probs.iter().any(|p| !(0.0..=1.0).contains(p))
        || (class_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidInput(format!("not a probability vector: {class_probs:?}")));
    }
    Ok(class_probs.iter().map(|p| p * p).sum())
}
