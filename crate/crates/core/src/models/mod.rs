//! Classifiers behind one fit/predict contract.
//!
//! Every model standardizes features with statistics taken from the training
//! matrix alone and stores them alongside its fitted state, so `predict`
//! takes raw features. Class indices follow the label vocabulary (sorted
//! distinct training labels); `predict` is the argmax of `predict_scores`
//! with ties going to the lower index. Scores are probabilities for every
//! kind except `svm_rbf`, whose scores are signed margins.

pub mod dummy;
pub mod forest;
pub mod logistic;
pub mod mlp;
pub mod nb;
pub mod standardize;
pub mod svm;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;

pub use standardize::Standardizer;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DummyStratified,
    GaussianNb,
    LogisticRegression,
    SvmRbf,
    RandomForest,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::DummyStratified,
        ModelKind::GaussianNb,
        ModelKind::LogisticRegression,
        ModelKind::SvmRbf,
        ModelKind::RandomForest,
        ModelKind::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DummyStratified => "dummy_stratified",
            ModelKind::GaussianNb => "gaussian_nb",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::SvmRbf => "svm_rbf",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Short name used in report tables.
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::DummyStratified => "DUMMY",
            ModelKind::GaussianNb => "NB",
            ModelKind::LogisticRegression => "LR",
            ModelKind::SvmRbf => "SVM",
            ModelKind::RandomForest => "RF",
            ModelKind::Mlp => "MLP",
        }
    }

    pub fn default_weighting(self) -> ClassWeighting {
        match self {
            ModelKind::LogisticRegression | ModelKind::SvmRbf | ModelKind::Mlp => ClassWeighting::Balanced,
            _ => ClassWeighting::None,
        }
    }

    /// Whether `predict_scores` rows are probability vectors.
    pub fn probabilistic(self) -> bool {
        self != ModelKind::SvmRbf
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == lower || k.short_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    Balanced,
}

/// Per-kind hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Hyperparams {
    Dummy(dummy::DummyParams),
    Nb(nb::NbParams),
    Logistic(logistic::LogisticParams),
    Svm(svm::SvmParams),
    Forest(forest::ForestParams),
    Mlp(mlp::MlpParams),
}

impl Hyperparams {
    pub fn defaults(kind: ModelKind) -> Self {
        match kind {
            ModelKind::DummyStratified => Hyperparams::Dummy(Default::default()),
            ModelKind::GaussianNb => Hyperparams::Nb(Default::default()),
            ModelKind::LogisticRegression => Hyperparams::Logistic(Default::default()),
            ModelKind::SvmRbf => Hyperparams::Svm(Default::default()),
            ModelKind::RandomForest => Hyperparams::Forest(Default::default()),
            ModelKind::Mlp => Hyperparams::Mlp(Default::default()),
        }
    }

    fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::Dummy(_) => ModelKind::DummyStratified,
            Hyperparams::Nb(_) => ModelKind::GaussianNb,
            Hyperparams::Logistic(_) => ModelKind::LogisticRegression,
            Hyperparams::Svm(_) => ModelKind::SvmRbf,
            Hyperparams::Forest(_) => ModelKind::RandomForest,
            Hyperparams::Mlp(_) => ModelKind::Mlp,
        }
    }

    fn parse(kind: ModelKind, value: serde_json::Value) -> Result<Self> {
        let value = if value.is_null() { serde_json::json!({}) } else { value };
        Ok(match kind {
            ModelKind::DummyStratified => Hyperparams::Dummy(serde_json::from_value(value)?),
            ModelKind::GaussianNb => Hyperparams::Nb(serde_json::from_value(value)?),
            ModelKind::LogisticRegression => Hyperparams::Logistic(serde_json::from_value(value)?),
            ModelKind::SvmRbf => Hyperparams::Svm(serde_json::from_value(value)?),
            ModelKind::RandomForest => Hyperparams::Forest(serde_json::from_value(value)?),
            ModelKind::Mlp => Hyperparams::Mlp(serde_json::from_value(value)?),
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Hyperparams::Dummy(_) => Ok(()),
            Hyperparams::Nb(p) => p.validate(),
            Hyperparams::Logistic(p) => p.validate(),
            Hyperparams::Svm(p) => p.validate(),
            Hyperparams::Forest(p) => p.validate(),
            Hyperparams::Mlp(p) => p.validate(),
        }
    }
}

#[derive(Deserialize, Serialize)]
struct RawSpec {
    kind: ModelKind,
    #[serde(default)]
    hyperparams: serde_json::Value,
    #[serde(default)]
    class_weighting: Option<ClassWeighting>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl TryFrom<RawSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = ModelSpec {
            kind: raw.kind,
            hyperparams: Hyperparams::parse(raw.kind, raw.hyperparams)?,
            class_weighting: raw.class_weighting.unwrap_or(raw.kind.default_weighting()),
            seed: raw.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ModelSpec> for RawSpec {
    fn from(s: ModelSpec) -> Self {
        RawSpec {
            kind: s.kind,
            hyperparams: serde_json::to_value(&s.hyperparams).unwrap_or(serde_json::Value::Null),
            class_weighting: Some(s.class_weighting),
            seed: s.seed,
        }
    }
}

impl ModelSpec {
    /// Default hyperparameters and weighting for `kind`.
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelSpec {
            kind,
            hyperparams: Hyperparams::defaults(kind),
            class_weighting: kind.default_weighting(),
            seed,
        }
    }

    pub fn with_hyperparams(mut self, hyperparams: Hyperparams) -> Result<Self> {
        self.hyperparams = hyperparams;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hyperparams.kind() != self.kind {
            return Err(Error::Config(format!(
                "hyperparameters for {} given to a {} spec",
                self.hyperparams.kind(),
                self.kind
            )));
        }
        self.hyperparams.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `w_c = N / (K * N_c)` for balanced weighting, 1 otherwise. Keys are the
/// distinct labels present.
pub fn compute_class_weights(labels: &[Label], mode: ClassWeighting) -> Result<BTreeMap<Label, f64>> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("class weights need at least one label".into()));
    }
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.clone()).or_default() += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(l, c)| {
            let w = match mode {
                ClassWeighting::None => 1.0,
                ClassWeighting::Balanced => n / (k * c as f64),
            };
            (l, w)
        })
        .collect())
}

fn index_weights(counts: &[usize], mode: ClassWeighting) -> Result<Vec<f64>> {
    let n: usize = counts.iter().sum();
    let k = counts.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(c, &nc)| match mode {
            ClassWeighting::None => Ok(1.0),
            ClassWeighting::Balanced if nc == 0 => Err(Error::InvalidInput(format!("class {c} has no samples"))),
            ClassWeighting::Balanced => Ok(n as f64 / (k * nc as f64)),
        })
        .collect()
}

/// Training data handed to each model: standardized features, class
/// indices, and per-class weights.
pub struct TrainData<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [usize],
    pub n_classes: usize,
    pub class_weights: &'a [f64],
}

impl TrainData<'_> {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &y in self.y {
            c[y] += 1;
        }
        c
    }

    pub fn sample_weights(&self) -> Vec<f64> {
        self.y.iter().map(|&c| self.class_weights[c]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    DummyStratified(dummy::DummyState),
    GaussianNb(nb::NbState),
    LogisticRegression(logistic::LogisticState),
    SvmRbf(svm::SvmState),
    RandomForest(forest::ForestState),
    Mlp(mlp::MlpState),
}

/// Facts about the fit worth reporting alongside scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub n_train: usize,
    pub n_features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// SVM: rows actually used after the training-set cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oob_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_val_f_macro: Option<f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub vocabulary: Vec<Label>,
    pub standardizer: Standardizer,
    pub state: ModelState,
    pub info: FitInfo,
}

fn check_finite(x: ArrayView2<f64>, what: &str) -> Result<()> {
    if let Some((idx, v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} feature ({}, {}) is not finite: {v}",
            idx.0, idx.1
        )));
    }
    Ok(())
}

fn encode(labels: &[Label], vocabulary: &[Label]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            vocabulary
                .binary_search(l)
                .map_err(|_| Error::UnknownLabel(l.to_string()))
        })
        .collect()
}

/// Fit without a validation set; the MLP then trains for its full epoch cap.
pub fn fit(spec: &ModelSpec, x: ArrayView2<f64>, y: &[Label]) -> Result<TrainedModel> {
    fit_with_validation(spec, x, y, None)
}

/// Fit on `(x, y)`. `validation` is used only for MLP early stopping; its
/// features pass through the training standardizer and never update it.
pub fn fit_with_validation(
    spec: &ModelSpec,
    x: ArrayView2<f64>,
    y: &[Label],
    validation: Option<(ArrayView2<f64>, &[Label])>,
) -> Result<TrainedModel> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on zero samples".into()));
    }
    check_finite(x, "training")?;
    let mut vocabulary: Vec<Label> = y.to_vec();
    vocabulary.sort();
    vocabulary.dedup();
    if vocabulary.len() < 2 && spec.kind != ModelKind::DummyStratified {
        return Err(Error::InvalidInput(format!(
            "{} needs at least 2 classes, got {}",
            spec.kind,
            vocabulary.len()
        )));
    }
    let yi = encode(y, &vocabulary)?;
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x)?;
    let mut counts = vec![0usize; vocabulary.len()];
    for &c in &yi {
        counts[c] += 1;
    }
    let weights = index_weights(&counts, spec.class_weighting)?;
    let data = TrainData {
        x: xs.view(),
        y: &yi,
        n_classes: vocabulary.len(),
        class_weights: &weights,
    };
    let mut info = FitInfo {
        n_train: x.nrows(),
        n_features: x.ncols(),
        ..FitInfo::default()
    };

    let state = match &spec.hyperparams {
        Hyperparams::Dummy(p) => ModelState::DummyStratified(dummy::fit(p, &data, spec.seed)),
        Hyperparams::Nb(p) => ModelState::GaussianNb(nb::fit(p, &data)),
        Hyperparams::Logistic(p) => ModelState::LogisticRegression(logistic::fit(p, &data, &mut info)),
        Hyperparams::Svm(p) => ModelState::SvmRbf(svm::fit(p, &data, spec.seed, &mut info)?),
        Hyperparams::Forest(p) => ModelState::RandomForest(forest::fit(p, &data, spec.seed, &mut info)),
        Hyperparams::Mlp(p) => {
            let val = match validation {
                Some((vx, vy)) => {
                    if vx.nrows() != vy.len() {
                        return Err(Error::DimensionMismatch {
                            expected: vx.nrows(),
                            got: vy.len(),
                        });
                    }
                    check_finite(vx, "validation")?;
                    let keep: Vec<usize> = (0..vy.len()).filter(|&i| vocabulary.binary_search(&vy[i]).is_ok()).collect();
                    if keep.len() < vy.len() {
                        info.notes.push(format!(
                            "{} validation samples have classes unseen in training and were ignored",
                            vy.len() - keep.len()
                        ));
                    }
                    let vxs = standardizer.transform(vx.select(ndarray::Axis(0), &keep).view())?;
                    let vyi: Vec<usize> = keep.iter().map(|&i| vocabulary.binary_search(&vy[i]).unwrap_or(0)).collect();
                    (!keep.is_empty()).then_some((vxs, vyi))
                }
                None => None,
            };
            ModelState::Mlp(mlp::fit(
                p,
                &data,
                val.as_ref().map(|(a, b)| (a.view(), b.as_slice())),
                spec.seed,
                &mut info,
            ))
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        vocabulary,
        standardizer,
        state,
        info,
    })
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    /// One row of per-class scores for each input row.
    pub fn predict_scores(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_finite(x, "input")?;
        let xs = self.standardizer.transform(x)?;
        let xs = xs.view();
        Ok(match &self.state {
            ModelState::DummyStratified(s) => s.scores(xs.nrows(), self.spec.seed),
            ModelState::GaussianNb(s) => s.scores(xs),
            ModelState::LogisticRegression(s) => s.scores(xs),
            ModelState::SvmRbf(s) => s.scores(xs),
            ModelState::RandomForest(s) => s.scores(xs),
            ModelState::Mlp(s) => s.scores(xs),
        })
    }

    pub fn predict_indices(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let s = self.predict_scores(x)?;
        Ok(s.outer_iter().map(argmax).collect())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        Ok(self
            .predict_indices(x)?
            .into_iter()
            .map(|i| self.vocabulary[i].clone())
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "model format version {} (this build reads {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
