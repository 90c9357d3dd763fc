//! Stratified dummy: predictions are draws from the training class
//! distribution, independent of the features.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::models::TrainData;
use crate::rng::Stream;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DummyParams {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyState {
    pub class_probs: Vec<f64>,
}

pub fn fit(_params: &DummyParams, data: &TrainData, _seed: u64) -> DummyState {
    let n = data.y.len() as f64;
    DummyState {
        class_probs: data.class_counts().iter().map(|&c| c as f64 / n).collect(),
    }
}

impl DummyState {
    /// One-hot rows; row `i` holds the class drawn for the i-th input.
    /// The draw sequence restarts from the model seed on every call.
    pub fn scores(&self, n_rows: usize, seed: u64) -> Array2<f64> {
        let mut rng = Stream::new(seed, 0x44_55_4d_4d_59);
        let mut out = Array2::zeros((n_rows, self.class_probs.len()));
        for i in 0..n_rows {
            out[[i, rng.weighted_index(&self.class_probs)]] = 1.0;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::Label;
    use crate::models::{fit as fit_model, ModelKind, ModelSpec};

    #[test]
    fn long_run_frequencies_match_priors() {
        let mut y = vec![Label::Normal; 900];
        y.extend(vec![Label::Failure; 100]);
        let x = Array2::zeros((1000, 1));
        let m = fit_model(&ModelSpec::new(ModelKind::DummyStratified, 3), x.view(), &y).unwrap();
        let probe = Array2::zeros((100_000, 1));
        let pred = m.predict(probe.view()).unwrap();
        let normal = pred.iter().filter(|l| **l == Label::Normal).count() as f64 / 1e5;
        assert!((normal - 0.9).abs() <= 0.02, "{normal}");
    }

    #[test]
    fn ignores_features() {
        let y = vec![Label::Normal, Label::Failure, Label::Normal];
        let m = fit_model(&ModelSpec::new(ModelKind::DummyStratified, 3), Array2::zeros((3, 2)).view(), &y).unwrap();
        let a = m.predict(Array2::zeros((50, 2)).view()).unwrap();
        let b = m.predict(Array2::from_elem((50, 2), 7.0).view()).unwrap();
        assert_eq!(a, b);
    }
}
