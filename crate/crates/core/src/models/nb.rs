//! Gaussian naive Bayes with class-frequency priors.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::TrainData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    /// Added to every variance, as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { var_smoothing: 1e-9 }
    }
}

impl NbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.var_smoothing >= 0.0) {
            return Err(Error::Config(format!("var_smoothing must be >= 0, got {}", self.var_smoothing)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbState {
    pub log_prior: Vec<f64>,
    /// `K x d`
    pub means: Array2<f64>,
    pub vars: Array2<f64>,
}

/// Class weights are not used: priors come from class frequencies.
pub fn fit(params: &NbParams, data: &TrainData) -> NbState {
    let (n, d) = data.x.dim();
    let k = data.n_classes;
    let counts = data.class_counts();
    let mut means = Array2::<f64>::zeros((k, d));
    for (row, &c) in data.x.outer_iter().zip(data.y) {
        means.row_mut(c).scaled_add(1.0, &row);
    }
    for c in 0..k {
        let nc = counts[c].max(1) as f64;
        means.row_mut(c).mapv_inplace(|v| v / nc);
    }
    let mut vars = Array2::<f64>::zeros((k, d));
    for (row, &c) in data.x.outer_iter().zip(data.y) {
        for j in 0..d {
            let dv = row[j] - means[[c, j]];
            vars[[c, j]] += dv * dv;
        }
    }
    for c in 0..k {
        let nc = counts[c].max(1) as f64;
        vars.row_mut(c).mapv_inplace(|v| v / nc);
    }
    let overall_mean = data.x.sum_axis(Axis(0)) / n as f64;
    let max_var = data
        .x
        .axis_iter(Axis(1))
        .zip(overall_mean.iter())
        .map(|(col, &m)| col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64)
        .fold(0.0, f64::max);
    let floor = params.var_smoothing * max_var;
    // all-constant inputs would leave a zero variance; keep the density finite
    let floor = if floor > 0.0 { floor } else { f64::MIN_POSITIVE.sqrt() };
    vars.mapv_inplace(|v| v + floor);
    NbState {
        log_prior: counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect(),
        means,
        vars,
    }
}

impl NbState {
    pub fn joint_log_likelihood(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let k = self.log_prior.len();
        let mut out = Array2::zeros((x.nrows(), k));
        let log_norm: Vec<f64> = (0..k)
            .map(|c| {
                -0.5 * self
                    .vars
                    .row(c)
                    .iter()
                    .map(|v| (2.0 * std::f64::consts::PI * v).ln())
                    .sum::<f64>()
            })
            .collect();
        for (i, row) in x.outer_iter().enumerate() {
            for c in 0..k {
                let mut q = 0.0;
                for ((v, m), s2) in row.iter().zip(self.means.row(c)).zip(self.vars.row(c)) {
                    q += (v - m) * (v - m) / s2;
                }
                out[[i, c]] = self.log_prior[c] + log_norm[c] - 0.5 * q;
            }
        }
        out
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut jll = self.joint_log_likelihood(x);
        for mut row in jll.outer_iter_mut() {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        jll
    }
}

#[cfg(test)]
mod tests {
    use crate::labeling::Label;
    use crate::models::test_data::*;
    use crate::models::{fit, ModelKind, ModelSpec};
    use ndarray::array;
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};

    #[test]
    fn blobs_reach_the_bayes_rate() {
        let (x, y) = blobs(&[vec![-3.0, 0.0], vec![3.0, 0.0]], 500, 1.0, 4);
        let (xt, yt) = blobs(&[vec![-3.0, 0.0], vec![3.0, 0.0]], 2000, 1.0, 5);
        let m = fit(&ModelSpec::new(ModelKind::GaussianNb, 0), x.view(), &y).unwrap();
        let acc = accuracy(&m.predict(xt.view()).unwrap(), &yt);
        let bayes = Normal::new(0.0, 1.0).unwrap().cdf(3.0);
        assert!((bayes - 0.9987).abs() < 1e-4);
        assert!(acc >= 0.995, "{acc}");
    }

    #[test]
    fn equal_likelihood_ties_go_to_lower_index() {
        // symmetric classes: the origin is equidistant from both means
        let x = array![[-1.0], [-2.0], [1.0], [2.0]];
        let y = vec![Label::Failure, Label::Failure, Label::Normal, Label::Normal];
        let m = fit(&ModelSpec::new(ModelKind::GaussianNb, 0), x.view(), &y).unwrap();
        let s = m.predict_scores(array![[0.0]].view()).unwrap();
        assert_eq!(s[[0, 0]], s[[0, 1]]);
        assert_eq!(m.predict(array![[0.0]].view()).unwrap(), vec![Label::Normal]);
    }

    #[test]
    fn matches_direct_density_formula() {
        let x = array![[0.0, 1.0], [1.0, 3.0], [4.0, 0.0], [6.0, 1.0], [5.0, 2.0]];
        let y: Vec<Label> = ["a", "a", "b", "b", "b"].iter().map(|s| Label::from(*s)).collect();
        let m = fit(&ModelSpec::new(ModelKind::GaussianNb, 0), x.view(), &y).unwrap();
        // independent computation on the standardized inputs
        let z = m.standardizer.transform(x.view()).unwrap();
        let probe = array![[2.0, 2.0]];
        let zp = m.standardizer.transform(probe.view()).unwrap();
        let mut logp = [0.0f64; 2];
        for (c, rows) in [[0usize, 1].as_slice(), [2, 3, 4].as_slice()].iter().enumerate() {
            let prior = rows.len() as f64 / 5.0;
            logp[c] = prior.ln();
            for j in 0..2 {
                let mu = rows.iter().map(|&r| z[[r, j]]).sum::<f64>() / rows.len() as f64;
                let var = rows.iter().map(|&r| (z[[r, j]] - mu).powi(2)).sum::<f64>() / rows.len() as f64 + 1e-9;
                logp[c] += Normal::new(mu, var.sqrt()).unwrap().ln_pdf(zp[[0, j]]);
            }
        }
        let p0 = 1.0 / (1.0 + (logp[1] - logp[0]).exp());
        let s = m.predict_scores(probe.view()).unwrap();
        assert!((s[[0, 0]] - p0).abs() < 1e-9, "{} vs {p0}", s[[0, 0]]);
    }
}
