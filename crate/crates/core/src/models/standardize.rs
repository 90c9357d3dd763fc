use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature z-scoring with statistics from the matrix it was fit on.
/// Features whose standard deviation is below 1e-12 get a scale of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x.sum_axis(Axis(0)) / n;
        let std = Array1::from_iter(x.axis_iter(Axis(1)).zip(mean.iter()).map(|(col, &m)| {
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            if s < 1e-12 {
                1.0
            } else {
                s
            }
        }));
        Standardizer { mean, std }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for mut row in out.outer_iter_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_mean_unit_variance() {
        let x = array![[1.0, 10.0, 3.0], [2.0, 20.0, 3.0], [6.0, 0.0, 3.0]];
        let s = Standardizer::fit(x.view());
        let z = s.transform(x.view()).unwrap();
        for j in 0..2 {
            let col = z.column(j);
            assert!(col.sum().abs() < 1e-12);
            assert!((col.dot(&col) / 3.0 - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.std[2], 1.0);
        assert!(z.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn only_fit_data_shapes_the_statistics() {
        let train = array![[0.0], [2.0]];
        let s = Standardizer::fit(train.view());
        let test = array![[100.0]];
        assert_eq!(s.transform(test.view()).unwrap()[[0, 0]], 99.0);
        assert!(s.transform(array![[1.0, 2.0]].view()).is_err());
    }
}
