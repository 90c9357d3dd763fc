//! Multinomial logistic regression.
//!
//! Minimizes `(1/N) sum_i w_i CE_i + ||W||^2 / (2 C N)` over weights `W`
//! (`K x d`) and unpenalized intercepts, by full-batch gradient descent with
//! a backtracking (Armijo) line search. Stops when the gradient norm is at
//! most `tol` or after `max_iter` steps.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FitInfo, TrainData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            c: 1.0,
            max_iter: 2000,
            tol: 1e-5,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Config(format!("invalid logistic regression parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticState {
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.outer_iter_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

pub(crate) struct Objective<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    w: Vec<f64>,
    k: usize,
    reg: f64,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(data: &'a TrainData, c: f64) -> Self {
        let n = data.x.nrows() as f64;
        Objective {
            x: data.x,
            y: data.y,
            w: data.sample_weights(),
            k: data.n_classes,
            reg: 1.0 / (c * n),
        }
    }

    fn logits(&self, weights: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
        self.x.dot(&weights.t()) + &b.view().insert_axis(Axis(0))
    }

    pub(crate) fn loss(&self, weights: &Array2<f64>, b: &Array1<f64>) -> f64 {
        let logits = self.logits(weights, b);
        let n = self.x.nrows() as f64;
        let mut total = 0.0;
        for (i, row) in logits.outer_iter().enumerate() {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += self.w[i] * (lse - row[self.y[i]]);
        }
        total / n + 0.5 * self.reg * weights.iter().map(|v| v * v).sum::<f64>()
    }

    pub(crate) fn gradient(&self, weights: &Array2<f64>, b: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
        let mut p = self.logits(weights, b);
        softmax_rows(&mut p);
        let n = self.x.nrows() as f64;
        for (i, mut row) in p.outer_iter_mut().enumerate() {
            row[self.y[i]] -= 1.0;
            row.mapv_inplace(|v| v * self.w[i] / n);
        }
        let gw = p.t().dot(&self.x) + &(weights * self.reg);
        let gb = p.sum_axis(Axis(0));
        (gw, gb)
    }
}

pub fn fit(params: &LogisticParams, data: &TrainData, info: &mut FitInfo) -> LogisticState {
    let obj = Objective::new(data, params.c);
    let d = data.x.ncols();
    let mut w = Array2::<f64>::zeros((obj.k, d));
    let mut b = Array1::<f64>::zeros(obj.k);
    let mut loss = obj.loss(&w, &b);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..params.max_iter {
        let (gw, gb) = obj.gradient(&w, &b);
        let g2: f64 = gw.iter().chain(gb.iter()).map(|v| v * v).sum();
        if g2.sqrt() <= params.tol {
            converged = true;
            iterations = it;
            break;
        }
        // Armijo backtracking; start a little above the last accepted step
        step *= 2.0;
        loop {
            let nw = &w - &(&gw * step);
            let nb = &b - &(&gb * step);
            let nl = obj.loss(&nw, &nb);
            if nl <= loss - 0.5 * step * g2 || step < 1e-12 {
                w = nw;
                b = nb;
                loss = nl;
                break;
            }
            step *= 0.5;
        }
        iterations = it + 1;
    }
    info.iterations = Some(iterations);
    info.converged = Some(converged);
    if !converged {
        info.notes.push(format!("logistic regression hit the {} iteration cap", params.max_iter));
    }
    LogisticState {
        weights: w,
        intercepts: b,
    }
}

impl LogisticState {
    pub fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut logits = x.dot(&self.weights.t()) + &self.intercepts.view().insert_axis(Axis(0));
        softmax_rows(&mut logits);
        logits
    }
}
