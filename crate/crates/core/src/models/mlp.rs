//! Feed-forward network: each hidden layer is Linear, BatchNorm, ReLU; the
//! output layer is Linear followed by softmax. Trained with Adam on the
//! class-weighted cross-entropy `sum_i w_i CE_i / B` over mini-batches.
//!
//! With a validation set, training stops once validation macro-F has not
//! improved for `patience` epochs and the best epoch's parameters are kept.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{argmax, FitInfo, TrainData};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Weight on the previous running statistic.
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub weight_decay: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![256, 128],
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
            weight_decay: 0.0,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty()
            || self.hidden.contains(&0)
            || !(self.learning_rate > 0.0)
            || self.batch_size < 2
            || self.max_epochs == 0
            || self.patience == 0
            || !(0.0..1.0).contains(&self.bn_momentum)
            || !(self.bn_eps > 0.0)
            || !(self.weight_decay >= 0.0)
        {
            return Err(Error::Config(format!("invalid MLP parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpState {
    pub hidden: Vec<HiddenLayer>,
    pub out_weight: Array2<f64>,
    pub out_bias: Array1<f64>,
    pub bn_eps: f64,
}

#[derive(Clone)]
struct Grads {
    hidden: Vec<[Array2<f64>; 1]>,
    vecs: Vec<[Array1<f64>; 3]>,
    out_weight: Array2<f64>,
    out_bias: Array1<f64>,
}

struct Cache {
    inputs: Vec<Array2<f64>>,
    xhat: Vec<Array2<f64>>,
    inv_std: Vec<Array1<f64>>,
    pre_relu: Vec<Array2<f64>>,
    last: Array2<f64>,
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.outer_iter_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl MlpState {
    fn init(d: usize, hidden: &[usize], k: usize, eps: f64, rng: &mut Stream) -> Self {
        let mut layers = Vec::new();
        let mut fan_in = d;
        for &h in hidden {
            let scale = (2.0 / fan_in as f64).sqrt();
            layers.push(HiddenLayer {
                weight: Array2::from_shape_fn((fan_in, h), |_| rng.normal() * scale),
                bias: Array1::zeros(h),
                gamma: Array1::ones(h),
                beta: Array1::zeros(h),
                running_mean: Array1::zeros(h),
                running_var: Array1::ones(h),
            });
            fan_in = h;
        }
        let scale = (1.0 / fan_in as f64).sqrt();
        MlpState {
            hidden: layers,
            out_weight: Array2::from_shape_fn((fan_in, k), |_| rng.normal() * scale),
            out_bias: Array1::zeros(k),
            bn_eps: eps,
        }
    }

    /// He-initialized network with `gamma = 1`, `beta = 0`.
    pub fn random(d: usize, hidden: &[usize], k: usize, seed: u64) -> Self {
        Self::init(d, hidden, k, 1e-5, &mut Stream::new(seed, 0x4d_4c_50))
    }

    /// Trainable parameters flattened in a fixed order: per hidden layer
    /// weight (row-major), bias, gamma, beta; then output weight and bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.hidden {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
            out.extend(l.gamma.iter());
            out.extend(l.beta.iter());
        }
        out.extend(self.out_weight.iter());
        out.extend(self.out_bias.iter());
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) {
        let mut it = values.iter().copied();
        let mut fill = |dst: &mut dyn Iterator<Item = &mut f64>| {
            for v in dst {
                *v = it.next().expect("parameter vector too short");
            }
        };
        for l in self.hidden.iter_mut() {
            fill(&mut l.weight.iter_mut());
            fill(&mut l.bias.iter_mut());
            fill(&mut l.gamma.iter_mut());
            fill(&mut l.beta.iter_mut());
        }
        fill(&mut self.out_weight.iter_mut());
        fill(&mut self.out_bias.iter_mut());
    }

    /// Training-mode loss (batch statistics, running statistics untouched)
    /// and its gradient in [`MlpState::parameters`] order.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &[usize], w: &[f64]) -> (f64, Vec<f64>) {
        let mut probe = self.clone();
        let (logits, cache) = probe.forward_train(x, None);
        let (loss, g) = probe.backward(&logits, &cache, y, w);
        let mut flat = Vec::new();
        for (li, gw) in g.hidden.iter().enumerate() {
            flat.extend(gw[0].iter());
            for v in &g.vecs[li] {
                flat.extend(v.iter());
            }
        }
        flat.extend(g.out_weight.iter());
        flat.extend(g.out_bias.iter());
        (loss, flat)
    }

    /// Inference with running batch-norm statistics.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for l in &self.hidden {
            let z = h.dot(&l.weight) + &l.bias;
            let inv = l.running_var.mapv(|v| 1.0 / (v + self.bn_eps).sqrt());
            h = ((z - &l.running_mean) * &inv * &l.gamma + &l.beta).mapv(|v| v.max(0.0));
        }
        h.dot(&self.out_weight) + &self.out_bias
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = self.logits(x);
        softmax_rows(&mut z);
        z
    }

    /// Training-mode forward pass using batch statistics. Returns the logits
    /// and what backprop needs; `momentum` updates running statistics.
    fn forward_train(&mut self, x: ArrayView2<f64>, momentum: Option<f64>) -> (Array2<f64>, Cache) {
        let b = x.nrows() as f64;
        let mut h = x.to_owned();
        let mut cache = Cache {
            inputs: Vec::new(),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            pre_relu: Vec::new(),
            last: Array2::zeros((0, 0)),
        };
        for l in self.hidden.iter_mut() {
            let z = h.dot(&l.weight) + &l.bias;
            let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
            let inv = var.mapv(|v| 1.0 / (v + self.bn_eps).sqrt());
            let xhat = &centered * &inv;
            let y = &xhat * &l.gamma + &l.beta;
            if let Some(m) = momentum {
                let unbiased = &var * (b / (b - 1.0).max(1.0));
                l.running_mean = &l.running_mean * m + &mean * (1.0 - m);
                l.running_var = &l.running_var * m + &unbiased * (1.0 - m);
            }
            cache.inputs.push(h);
            h = y.mapv(|v| v.max(0.0));
            cache.xhat.push(xhat);
            cache.inv_std.push(inv);
            cache.pre_relu.push(y);
        }
        let logits = h.dot(&self.out_weight) + &self.out_bias;
        cache.last = h;
        (logits, cache)
    }

    /// Weighted mean cross-entropy and its gradient, given logits from
    /// `forward_train`.
    fn backward(&self, logits: &Array2<f64>, cache: &Cache, y: &[usize], w: &[f64]) -> (f64, Grads) {
        let b = y.len() as f64;
        let mut p = logits.clone();
        softmax_rows(&mut p);
        let mut loss = 0.0;
        let mut d = p;
        for (i, (&c, &wi)) in y.iter().zip(w).enumerate() {
            loss -= wi * d[[i, c]].max(1e-300).ln();
            d[[i, c]] -= 1.0;
            d.row_mut(i).mapv_inplace(|v| v * wi / b);
        }
        loss /= b;

        let out_weight = cache.last.t().dot(&d);
        let out_bias = d.sum_axis(Axis(0));
        let mut dh = d.dot(&self.out_weight.t());
        let n_layers = self.hidden.len();
        let mut hidden = vec![[Array2::zeros((0, 0))]; n_layers];
        let mut vecs = vec![[Array1::zeros(0), Array1::zeros(0), Array1::zeros(0)]; n_layers];
        for li in (0..n_layers).rev() {
            let l = &self.hidden[li];
            let mut dy = dh;
            Zip::from(&mut dy).and(&cache.pre_relu[li]).for_each(|g, &y| {
                if y <= 0.0 {
                    *g = 0.0;
                }
            });
            let xhat = &cache.xhat[li];
            let dgamma = (&dy * xhat).sum_axis(Axis(0));
            let dbeta = dy.sum_axis(Axis(0));
            let dxhat = &dy * &l.gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
            let dz = (&dxhat * b - &sum_dxhat - xhat * &sum_dxhat_xhat) * &(&cache.inv_std[li] / b);
            hidden[li] = [cache.inputs[li].t().dot(&dz)];
            let dbias = dz.sum_axis(Axis(0));
            vecs[li] = [dbias, dgamma, dbeta];
            dh = dz.dot(&l.weight.t());
        }
        (
            loss,
            Grads {
                hidden,
                vecs,
                out_weight,
                out_bias,
            },
        )
    }
}

struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn adam_step2(p: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>, lr: f64, c1: f64, c2: f64) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
    });
}

fn adam_step1(p: &mut Array1<f64>, g: &Array1<f64>, m: &mut Array1<f64>, v: &mut Array1<f64>, lr: f64, c1: f64, c2: f64) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
    });
}

impl Adam {
    fn new(s: &MlpState) -> Self {
        let zeros = Grads {
            hidden: s.hidden.iter().map(|l| [Array2::zeros(l.weight.raw_dim())]).collect(),
            vecs: s
                .hidden
                .iter()
                .map(|l| {
                    let n = l.bias.len();
                    [Array1::zeros(n), Array1::zeros(n), Array1::zeros(n)]
                })
                .collect(),
            out_weight: Array2::zeros(s.out_weight.raw_dim()),
            out_bias: Array1::zeros(s.out_bias.len()),
        };
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, s: &mut MlpState, g: &Grads, lr: f64, weight_decay: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for (li, l) in s.hidden.iter_mut().enumerate() {
            let gw = if weight_decay > 0.0 {
                &g.hidden[li][0] + &(&l.weight * weight_decay)
            } else {
                g.hidden[li][0].clone()
            };
            adam_step2(&mut l.weight, &gw, &mut self.m.hidden[li][0], &mut self.v.hidden[li][0], lr, c1, c2);
            let [m0, m1, m2] = &mut self.m.vecs[li];
            let [v0, v1, v2] = &mut self.v.vecs[li];
            adam_step1(&mut l.bias, &g.vecs[li][0], m0, v0, lr, c1, c2);
            adam_step1(&mut l.gamma, &g.vecs[li][1], m1, v1, lr, c1, c2);
            adam_step1(&mut l.beta, &g.vecs[li][2], m2, v2, lr, c1, c2);
        }
        let gw = if weight_decay > 0.0 {
            &g.out_weight + &(&s.out_weight * weight_decay)
        } else {
            g.out_weight.clone()
        };
        adam_step2(&mut s.out_weight, &gw, &mut self.m.out_weight, &mut self.v.out_weight, lr, c1, c2);
        adam_step1(&mut s.out_bias, &g.out_bias, &mut self.m.out_bias, &mut self.v.out_bias, lr, c1, c2);
    }
}

/// Macro-averaged F1 over `k` classes from class indices.
pub fn macro_f1(truth: &[usize], pred: &[usize], k: usize) -> f64 {
    let mut tp = vec![0usize; k];
    let mut predicted = vec![0usize; k];
    let mut actual = vec![0usize; k];
    for (&t, &p) in truth.iter().zip(pred) {
        actual[t] += 1;
        predicted[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let f: f64 = (0..k)
        .map(|c| {
            let denom = predicted[c] + actual[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    f / k as f64
}

/// Mini-batch boundaries; a trailing batch of one row joins the previous one.
fn batches(n: usize, size: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = (start + size).min(n);
        if n - end == 1 {
            end = n;
        }
        out.push((start, end));
        start = end;
    }
    out
}

pub fn fit(
    params: &MlpParams,
    data: &TrainData,
    val: Option<(ArrayView2<f64>, &[usize])>,
    seed: u64,
    info: &mut FitInfo,
) -> MlpState {
    let n = data.y.len();
    let k = data.n_classes;
    let mut init_rng = Stream::new(seed, 0x4d_4c_50);
    let mut state = MlpState::init(data.x.ncols(), &params.hidden, k, params.bn_eps, &mut init_rng);
    let mut adam = Adam::new(&state);
    let mut order_rng = Stream::new(seed, 0x53_48_55_46);
    let w = data.sample_weights();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, usize, MlpState)> = None;
    let mut since_best = 0;
    let mut epochs = 0;
    let mut last_loss = f64::NAN;

    for epoch in 0..params.max_epochs {
        epochs = epoch + 1;
        order_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (a, b) in batches(n, params.batch_size) {
            let idx = &order[a..b];
            let xb = data.x.select(Axis(0), idx);
            let yb: Vec<usize> = idx.iter().map(|&i| data.y[i]).collect();
            let wb: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
            let (logits, cache) = state.forward_train(xb.view(), Some(params.bn_momentum));
            let (loss, grads) = state.backward(&logits, &cache, &yb, &wb);
            epoch_loss += loss * idx.len() as f64;
            adam.step(&mut state, &grads, params.learning_rate, params.weight_decay);
        }
        last_loss = epoch_loss / n as f64;
        if let Some((vx, vy)) = val {
            let pred: Vec<usize> = state.scores(vx).outer_iter().map(argmax).collect();
            let f = macro_f1(vy, &pred, k);
            if best.as_ref().is_none_or(|(bf, _, _)| f > *bf) {
                best = Some((f, epoch + 1, state.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= params.patience {
                    break;
                }
            }
        }
    }
    info.iterations = Some(epochs);
    info.notes.push(format!("final epoch training loss {last_loss:.6}"));
    match best {
        Some((f, epoch, s)) => {
            info.best_epoch = Some(epoch);
            info.best_val_f_macro = Some(f);
            info.converged = Some(epochs < params.max_epochs);
            s
        }
        None => state,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_data::*;
    use crate::models::{fit_with_validation, Hyperparams, ModelKind, ModelSpec};

    fn loss_at(s: &MlpState, x: ArrayView2<f64>, y: &[usize], w: &[f64]) -> f64 {
        let mut s = s.clone();
        let (logits, cache) = s.forward_train(x, None);
        s.backward(&logits, &cache, y, w).0
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Stream::new(4, 0);
        let x = Array2::from_shape_fn((16, 2), |_| rng.normal());
        let y: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let w: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.7 } else { 1.4 }).collect();
        let mut s = MlpState::init(2, &[8, 8], 2, 1e-5, &mut rng);
        for l in s.hidden.iter_mut() {
            l.gamma.mapv_inplace(|_| 0.5 + rng.uniform());
            l.beta.mapv_inplace(|_| 0.3 * rng.normal());
        }
        let mut probe = s.clone();
        let (logits, cache) = probe.forward_train(x.view(), None);
        let (_, g) = probe.backward(&logits, &cache, &y, &w);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, bump: &dyn Fn(&mut MlpState, f64)| {
            let mut plus = s.clone();
            bump(&mut plus, h);
            let mut minus = s.clone();
            bump(&mut minus, -h);
            let numeric = (loss_at(&plus, x.view(), &y, &w) - loss_at(&minus, x.view(), &y, &w)) / (2.0 * h);
            worst = worst.max(rel_err(analytic, numeric));
        };
        for li in 0..2 {
            let (r, c) = s.hidden[li].weight.dim();
            for i in 0..r {
                for j in 0..c {
                    check(g.hidden[li][0][[i, j]], &|m, e| m.hidden[li].weight[[i, j]] += e);
                }
            }
            for j in 0..c {
                check(g.vecs[li][1][j], &|m, e| m.hidden[li].gamma[j] += e);
                check(g.vecs[li][2][j], &|m, e| m.hidden[li].beta[j] += e);
            }
        }
        for i in 0..8 {
            for j in 0..2 {
                check(g.out_weight[[i, j]], &|m, e| m.out_weight[[i, j]] += e);
            }
        }
        for j in 0..2 {
            check(g.out_bias[j], &|m, e| m.out_bias[j] += e);
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
        // the pre-batch-norm bias has no effect on the loss
        assert!(g.vecs[0][0].iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn flat_parameters_round_trip() {
        let s = MlpState::random(3, &[4, 5], 2, 1);
        let p = s.parameters();
        assert_eq!(p.len(), 3 * 4 + 3 * 4 + 4 * 5 + 3 * 5 + 5 * 2 + 2);
        let mut t = s.clone();
        t.set_parameters(&p.iter().map(|v| v + 1.0).collect::<Vec<_>>());
        assert_eq!(t.hidden[1].gamma[0], 2.0);
        t.set_parameters(&p);
        assert_eq!(t, s);
        let x = Array2::from_shape_fn((6, 3), |(i, j)| (i * 3 + j) as f64 * 0.1 - 0.5);
        let (_, g) = s.loss_and_gradient(x.view(), &[0, 1, 0, 1, 1, 0], &[1.0; 6]);
        assert_eq!(g.len(), p.len());
    }

    #[test]
    fn batch_boundaries() {
        assert_eq!(batches(10, 4), vec![(0, 4), (4, 8), (8, 10)]);
        assert_eq!(batches(9, 4), vec![(0, 4), (4, 9)]);
        assert_eq!(batches(4, 4), vec![(0, 4)]);
    }

    #[test]
    fn macro_f1_oracle() {
        // class 0: tp 1, fp 1, fn 1 -> 0.5; class 1: tp 1, fp 1, fn 1 -> 0.5
        assert!((macro_f1(&[0, 0, 1, 1], &[0, 1, 0, 1], 2) - 0.5).abs() < 1e-12);
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3), 1.0);
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let (x, y) = blobs(&[vec![0.0, 0.0], vec![1.0, 1.0]], 100, 1.0, 5);
        let (vx, vy) = blobs(&[vec![0.0, 0.0], vec![1.0, 1.0]], 50, 1.0, 6);
        let spec = ModelSpec::new(ModelKind::Mlp, 3)
            .with_hyperparams(Hyperparams::Mlp(MlpParams {
                hidden: vec![32, 16],
                max_epochs: 150,
                batch_size: 32,
                patience: 5,
                learning_rate: 1e-2,
                ..Default::default()
            }))
            .unwrap();
        let m = fit_with_validation(&spec, x.view(), &y, Some((vx.view(), &vy))).unwrap();
        let best = m.info.best_epoch.unwrap();
        assert!(m.info.iterations.unwrap() <= best + 5);
        let pred = m.predict(vx.view()).unwrap();
        let vi: Vec<usize> = vy.iter().map(|l| m.vocabulary.binary_search(l).unwrap()).collect();
        let pi: Vec<usize> = pred.iter().map(|l| m.vocabulary.binary_search(l).unwrap()).collect();
        assert!((macro_f1(&vi, &pi, 2) - m.info.best_val_f_macro.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let (x, y) = xor(40, 0.2, 1);
        let spec = ModelSpec::new(ModelKind::Mlp, 8)
            .with_hyperparams(Hyperparams::Mlp(MlpParams {
                hidden: vec![8],
                max_epochs: 5,
                ..Default::default()
            }))
            .unwrap();
        let a = crate::models::fit(&spec, x.view(), &y).unwrap();
        let b = crate::models::fit(&spec, x.view(), &y).unwrap();
        assert_eq!(a, b);
    }
}
