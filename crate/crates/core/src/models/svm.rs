//! RBF-kernel support vector machine trained by sequential minimal
//! optimization.
//!
//! Each binary problem solves the dual
//! `min 1/2 a^T Q a - sum a`, `Q_ij = y_i y_j K(x_i, x_j)`,
//! subject to `0 <= a_i <= C_i` and `y^T a = 0`, with `C_i = C * w_{class(i)}`.
//! Working pairs are chosen by maximal violation for the first index and
//! second-order gain for the second. Training stops when the maximal KKT
//! violation `m(a) - M(a)` drops below `tol`.
//!
//! Two classes give one problem (positive = the second class) and scores
//! `[-f, f]`; more classes are handled one-vs-rest and score `f_c` per class.
//! Scores are margins, not probabilities.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FitInfo, TrainData};
use crate::rng::Stream;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// Kernel width; `None` means `1 / (d * Var(X))` over the standardized
    /// training matrix.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Class-stratified subsample size when the training set is larger.
    pub max_train_samples: usize,
    pub max_iter: Option<usize>,
    /// Kernel cache budget.
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_train_samples: 20_000,
            max_iter: None,
            cache_mb: 512,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.tol > 0.0) || self.max_train_samples < 2 || self.gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::Config(format!("invalid SVM parameters {self:?}")));
        }
        Ok(())
    }
}

/// A kernel matrix accessed by rows.
pub trait KernelRows: Sync {
    fn n(&self) -> usize;
    fn diag(&self, i: usize) -> f64;
    fn row(&self, i: usize, out: &mut [f64]);
}

/// Precomputed dense kernel, used by tests and small problems.
pub struct DenseKernel(pub Array2<f64>);

impl KernelRows for DenseKernel {
    fn n(&self) -> usize {
        self.0.nrows()
    }
    fn diag(&self, i: usize) -> f64 {
        self.0[[i, i]]
    }
    fn row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.0.row(i).as_slice().expect("standard layout"));
    }
}

pub struct RbfKernel<'a> {
    x: ArrayView2<'a, f64>,
    sq_norms: Vec<f64>,
    gamma: f64,
}

impl<'a> RbfKernel<'a> {
    pub fn new(x: ArrayView2<'a, f64>, gamma: f64) -> Self {
        let sq_norms = x.outer_iter().map(|r| r.dot(&r)).collect();
        RbfKernel { x, sq_norms, gamma }
    }
}

fn rbf(a: ArrayView1<f64>, b: ArrayView1<f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * d2).exp()
}

impl KernelRows for RbfKernel<'_> {
    fn n(&self) -> usize {
        self.x.nrows()
    }
    fn diag(&self, _i: usize) -> f64 {
        1.0
    }
    fn row(&self, i: usize, out: &mut [f64]) {
        let xi = self.x.row(i);
        let ni = self.sq_norms[i];
        out.par_iter_mut().enumerate().with_min_len(256).for_each(|(t, o)| {
            let d2 = (ni + self.sq_norms[t] - 2.0 * xi.dot(&self.x.row(t))).max(0.0);
            *o = (-self.gamma * d2).exp();
        });
    }
}

/// Least-recently-used cache of kernel rows.
struct RowCache<'k> {
    kernel: &'k dyn KernelRows,
    rows: HashMap<usize, (u64, Vec<f64>)>,
    capacity: usize,
    clock: u64,
}

impl<'k> RowCache<'k> {
    fn new(kernel: &'k dyn KernelRows, budget_bytes: usize) -> Self {
        let n = kernel.n().max(1);
        let capacity = (budget_bytes / (8 * n)).max(2);
        RowCache {
            kernel,
            rows: HashMap::new(),
            capacity,
            clock: 0,
        }
    }

    fn ensure(&mut self, i: usize) {
        self.clock += 1;
        if let Some(entry) = self.rows.get_mut(&i) {
            entry.0 = self.clock;
            return;
        }
        if self.rows.len() >= self.capacity {
            let oldest = self.rows.iter().min_by_key(|(_, (t, _))| *t).map(|(k, _)| *k);
            if let Some(k) = oldest {
                self.rows.remove(&k);
            }
        }
        let mut buf = vec![0.0; self.kernel.n()];
        self.kernel.row(i, &mut buf);
        self.rows.insert(i, (self.clock, buf));
    }

    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(i);
        self.ensure(j);
        (&self.rows[&i].1, &self.rows[&j].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Final `m(a) - M(a)`.
    pub gap: f64,
}

/// Solve one binary dual problem. `y` holds +1/-1.
pub fn solve_binary(
    kernel: &dyn KernelRows,
    y: &[f64],
    c: &[f64],
    tol: f64,
    max_iter: usize,
    cache_bytes: usize,
) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective, Q a - e
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| kernel.diag(i)).collect();
    let mut cache = RowCache::new(kernel, cache_bytes);
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    let in_up = |a: f64, yt: f64, ct: f64| (yt > 0.0 && a < ct) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64, ct: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < ct);

    while iterations < max_iter {
        // first index: maximal violation over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t], c[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t], c[t]) {
                gmin = gmin.min(-y[t] * grad[t]);
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || gap < tol {
            converged = true;
            break;
        }

        cache.ensure(i);
        let ki = cache.rows[&i].1.clone();
        // second index: largest second-order decrease over I_low
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t], c[t]) {
                let b = gmax + y[t] * grad[t];
                if b > 0.0 {
                    let mut a = diag[i] + diag[t] - 2.0 * ki[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let gain = -(b * b) / a;
                    if gain < best {
                        best = gain;
                        j = t;
                    }
                }
            }
        }
        if j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (ki, kj) = cache.pair(i, j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * ki[j];
        let (ci, cj) = (c[i], c[j]);
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        let (yi, yj) = (y[i], y[j]);
        grad.par_iter_mut().enumerate().with_min_len(1024).for_each(|(t, g)| {
            *g += y[t] * (yi * ki[t] * dai + yj * kj[t] * daj);
        });
    }

    // rho: average over free variables, else midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    // 1/2 a^T Q a - e^T a = 1/2 sum a_t (G_t - 1)
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
        objective,
        gap,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmState {
    pub gamma: f64,
    /// Rows of the training matrix that are support vectors of any problem.
    pub support_vectors: Array2<f64>,
    /// `problems x n_sv`: `alpha_i y_i` per problem, zero where not a support vector.
    pub dual_coef: Array2<f64>,
    pub rho: Vec<f64>,
    pub n_classes: usize,
}

/// Class-stratified subsample indices of size `cap` (largest-remainder quotas).
pub fn stratified_subsample(y: &[usize], n_classes: usize, cap: usize, seed: u64) -> Vec<usize> {
    if y.len() <= cap {
        return (0..y.len()).collect();
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in y.iter().enumerate() {
        by_class[c].push(i);
    }
    let n = y.len() as f64;
    let raw: Vec<f64> = by_class.iter().map(|v| v.len() as f64 * cap as f64 / n).collect();
    let mut quota: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut rest = cap - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n_classes).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &c in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            rest -= 1;
        }
    }
    let mut rng = Stream::new(seed, 0x53_56_4d);
    let mut out = Vec::with_capacity(cap);
    for (c, members) in by_class.iter_mut().enumerate() {
        rng.shuffle(members);
        out.extend_from_slice(&members[..quota[c]]);
    }
    out.sort_unstable();
    out
}

/// `1 / (d * Var(X))` with the variance over every entry of `x`.
pub fn scale_gamma(x: ArrayView2<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let d = x.ncols() as f64;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0
    }
}

pub fn fit(params: &SvmParams, data: &TrainData, seed: u64, info: &mut FitInfo) -> Result<SvmState> {
    let keep = stratified_subsample(data.y, data.n_classes, params.max_train_samples, seed);
    if keep.len() < data.y.len() {
        info.notes.push(format!(
            "SVM trained on a class-stratified subsample of {} of {} samples",
            keep.len(),
            data.y.len()
        ));
    }
    info.n_used = Some(keep.len());
    let x = data.x.select(Axis(0), &keep);
    let y: Vec<usize> = keep.iter().map(|&i| data.y[i]).collect();
    let gamma = params.gamma.unwrap_or_else(|| scale_gamma(x.view()));
    let kernel = RbfKernel::new(x.view(), gamma);
    let n = y.len();
    let max_iter = params.max_iter.unwrap_or(10_000_000usize.max(100 * n));
    let c: Vec<f64> = y.iter().map(|&k| params.c * data.class_weights[k]).collect();

    let positives: Vec<usize> = if data.n_classes == 2 { vec![1] } else { (0..data.n_classes).collect() };
    let budget = params.cache_mb * 1024 * 1024 / positives.len().min(rayon::current_num_threads()).max(1);
    let solutions: Vec<SmoSolution> = positives
        .par_iter()
        .map(|&pos| {
            let yy: Vec<f64> = y.iter().map(|&k| if k == pos { 1.0 } else { -1.0 }).collect();
            solve_binary(&kernel, &yy, &c, params.tol, max_iter, budget)
        })
        .collect();
    let unconverged = solutions.iter().filter(|s| !s.converged).count();
    if unconverged > 0 {
        info.notes.push(format!("{unconverged} SVM subproblems hit the iteration cap"));
    }
    info.converged = Some(unconverged == 0);
    info.iterations = Some(solutions.iter().map(|s| s.iterations).sum());

    let sv: Vec<usize> = (0..n).filter(|&t| solutions.iter().any(|s| s.alpha[t] > 0.0)).collect();
    let mut dual_coef = Array2::zeros((positives.len(), sv.len()));
    for (p, (s, &pos)) in solutions.iter().zip(&positives).enumerate() {
        for (col, &t) in sv.iter().enumerate() {
            let yt = if y[t] == pos { 1.0 } else { -1.0 };
            dual_coef[[p, col]] = s.alpha[t] * yt;
        }
    }
    Ok(SvmState {
        gamma,
        support_vectors: x.select(Axis(0), &sv),
        dual_coef,
        rho: solutions.iter().map(|s| s.rho).collect(),
        n_classes: data.n_classes,
    })
}

impl SvmState {
    /// Per-problem decision values `f_p(x)`.
    pub fn decision(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let rows: Vec<Array1<f64>> = x
            .outer_iter()
            .into_par_iter()
            .map(|row| {
                let k: Array1<f64> = self
                    .support_vectors
                    .outer_iter()
                    .map(|sv| rbf(row, sv, self.gamma))
                    .collect();
                self.dual_coef.dot(&k) - &Array1::from(self.rho.clone())
            })
            .collect();
        let mut out = Array2::zeros((x.nrows(), self.rho.len()));
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).assign(&r);
        }
        out
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let f = self.decision(x);
        if self.n_classes == 2 {
            let mut out = Array2::zeros((x.nrows(), 2));
            for i in 0..x.nrows() {
                out[[i, 0]] = -f[[i, 0]];
                out[[i, 1]] = f[[i, 0]];
            }
            out
        } else {
            f
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_data::*;
    use crate::models::{fit as fit_model, ModelKind, ModelSpec};

    fn gram(x: &Array2<f64>, gamma: f64) -> Array2<f64> {
        let n = x.nrows();
        Array2::from_shape_fn((n, n), |(i, j)| rbf(x.row(i), x.row(j), gamma))
    }

    fn dual_objective(k: &Array2<f64>, y: &[f64], a: &[f64]) -> f64 {
        let n = y.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += a[i] * a[j] * y[i] * y[j] * k[[i, j]];
            }
        }
        0.5 * q - a.iter().sum::<f64>()
    }

    /// Exact dual optimum by enumerating which variables sit at 0, at C, or
    /// free, solving the equality-constrained system for the free ones.
    fn active_set_oracle(k: &Array2<f64>, y: &[f64], c: &[f64]) -> f64 {
        let n = y.len();
        let mut best = f64::INFINITY;
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut state = vec![0u8; n];
            let mut m = code;
            for s in state.iter_mut() {
                *s = (m % 3) as u8;
                m /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
            let mut a: Vec<f64> = (0..n).map(|i| if state[i] == 1 { c[i] } else { 0.0 }).collect();
            if !free.is_empty() {
                // KKT system for free vars with multiplier b:
                // sum_j Q_ij a_j + y_i b = 1 - sum_{fixed} Q_ij a_j ; sum y_i a_i = 0
                let f = free.len();
                let mut mat = nalgebra::DMatrix::<f64>::zeros(f + 1, f + 1);
                let mut rhs = nalgebra::DVector::<f64>::zeros(f + 1);
                for (r, &i) in free.iter().enumerate() {
                    let mut fixed = 0.0;
                    for j in 0..n {
                        if state[j] == 1 {
                            fixed += y[i] * y[j] * k[[i, j]] * a[j];
                        }
                    }
                    for (s, &j) in free.iter().enumerate() {
                        mat[(r, s)] = y[i] * y[j] * k[[i, j]];
                    }
                    mat[(r, f)] = y[i];
                    rhs[r] = 1.0 - fixed;
                }
                for (s, &j) in free.iter().enumerate() {
                    mat[(f, s)] = y[j];
                }
                rhs[f] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c[j]).sum::<f64>();
                let Some(sol) = mat.lu().solve(&rhs) else { continue };
                for (s, &j) in free.iter().enumerate() {
                    a[j] = sol[s];
                }
            }
            let feasible = (0..n).all(|i| a[i] >= -1e-9 && a[i] <= c[i] + 1e-9)
                && (0..n).map(|i| y[i] * a[i]).sum::<f64>().abs() < 1e-9;
            if feasible {
                best = best.min(dual_objective(k, y, &a));
            }
        }
        best
    }

    fn instance(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut s = Stream::new(seed, 0);
        let x = Array2::from_shape_fn((n, 2), |_| s.normal());
        let y: Vec<f64> = (0..n)
            .map(|i| if x[[i, 0]] + 0.5 * s.normal() > 0.0 { 1.0 } else { -1.0 })
            .collect();
        (x, y)
    }

    #[test]
    fn matches_active_set_oracle() {
        for seed in 0..6 {
            let n = 5 + seed as usize % 4;
            let (x, mut y) = instance(n, seed);
            y[0] = 1.0;
            y[1] = -1.0;
            let k = gram(&x, 0.5);
            let c: Vec<f64> = y.iter().map(|&v| if v > 0.0 { 1.0 } else { 2.0 }).collect();
            let sol = solve_binary(&DenseKernel(k.clone()), &y, &c, 1e-6, 100_000, 1 << 20);
            let oracle = active_set_oracle(&k, &y, &c);
            let ours = dual_objective(&k, &y, &sol.alpha);
            assert!((ours - oracle).abs() < 1e-3, "seed {seed}: {ours} vs {oracle}");
            assert!((sol.objective - ours).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_frozen_qp_solution() {
        // optimum and decision values computed once with an interior-point
        // QP solver and LIBSVM on the same deterministic instance
        let n = 16;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { (1.3 * i as f64).sin() } else { (0.7 * i as f64).cos() });
        let y: Vec<f64> = (0..n).map(|i| if (2.1 * i as f64).sin() + 0.1 > 0.0 { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = y.iter().map(|&v| if v > 0.0 { 1.5 } else { 0.75 }).collect();
        let k = gram(&x, 0.8);
        let sol = solve_binary(&DenseKernel(k), &y, &c, 1e-9, 1_000_000, 1 << 20);
        assert!((sol.objective - (-7.361510420672226)).abs() < 1e-6, "{}", sol.objective);
        let probes = [[0.1, 0.2], [-0.5, 0.9], [0.8, -0.3]];
        let expected = [1.0307990681835297, 1.025239733092811, 0.9716560587003883];
        for (p, e) in probes.iter().zip(expected) {
            let f: f64 = (0..n)
                .map(|i| sol.alpha[i] * y[i] * rbf(x.row(i), ndarray::aview1(p), 0.8))
                .sum::<f64>()
                - sol.rho;
            assert!((f - e).abs() < 1e-5, "{f} vs {e}");
        }
    }

    fn kkt_violation(k: &Array2<f64>, y: &[f64], c: &[f64], sol: &SmoSolution) -> f64 {
        let n = y.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            assert!(sol.alpha[i] >= 0.0 && sol.alpha[i] <= c[i] + 1e-12);
            let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * k[[i, j]]).sum::<f64>() - sol.rho;
            let margin = y[i] * f;
            let v = if sol.alpha[i] <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if sol.alpha[i] >= c[i] {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn kkt_conditions_hold() {
        for (n, seed) in [(16, 1), (32, 2), (64, 3)] {
            let (x, y) = instance(n, seed);
            let k = gram(&x, 0.7);
            let c = vec![1.0; n];
            let sol = solve_binary(&DenseKernel(k.clone()), &y, &c, 1e-4, 1_000_000, 1 << 20);
            assert!(sol.converged);
            assert!((0..n).map(|i| y[i] * sol.alpha[i]).sum::<f64>().abs() < 1e-9);
            let v = kkt_violation(&k, &y, &c, &sol);
            assert!(v <= 1e-3, "n={n}: violation {v}");
        }
    }

    #[test]
    fn row_cache_agrees_with_dense() {
        let (x, y) = instance(40, 7);
        let c = vec![1.0; 40];
        let rbf = RbfKernel::new(x.view(), 0.3);
        let mut k = Array2::zeros((40, 40));
        for i in 0..40 {
            rbf.row(i, k.row_mut(i).as_slice_mut().unwrap());
        }
        assert!((&k - &gram(&x, 0.3)).iter().all(|v| v.abs() < 1e-12));
        let dense = solve_binary(&DenseKernel(k), &y, &c, 1e-5, 1_000_000, 1 << 20);
        // a budget of two rows forces constant eviction
        let lazy = solve_binary(&rbf, &y, &c, 1e-5, 1_000_000, 2 * 8 * 40);
        assert_eq!(dense, lazy);
    }

    #[test]
    fn subsample_is_stratified() {
        let y: Vec<usize> = (0..1000).map(|i| if i % 10 == 0 { 1 } else { 0 }).collect();
        let keep = stratified_subsample(&y, 2, 100, 3);
        assert_eq!(keep.len(), 100);
        assert_eq!(keep.iter().filter(|&&i| y[i] == 1).count(), 10);
        assert_eq!(keep, stratified_subsample(&y, 2, 100, 3));
        assert_eq!(stratified_subsample(&y, 2, 5000, 3).len(), 1000);
    }

    #[test]
    fn cap_is_reported() {
        let (x, y) = blobs(&[vec![0.0, 0.0], vec![3.0, 3.0]], 100, 1.0, 1);
        let spec = ModelSpec::new(ModelKind::SvmRbf, 0)
            .with_hyperparams(crate::models::Hyperparams::Svm(SvmParams {
                max_train_samples: 50,
                ..Default::default()
            }))
            .unwrap();
        let m = fit_model(&spec, x.view(), &y).unwrap();
        assert_eq!(m.info.n_used, Some(50));
        assert!(m.info.notes.iter().any(|n| n.contains("50 of 200")));
    }

    #[test]
    fn one_vs_rest_multiclass() {
        let (x, y) = blobs(&[vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0], vec![4.0, 4.0]], 30, 0.6, 2);
        let m = fit_model(&ModelSpec::new(ModelKind::SvmRbf, 0), x.view(), &y).unwrap();
        let s = m.predict_scores(x.view()).unwrap();
        assert_eq!(s.ncols(), 4);
        assert!(accuracy(&m.predict(x.view()).unwrap(), &y) > 0.97);
    }
}
