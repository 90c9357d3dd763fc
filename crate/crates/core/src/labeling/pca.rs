//! Principal components by block subspace iteration.
//!
//! The covariance is never formed: each iteration multiplies a block of
//! `k + 8` orthonormal directions by `X^T X`, re-orthonormalizes, and
//! extracts Ritz vectors from the small projected matrix with Jacobi
//! rotations. Components are unit vectors ordered by decreasing variance,
//! each signed so its largest-magnitude entry is positive.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::rng::Stream;

const OVERSAMPLE: usize = 8;
const MAX_ITERS: usize = 300;
const TOL: f64 = 1e-10;

/// Column-wise z-scores. Columns whose standard deviation is below 1e-12
/// are dropped; their indices are returned.
pub fn standardize_columns(x: ArrayView2<f64>) -> (Array2<f64>, Vec<usize>) {
    let n = x.nrows() as f64;
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    let mut stats = Vec::new();
    for (j, col) in x.axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std < 1e-12 {
            dropped.push(j);
        } else {
            keep.push(j);
            stats.push((mean, std));
        }
    }
    let mut out = Array2::zeros((x.nrows(), keep.len()));
    for (c, (&j, &(mean, std))) in keep.iter().zip(&stats).enumerate() {
        for i in 0..x.nrows() {
            out[[i, c]] = (x[[i, j]] - mean) / std;
        }
    }
    (out, dropped)
}

#[derive(Debug, Clone)]
pub struct Pca {
    /// `d x k`, one component per column.
    pub components: Array2<f64>,
    /// Variance along each component.
    pub explained_variance: Vec<f64>,
    pub mean: Array1<f64>,
}

impl Pca {
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let centered = &x - &self.mean.view().insert_axis(Axis(0));
        centered.dot(&self.components)
    }
}

fn orthonormalize(m: &mut Array2<f64>) {
    let cols = m.ncols();
    for j in 0..cols {
        for _ in 0..2 {
            for p in 0..j {
                let dot = m.column(j).dot(&m.column(p));
                let prev = m.column(p).to_owned();
                m.column_mut(j).scaled_add(-dot, &prev);
            }
        }
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        if norm > 0.0 {
            m.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi.
/// Returns (eigenvalues, eigenvectors as columns), sorted descending.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]].powi(2))
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (c, &i) in order.iter().enumerate() {
        vectors.column_mut(c).assign(&v.column(i));
    }
    (values, vectors)
}

/// Fit the top `k` principal components of the rows of `x`.
pub fn fit_pca(x: ArrayView2<f64>, k: usize, seed: u64) -> Pca {
    let (n, d) = x.dim();
    let k = k.min(d).min(n.max(1));
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d));
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let denom = (n.max(2) - 1) as f64;
    let block = (k + OVERSAMPLE).min(d);

    let mut rng = Stream::new(seed, 0x50_43_41);
    let mut basis = Array2::from_shape_fn((d, block), |_| rng.normal());
    orthonormalize(&mut basis);

    let mut prev_values = vec![f64::INFINITY; k];
    let mut ritz_vectors = Array2::<f64>::zeros((d, k));
    let mut values = vec![0.0; k];
    for _ in 0..MAX_ITERS {
        let projected = centered.dot(&basis);
        let small = projected.t().dot(&projected) / denom;
        let (evals, evecs) = symmetric_eigen(&small);
        ritz_vectors = basis.dot(&evecs.slice(ndarray::s![.., ..k]));
        values = evals[..k].to_vec();
        let converged = values
            .iter()
            .zip(&prev_values)
            .all(|(a, b)| (a - b).abs() <= TOL * a.abs().max(1e-300));
        if converged {
            break;
        }
        prev_values.clone_from(&values);
        basis = centered.t().dot(&projected);
        orthonormalize(&mut basis);
    }

    for mut col in ritz_vectors.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|v| v / norm);
        }
        let pivot = col.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Pca {
        components: ritz_vectors,
        explained_variance: values,
        mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut s = Stream::new(seed, 0);
        // anisotropic: column j scaled by 1/(1+j)
        Array2::from_shape_fn((n, d), |(_, j)| s.normal() * (3.0 / (1.0 + j as f64)) + 0.5)
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = ndarray::array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        for (i, &lam) in vals.iter().enumerate() {
            let v = vecs.column(i);
            let av = a.dot(&v);
            for r in 0..3 {
                assert!((av[r] - lam * v[r]).abs() < 1e-12);
            }
        }
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
    }

    #[test]
    fn matches_dense_eigendecomposition() {
        let x = random_matrix(200, 12, 3);
        let pca = fit_pca(x.view(), 3, 0);

        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).unwrap();
        let c = &x - &mean.view().insert_axis(Axis(0));
        let cov = c.t().dot(&c) / (n - 1.0);
        let dense = nalgebra::DMatrix::from_fn(12, 12, |i, j| cov[[i, j]]);
        let eig = nalgebra::SymmetricEigen::new(dense);
        let mut order: Vec<usize> = (0..12).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for (comp, &idx) in order.iter().take(3).enumerate() {
            assert!((pca.explained_variance[comp] - eig.eigenvalues[idx]).abs() < 1e-8 * eig.eigenvalues[idx]);
            let ours = pca.components.column(comp);
            let theirs = eig.eigenvectors.column(idx);
            let dot: f64 = (0..12).map(|r| ours[r] * theirs[r]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8, "component {comp}: |cos| = {}", dot.abs());
        }
    }

    #[test]
    fn standardize_drops_constant_columns() {
        let x = ndarray::array![[1.0, 5.0, 2.0], [2.0, 5.0, 4.0], [3.0, 5.0, 9.0]];
        let (z, dropped) = standardize_columns(x.view());
        assert_eq!(dropped, vec![1]);
        assert_eq!(z.ncols(), 2);
        for col in z.axis_iter(Axis(1)) {
            assert!(col.sum().abs() < 1e-12);
            assert!((col.dot(&col) / 3.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_sign_normalized() {
        let x = random_matrix(50, 30, 1);
        let a = fit_pca(x.view(), 2, 9);
        let b = fit_pca(x.view(), 2, 9);
        assert_eq!(a.components, b.components);
        for col in a.components.axis_iter(Axis(1)) {
            let pivot = col.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn wide_matrix() {
        // more features than samples, as for RFFT vectors of one bearing
        let x = random_matrix(40, 500, 2);
        let pca = fit_pca(x.view(), 2, 0);
        let scores = pca.transform(x.view());
        assert_eq!(scores.dim(), (40, 2));
        let var0 = scores.column(0).iter().map(|v| v * v).sum::<f64>() / 39.0;
        assert!((var0 - pca.explained_variance[0]).abs() < 1e-8 * var0);
    }
}
