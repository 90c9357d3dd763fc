//! Lloyd's k-means with k-means++ seeding and seeded restarts.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when inertia improves by less than this fraction.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub restart: usize,
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: ndarray::ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.outer_iter().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(x: ArrayView2<f64>, k: usize, rng: &mut Stream) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    let first = rng.below(n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = x.outer_iter().map(|r| sq_dist(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 { rng.weighted_index(&d2) } else { rng.below(n) };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, r) in x.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, x.row(pick)));
        }
    }
    centroids
}

fn lloyd(x: ArrayView2<f64>, params: &KMeansParams, restart: usize) -> KMeansFit {
    let (n, d) = x.dim();
    let k = params.k;
    let mut rng = Stream::new(derive_seed(params.seed, restart as u64), 0);
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..params.max_iter {
        iterations = it + 1;
        let mut dists = vec![0.0; n];
        let mut inertia = 0.0;
        for (i, row) in x.outer_iter().enumerate() {
            let (c, dist) = nearest(row, &centroids);
            assignments[i] = c;
            dists[i] = dist;
            inertia += dist;
        }

        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, row) in x.outer_iter().enumerate() {
            sums.row_mut(assignments[i]).scaled_add(1.0, &row);
            counts[assignments[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // re-seed an empty cluster at the point farthest from its centroid
                let far = (0..n).max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a))).unwrap_or(0);
                centroids.row_mut(c).assign(&x.row(far));
                dists[far] = 0.0;
            }
        }

        if prev.is_finite() && prev - inertia <= params.tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
        prev = inertia;
    }
    // final assignment against the last centroids
    let mut inertia = 0.0;
    for (i, row) in x.outer_iter().enumerate() {
        let (c, dist) = nearest(row, &centroids);
        assignments[i] = c;
        inertia += dist;
    }
    KMeansFit {
        centroids,
        assignments,
        inertia,
        iterations,
        restart,
    }
}

/// Best of `restarts` Lloyd runs by inertia; ties go to the lower restart.
pub fn kmeans(x: ArrayView2<f64>, params: &KMeansParams) -> Result<KMeansFit> {
    if params.k == 0 || x.nrows() < params.k {
        return Err(Error::InvalidInput(format!(
            "k-means with k={} needs at least as many samples, got {}",
            params.k,
            x.nrows()
        )));
    }
    let fits: Vec<KMeansFit> = (0..params.restarts.max(1))
        .into_par_iter()
        .map(|r| lloyd(x, params, r))
        .collect();
    Ok(fits
        .into_iter()
        .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
        .expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(centers: &[(f64, f64)], per: usize, spread: f64, seed: u64) -> Array2<f64> {
        let mut s = Stream::new(seed, 0);
        let mut x = Array2::zeros((centers.len() * per, 2));
        for (c, &(cx, cy)) in centers.iter().enumerate() {
            for i in 0..per {
                x[[c * per + i, 0]] = cx + spread * s.normal();
                x[[c * per + i, 1]] = cy + spread * s.normal();
            }
        }
        x
    }

    #[test]
    fn recovers_separated_blobs() {
        let x = blobs(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 30, 0.5, 1);
        let fit = kmeans(x.view(), &KMeansParams::new(3, 7)).unwrap();
        for c in 0..3 {
            let block = &fit.assignments[c * 30..(c + 1) * 30];
            assert!(block.iter().all(|&a| a == block[0]));
        }
        let mut firsts = vec![fit.assignments[0], fit.assignments[30], fit.assignments[60]];
        firsts.sort();
        firsts.dedup();
        assert_eq!(firsts.len(), 3);
    }

    #[test]
    fn inertia_matches_assignment() {
        let x = blobs(&[(0.0, 0.0), (3.0, 1.0)], 40, 1.0, 2);
        let fit = kmeans(x.view(), &KMeansParams::new(2, 1)).unwrap();
        let direct: f64 = x
            .outer_iter()
            .zip(&fit.assignments)
            .map(|(r, &a)| sq_dist(r, fit.centroids.row(a)))
            .sum();
        assert!((direct - fit.inertia).abs() < 1e-9 * direct);
    }

    #[test]
    fn deterministic_under_parallel_restarts() {
        let x = blobs(&[(0.0, 0.0), (2.0, 2.0), (4.0, 0.0), (1.0, 5.0)], 25, 1.2, 3);
        let a = kmeans(x.view(), &KMeansParams::new(4, 11)).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| kmeans(x.view(), &KMeansParams::new(4, 11)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_do_not_panic() {
        let x = Array2::from_elem((6, 2), 1.0);
        let fit = kmeans(x.view(), &KMeansParams::new(3, 0)).unwrap();
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn too_few_samples() {
        let x = Array2::zeros((2, 2));
        assert!(kmeans(x.view(), &KMeansParams::new(3, 0)).is_err());
    }
}
