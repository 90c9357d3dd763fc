use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::features::FeatureSample;
use crate::labeling::kmeans::{kmeans, KMeansParams};
use crate::labeling::pca::{fit_pca, standardize_columns};
use crate::labeling::{Label, LabelAssignment, LabelEntry, LabelMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaKmeansParams {
    pub n_clusters: usize,
    pub n_components: usize,
    pub seed: u64,
    /// Clusters whose mean normalized time is at least this are `failure`.
    pub enrichment_threshold: f64,
    /// Always mark the cluster holding the last sample as `failure`.
    pub force_final_cluster: bool,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PcaKmeansParams {
    fn default() -> Self {
        PcaKmeansParams {
            n_clusters: 4,
            n_components: 2,
            seed: 0,
            enrichment_threshold: 0.75,
            force_final_cluster: true,
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// Outcome of the clustering step, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub assignments: Vec<usize>,
    pub mean_time: Vec<f64>,
    pub failure_clusters: Vec<usize>,
}

/// Cluster one bearing's spectral samples and label the late-enriched
/// clusters `failure`.
///
/// Samples must belong to one bearing and be sorted by
/// `(seq_index, window_index)`. Normalized time of the i-th of n samples is
/// `i / (n - 1)`.
pub fn pca_kmeans_label(samples: &[FeatureSample], params: &PcaKmeansParams) -> Result<LabelAssignment> {
    let (assignment, _) = pca_kmeans_detail(samples, params)?;
    Ok(assignment)
}

pub fn pca_kmeans_detail(
    samples: &[FeatureSample],
    params: &PcaKmeansParams,
) -> Result<(LabelAssignment, ClusterSummary)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("PCA labeling needs samples".into()))?;
    if params.n_clusters == 0 || params.n_components == 0 {
        return Err(Error::Config("n_clusters and n_components must be positive".into()));
    }
    if samples.len() < params.n_clusters {
        return Err(Error::InvalidInput(format!(
            "bearing {}: {} samples for {} clusters",
            first.bearing_id,
            samples.len(),
            params.n_clusters
        )));
    }
    let d = first.values.len();
    for w in samples.windows(2) {
        if w[1].bearing_id != first.bearing_id {
            return Err(Error::InvalidInput("PCA labeling takes a single bearing".into()));
        }
        if (w[1].waveform_seq_index, w[1].window_index) <= (w[0].waveform_seq_index, w[0].window_index) {
            return Err(Error::InvalidInput(format!(
                "bearing {}: samples not ordered at seq {} window {}",
                first.bearing_id, w[1].waveform_seq_index, w[1].window_index
            )));
        }
        if w[1].values.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w[1].values.len(),
            });
        }
    }

    let n = samples.len();
    let raw = Array2::from_shape_fn((n, d), |(i, j)| samples[i].values[j]);
    let (z, dropped) = standardize_columns(raw.view());
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(format!(
            "bearing {}: dropped {} zero-variance feature columns",
            first.bearing_id,
            dropped.len()
        ));
        log::warn!("{}", warnings[0]);
    }

    let projected = if z.ncols() == 0 {
        Array2::zeros((n, 1))
    } else {
        fit_pca(z.view(), params.n_components, params.seed).transform(z.view())
    };
    let fit = kmeans(
        projected.view(),
        &KMeansParams {
            k: params.n_clusters,
            restarts: params.restarts,
            max_iter: params.max_iter,
            tol: params.tol,
            seed: params.seed,
        },
    )?;

    let denom = (n - 1).max(1) as f64;
    let mut time_sum = vec![0.0; params.n_clusters];
    let mut counts = vec![0usize; params.n_clusters];
    for (i, &c) in fit.assignments.iter().enumerate() {
        time_sum[c] += i as f64 / denom;
        counts[c] += 1;
    }
    let mean_time: Vec<f64> = time_sum
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    let last_cluster = fit.assignments[n - 1];
    let failure: Vec<bool> = (0..params.n_clusters)
        .map(|c| {
            counts[c] > 0
                && (mean_time[c] >= params.enrichment_threshold
                    || (params.force_final_cluster && c == last_cluster))
        })
        .collect();

    let entries: Vec<LabelEntry> = samples
        .iter()
        .zip(&fit.assignments)
        .map(|(s, &c)| LabelEntry {
            seq_index: s.waveform_seq_index,
            window_index: Some(s.window_index),
            label: if failure[c] { Label::Failure } else { Label::Normal },
        })
        .collect();
    let onset = entries
        .iter()
        .find(|e| e.label == Label::Failure)
        .map(|e| e.seq_index);
    let failure_clusters: Vec<usize> = (0..params.n_clusters).filter(|&c| failure[c]).collect();

    let assignment = LabelAssignment {
        bearing_id: first.bearing_id.clone(),
        method: LabelMethod::PcaKmeans,
        params: json!({
            "n_clusters": params.n_clusters,
            "n_components": params.n_components,
            "seed": params.seed,
            "enrichment_threshold": params.enrichment_threshold,
            "force_final_cluster": params.force_final_cluster,
            "cluster_mean_time": mean_time,
            "failure_clusters": failure_clusters,
        }),
        onset_seq_index: onset,
        entries,
        warnings,
    };
    Ok((
        assignment,
        ClusterSummary {
            assignments: fit.assignments,
            mean_time,
            failure_clusters,
        },
    ))
}
