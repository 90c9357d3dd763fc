//! Random forest of CART trees grown on bootstrap samples with Gini splits
//! and a random feature subset per node. Scores are the fraction of trees
//! voting for each class.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FitInfo, TrainData};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per node; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0
            || self.max_features == Some(0)
            || self.max_depth == Some(0)
            || self.min_samples_split < 2
            || self.min_samples_leaf == 0
        {
            return Err(Error::Config(format!("invalid random forest parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: ArrayView1<f64>) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestState {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    w: &'a [f64],
    n_classes: usize,
    max_features: usize,
    params: &'a ForestParams,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

fn majority(counts: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += self.w[i];
        }
        c
    }

    /// Best threshold on one feature: weighted child impurity, lower is better.
    fn split_on(&self, idx: &[usize], feature: usize, total: &[f64], sorted: &mut Vec<(f64, usize)>) -> Option<(f64, f64)> {
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (self.x[[i, feature]], i)));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted[0].0 == sorted[sorted.len() - 1].0 {
            return None;
        }
        let total_w: f64 = total.iter().sum();
        let mut left = vec![0.0; self.n_classes];
        let mut left_w = 0.0;
        let mut best: Option<(f64, f64)> = None;
        let n = sorted.len();
        let min_leaf = self.params.min_samples_leaf;
        for k in 0..n - 1 {
            let (v, i) = sorted[k];
            left[self.y[i]] += self.w[i];
            left_w += self.w[i];
            let next = sorted[k + 1].0;
            if next <= v || k + 1 < min_leaf || n - k - 1 < min_leaf {
                continue;
            }
            let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let right_w = total_w - left_w;
            let score = left_w * gini(&left, left_w) + right_w * gini(&right, right_w);
            if best.is_none_or(|(s, _)| score < s - 1e-12) {
                let mid = 0.5 * (v + next);
                let threshold = if mid < next { mid } else { v };
                best = Some((score, threshold));
            }
        }
        best
    }

    fn grow(&self, root: Vec<usize>, rng: &mut Stream) -> Tree {
        let d = self.x.ncols();
        let mut nodes: Vec<Node> = vec![Node::Leaf { class: 0 }];
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, root, 0)];
        let mut features: Vec<usize> = (0..d).collect();
        let mut scratch = Vec::new();
        while let Some((at, idx, depth)) = stack.pop() {
            let counts = self.counts(&idx);
            let leaf = Node::Leaf { class: majority(&counts) };
            let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
            if pure || idx.len() < self.params.min_samples_split || self.params.max_depth.is_some_and(|m| depth >= m) {
                nodes[at] = leaf;
                continue;
            }
            let mut best: Option<BestSplit> = None;
            let mut tried = 0;
            // partial Fisher-Yates: keep drawing until max_features usable
            // features were tried and one of them splits the node
            for k in 0..d {
                let j = k + rng.below(d - k);
                features.swap(k, j);
                let f = features[k];
                if let Some((score, threshold)) = self.split_on(&idx, f, &counts, &mut scratch) {
                    tried += 1;
                    if best.as_ref().is_none_or(|b| score < b.score) {
                        best = Some(BestSplit {
                            feature: f,
                            threshold,
                            score,
                        });
                    }
                }
                if tried >= self.max_features && best.is_some() {
                    break;
                }
            }
            match best {
                Some(b) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[[i, b.feature]] <= b.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf { class: 0 });
                    nodes.push(Node::Leaf { class: 0 });
                    nodes[at] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left,
                        right: left + 1,
                    };
                    stack.push((left + 1, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
                _ => nodes[at] = leaf,
            }
        }
        Tree { nodes }
    }
}

pub fn fit(params: &ForestParams, data: &TrainData, seed: u64, info: &mut FitInfo) -> ForestState {
    let n = data.y.len();
    let d = data.x.ncols();
    let w = data.sample_weights();
    let max_features = params
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
        .min(d);
    let grower = Grower {
        x: data.x,
        y: data.y,
        w: &w,
        n_classes: data.n_classes,
        max_features,
        params,
    };
    let grown: Vec<(Tree, Vec<bool>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = Stream::new(derive_seed(seed, t as u64), 0);
            let mut in_bag = vec![!params.bootstrap; n];
            let idx: Vec<usize> = if params.bootstrap {
                (0..n)
                    .map(|_| {
                        let i = rng.below(n);
                        in_bag[i] = true;
                        i
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            (grower.grow(idx, &mut rng), in_bag)
        })
        .collect();

    if params.bootstrap {
        let mut votes = vec![vec![0usize; data.n_classes]; n];
        for (tree, in_bag) in &grown {
            for i in (0..n).filter(|&i| !in_bag[i]) {
                votes[i][tree.predict(data.x.row(i))] += 1;
            }
        }
        let scored: Vec<usize> = (0..n).filter(|&i| votes[i].iter().any(|&v| v > 0)).collect();
        if !scored.is_empty() {
            let wrong = scored
                .iter()
                .filter(|&&i| {
                    let v = &votes[i];
                    let mut best = 0;
                    for c in 1..v.len() {
                        if v[c] > v[best] {
                            best = c;
                        }
                    }
                    best != data.y[i]
                })
                .count();
            info.oob_error = Some(wrong as f64 / scored.len() as f64);
        }
    }
    ForestState {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        n_classes: data.n_classes,
    }
}

impl ForestState {
    pub fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let k = self.n_classes;
        let m = self.trees.len() as f64;
        let rows: Vec<Vec<f64>> = x
            .outer_iter()
            .into_par_iter()
            .map(|row| {
                let mut v = vec![0.0; k];
                for t in &self.trees {
                    v[t.predict(row)] += 1.0;
                }
                v.iter_mut().for_each(|c| *c /= m);
                v
            })
            .collect();
        Array2::from_shape_fn((x.nrows(), k), |(i, j)| rows[i][j])
    }
}
