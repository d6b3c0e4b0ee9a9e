//! Binary information-gain decision tree.
//!
//! Each node tries every candidate feature and every midpoint between
//! consecutive distinct values, keeping the split `x <= t` / `x > t` with the
//! largest entropy reduction. No pruning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{class_counts, plurality, timed, Labeled, LearnError, ModelParams, Prediction, TrainedModel};
use crate::features::FeatureDataset;
use crate::ingest::Activity;

type Counts = [usize; Activity::COUNT];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules fire.
    pub max_depth: Option<usize>,
    /// Smallest number of rows allowed in a child.
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: Some(20), min_leaf: 2 }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.min_leaf == 0 {
            return Err(LearnError::InvalidParam("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: Activity, counts: Counts },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    fn leaf(&self, x: &[f64]) -> &Counts {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts, .. } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_class(&self, x: &[f64]) -> Activity {
        plurality(self.leaf(x)).activity
    }

    /// Leaf majority, with the leaf's class frequencies as scores.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        plurality(self.leaf(x))
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub(crate) fn max_feature_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .max()
    }
}

pub fn train_tree(data: &FeatureDataset, params: &TreeParams) -> Result<TrainedModel, LearnError> {
    params.validate()?;
    let set = Labeled::from(data)?;
    let (tree, secs) = timed(|| {
        let mut idx: Vec<usize> = (0..set.rows.len()).collect();
        grow(&set, &mut idx, params, set.n_features, &mut NoSampling)
    });
    Ok(TrainedModel {
        feature_names: data.feature_names().to_vec(),
        build_time_s: secs,
        n_train: data.len(),
        params: ModelParams::Tree(tree),
    })
}

/// Chooses the candidate features examined at each node.
pub(crate) trait FeatureSampler {
    fn candidates(&mut self, d: usize, m: usize, out: &mut Vec<usize>);
}

pub(crate) struct NoSampling;

impl FeatureSampler for NoSampling {
    fn candidates(&mut self, d: usize, _m: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend(0..d);
    }
}

impl<R: Rng> FeatureSampler for R {
    fn candidates(&mut self, d: usize, m: usize, out: &mut Vec<usize>) {
        out.clear();
        if m >= d {
            out.extend(0..d);
        } else {
            out.extend(rand::seq::index::sample(self, d, m).iter());
            // Ascending order keeps gain ties resolved by feature index.
            out.sort_unstable();
        }
    }
}

/// Grows a tree over the rows listed in `idx` (repeats allowed).
pub(crate) fn grow(
    set: &Labeled<'_>,
    idx: &mut [usize],
    params: &TreeParams,
    m_features: usize,
    sampler: &mut impl FeatureSampler,
) -> DecisionTree {
    let mut b = Builder { set, params, m_features, nodes: Vec::new(), pairs: Vec::new(), cands: Vec::new() };
    b.build(idx, 0, sampler);
    DecisionTree { nodes: b.nodes }
}

struct Builder<'a, 'b> {
    set: &'b Labeled<'a>,
    params: &'b TreeParams,
    m_features: usize,
    nodes: Vec<Node>,
    pairs: Vec<(f64, Activity)>,
    cands: Vec<usize>,
}

impl Builder<'_, '_> {
    fn build(&mut self, idx: &mut [usize], depth: usize, sampler: &mut impl FeatureSampler) -> usize {
        let counts = class_counts(idx.iter().map(|&i| self.set.labels[i]));
        let me = self.nodes.len();
        let class = plurality(&counts).activity;
        self.nodes.push(Node::Leaf { class, counts });

        let n = idx.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || n < 2 * self.params.min_leaf {
            return me;
        }

        let parent_h = entropy(&counts, n);
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut cands = std::mem::take(&mut self.cands);
        sampler.candidates(self.set.n_features, self.m_features, &mut cands);
        for &f in &cands {
            self.pairs.clear();
            self.pairs.extend(idx.iter().map(|&i| (self.set.rows[i][f], self.set.labels[i])));
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((t, child_h)) = best_threshold(&self.pairs, &counts, self.params.min_leaf) {
                let gain = parent_h - child_h;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, t));
                }
            }
        }
        self.cands = cands;

        let Some((gain, feature, threshold)) = best else { return me };
        if gain <= 0.0 {
            return me;
        }
        let rows = self.set.rows;
        let split = partition(idx, |&i| rows[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1, sampler);
        let right = self.build(r, depth + 1, sampler);
        self.nodes[me] = Node::Split { feature, threshold, left, right };
        me
    }
}

/// Moves elements satisfying `pred` to the front; returns how many did.
fn partition<T>(xs: &mut [T], mut pred: impl FnMut(&T) -> bool) -> usize {
    let mut k = 0;
    for i in 0..xs.len() {
        if pred(&xs[i]) {
            xs.swap(i, k);
            k += 1;
        }
    }
    k
}

/// Base-2 entropy of a class histogram.
pub(crate) fn entropy(counts: &Counts, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Sweeps `pairs` (sorted by value) and returns the midpoint threshold with
/// the lowest weighted child entropy, among splits leaving at least
/// `min_leaf` rows on each side. The first (lowest) threshold wins ties.
pub(crate) fn best_threshold(pairs: &[(f64, Activity)], total: &Counts, min_leaf: usize) -> Option<(f64, f64)> {
    let n = pairs.len();
    let mut left = [0usize; Activity::COUNT];
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n.saturating_sub(1) {
        left[pairs[i].1.index()] += 1;
        let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
        if lo == hi {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf {
            continue;
        }
        let mut right = *total;
        for (r, l) in right.iter_mut().zip(&left) {
            *r -= l;
        }
        let h = (nl as f64 * entropy(&left, nl) + nr as f64 * entropy(&right, nr)) / n as f64;
        if best.is_none_or(|(_, bh)| h < bh) {
            let mut t = lo + (hi - lo) / 2.0;
            if t >= hi {
                t = lo;
            }
            best = Some((t, h));
        }
    }
    best
}
