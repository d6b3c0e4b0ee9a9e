//! k-nearest-neighbour classifier (Euclidean, optional z-scoring).

use serde::{Deserialize, Serialize};

use super::{class_counts, plurality, timed, Labeled, LearnError, ModelParams, Prediction, TrainedModel};
use crate::features::FeatureDataset;
use crate::ingest::Activity;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub standardize: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 1, standardize: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    /// Per-feature offset and multiplier applied before measuring distance.
    /// A zero-spread feature gets multiplier 0 and never contributes.
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    /// Training rows, already transformed.
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Activity>,
}

impl Knn {
    pub fn n_features(&self) -> usize {
        self.offset.len()
    }

    fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.offset.iter().zip(&self.scale)).map(|(v, (o, s))| (v - o) * s).collect()
    }

    /// Indices of the k nearest training rows, nearest first; equal
    /// distances keep the lower row index first.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let q = self.transform(x);
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, key);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(key);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let nn = self.neighbours(x);
        plurality(&class_counts(nn.iter().map(|&i| self.labels[i])))
    }
}

pub fn train_knn(data: &FeatureDataset, params: &KnnParams) -> Result<TrainedModel, LearnError> {
    if params.k == 0 {
        return Err(LearnError::InvalidParam("k must be at least 1".into()));
    }
    let set = Labeled::from(data)?;
    if params.k > set.rows.len() {
        return Err(LearnError::KTooLarge { k: params.k, n: set.rows.len() });
    }
    let (model, secs) = timed(|| {
        let d = set.n_features;
        let n = set.rows.len() as f64;
        let (offset, scale) = if params.standardize {
            let mut mean = vec![0.0; d];
            for r in set.rows {
                mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; d];
            for r in set.rows {
                var.iter_mut().zip(r.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2));
            }
            let scale = var.iter().map(|s| (s / n).sqrt()).map(|sd| if sd > 0.0 { 1.0 / sd } else { 0.0 }).collect();
            (mean, scale)
        } else {
            (vec![0.0; d], vec![1.0; d])
        };
        let mut m = Knn { k: params.k, offset, scale, rows: Vec::new(), labels: set.labels.to_vec() };
        m.rows = set.rows.iter().map(|r| m.transform(r)).collect();
        m
    });
    Ok(TrainedModel {
        feature_names: data.feature_names().to_vec(),
        build_time_s: secs,
        n_train: data.len(),
        params: ModelParams::Knn(model),
    })
}
