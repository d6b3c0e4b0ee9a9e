//! Information-gain feature ranking.

use serde::{Deserialize, Serialize};

use super::tree::{best_threshold, entropy};
use super::{class_counts, Labeled, LearnError};
use crate::features::{FeatureDataset, FeatureId};
use crate::ingest::Activity;

/// Features with their gains, highest first; equal gains keep dataset column
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<(FeatureId, f64)>,
}

impl FeatureRanking {
    pub fn top(&self, n: usize) -> Vec<FeatureId> {
        self.entries.iter().take(n).map(|(f, _)| *f).collect()
    }
}

/// Base-2 entropy of the label distribution.
pub fn label_entropy(labels: &[Activity]) -> f64 {
    entropy(&class_counts(labels.iter().copied()), labels.len())
}

/// Best binary-split gain of one column: label entropy minus the smallest
/// weighted child entropy over midpoint thresholds. 0 for a constant column.
pub fn split_info_gain(values: &[f64], labels: &[Activity]) -> f64 {
    let total = class_counts(labels.iter().copied());
    let h = entropy(&total, labels.len());
    let mut pairs: Vec<(f64, Activity)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    match best_threshold(&pairs, &total, 1) {
        Some((_, child)) => (h - child).clamp(0.0, h),
        None => 0.0,
    }
}

pub fn rank_features_info_gain(data: &FeatureDataset) -> Result<FeatureRanking, LearnError> {
    let set = Labeled::from(data)?;
    let mut entries: Vec<(usize, FeatureId, f64)> = data
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let col: Vec<f64> = set.rows.iter().map(|r| r[j]).collect();
            (j, f, split_info_gain(&col, set.labels))
        })
        .collect();
    entries.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    Ok(FeatureRanking { entries: entries.into_iter().map(|(_, f, g)| (f, g)).collect() })
}
