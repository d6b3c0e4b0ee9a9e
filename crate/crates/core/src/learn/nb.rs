//! Gaussian Naive Bayes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{timed, Labeled, LearnError, ModelParams, Prediction, TrainedModel};
use crate::features::FeatureDataset;
use crate::ingest::Activity;

/// Variance floor factor, applied as `VAR_EPS * max(1, global variance)`.
pub const VAR_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussians {
    pub class: Activity,
    pub log_prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Per-class priors and per-feature normal distributions. Classes absent
/// from the training data are never predicted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub classes: Vec<ClassGaussians>,
}

impl GaussianNb {
    pub fn n_features(&self) -> usize {
        self.classes.first().map_or(0, |c| c.means.len())
    }

    /// Unnormalized log joint `log P(c) + Σ log N(x_f; μ, σ²)` per trained
    /// class.
    pub fn log_joint(&self, x: &[f64]) -> Vec<(Activity, f64)> {
        self.classes
            .iter()
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(c.means.iter().zip(&c.variances))
                    .map(|(&v, (&mu, &var))| -0.5 * ((2.0 * PI * var).ln() + (v - mu).powi(2) / var))
                    .sum();
                (c.class, c.log_prior + ll)
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let joint = self.log_joint(x);
        // Classes are stored in code order, so strict > keeps the smallest
        // code on ties.
        let mut best = 0;
        for (i, (_, s)) in joint.iter().enumerate() {
            if *s > joint[best].1 {
                best = i;
            }
        }
        let max = joint[best].1;
        let mut scores = [0.0; Activity::COUNT];
        let mut total = 0.0;
        for (c, s) in &joint {
            let p = (s - max).exp();
            scores[c.index()] = p;
            total += p;
        }
        for s in &mut scores {
            *s /= total;
        }
        Prediction { activity: joint[best].0, scores }
    }
}

pub fn train_nb(data: &FeatureDataset) -> Result<TrainedModel, LearnError> {
    let set = Labeled::from(data)?;
    let (model, secs) = timed(|| fit(&set));
    Ok(TrainedModel {
        feature_names: data.feature_names().to_vec(),
        build_time_s: secs,
        n_train: data.len(),
        params: ModelParams::NaiveBayes(model),
    })
}

fn mean_var<'a>(rows: impl Iterator<Item = &'a Vec<f64>> + Clone, d: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let n = rows.clone().count();
    let mut mean = vec![0.0; d];
    for r in rows.clone() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    var.iter_mut().for_each(|s| *s /= n as f64);
    (mean, var, n)
}

fn fit(set: &Labeled<'_>) -> GaussianNb {
    let d = set.n_features;
    let (_, global_var, n_total) = mean_var(set.rows.iter(), d);
    let floor: Vec<f64> = global_var.iter().map(|v| VAR_EPS * v.max(1.0)).collect();
    let classes = Activity::ALL
        .iter()
        .filter_map(|&class| {
            let rows = set.rows.iter().zip(set.labels).filter(move |(_, l)| **l == class).map(|(r, _)| r);
            rows.clone().next()?;
            let (means, mut variances, n) = mean_var(rows, d);
            for (v, f) in variances.iter_mut().zip(&floor) {
                *v = v.max(*f);
            }
            Some(ClassGaussians { class, log_prior: (n as f64 / n_total as f64).ln(), means, variances })
        })
        .collect();
    GaussianNb { classes }
}

#[cfg(test)]
mod tests {
    use super::super::test_data::*;
    use super::*;
    use Activity::*;

    fn nb(model: &TrainedModel) -> &GaussianNb {
        match &model.params {
            ModelParams::NaiveBayes(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn one_feature_two_classes() {
        let data = dataset(
            &["meanaccx"],
            vec![vec![1.0], vec![2.0], vec![3.0], vec![10.0], vec![11.0], vec![12.0]],
            vec![Idle, Idle, Idle, Running, Running, Running],
        );
        let model = train_nb(&data).unwrap();
        // Both classes have variance 2/3 and prior 1/2; 2.5 is 0.5 from A's
        // mean and 8.5 from B's.
        let var: f64 = 2.0 / 3.0;
        let ll = |mu: f64| -0.5 * ((2.0 * PI * var).ln() + (2.5 - mu).powi(2) / var) + 0.5f64.ln();
        let joint = nb(&model).log_joint(&[2.5]);
        assert!((joint[0].1 - ll(2.0)).abs() < 1e-12);
        assert!((joint[1].1 - ll(11.0)).abs() < 1e-12);
        assert_eq!(model.predict_row(&[2.5]).unwrap().activity, Idle);
        assert_eq!(model.predict_row(&[11.0]).unwrap().activity, Running);
    }

    #[test]
    fn query_at_class_mean_wins_under_symmetry() {
        let data = dataset(
            &["meanaccx", "meanaccy"],
            vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![10.0, 10.0], vec![12.0, 12.0]],
            vec![Jogging, Jogging, Jumping, Jumping],
        );
        let model = train_nb(&data).unwrap();
        assert_eq!(model.predict_row(&[1.0, 1.0]).unwrap().activity, Jogging);
        assert_eq!(model.predict_row(&[11.0, 11.0]).unwrap().activity, Jumping);
        // Exactly between the two: equal scores, smallest code wins.
        assert_eq!(model.predict_row(&[6.0, 6.0]).unwrap().activity, Jogging);
    }

    #[test]
    fn posteriors_sum_to_one() {
        let data = blobs(&[Idle, NormalWalking, Running, Jumping], 30, 4, 2.0, 7);
        let model = train_nb(&data).unwrap();
        for q in random_queries(4, 200, 8) {
            let p = model.predict_row(&q).unwrap();
            let s: f64 = p.scores.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert_eq!(p.scores[SlowWalking.index()], 0.0);
        }
    }

    #[test]
    fn constant_feature_is_floored() {
        let data = dataset(
            &["meanaccx", "meanaccy"],
            vec![vec![1.0, 5.0], vec![1.0, 6.0], vec![1.0, 20.0], vec![1.0, 21.0]],
            vec![Idle, Idle, Jumping, Jumping],
        );
        let model = train_nb(&data).unwrap();
        let m = nb(&model);
        assert!(m.classes.iter().all(|c| c.variances[0] == VAR_EPS));
        let p = model.predict_row(&[1.0, 20.5]).unwrap();
        assert_eq!(p.activity, Jumping);
        assert!(p.scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn argmax_ignores_a_common_shift() {
        // Shifting every log prior by the same constant (priors scaled by a
        // common factor) must not change any prediction.
        let data = blobs(&[Idle, FastWalking, Running], 25, 3, 1.5, 12);
        let model = train_nb(&data).unwrap();
        let mut shifted = nb(&model).clone();
        for c in &mut shifted.classes {
            c.log_prior += 123.456;
        }
        for q in random_queries(3, 300, 13) {
            let a = nb(&model).predict(&q);
            let b = shifted.predict(&q);
            assert_eq!(a.activity, b.activity);
        }
    }
}
