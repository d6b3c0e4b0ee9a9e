//! Random forest and bagging: plurality votes over trees grown on bootstrap
//! samples. The forest also draws a random feature subset at every node;
//! bagging lets each tree see every feature.
//!
//! Tree `i` uses stream `i` of a ChaCha generator keyed by the seed, so the
//! trees can be grown in parallel and still match a sequential build.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTree, TreeParams};
use super::{plurality, timed, Labeled, LearnError, ModelParams, Prediction, TrainedModel};
use crate::features::FeatureDataset;
use crate::ingest::Activity;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per node; `None` means ⌈√d⌉.
    pub m_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, m_features: None, bootstrap: true, seed: 0, tree: TreeParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaggingParams {
    pub n_bags: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub tree: TreeParams,
}

impl Default for BaggingParams {
    fn default() -> Self {
        BaggingParams { n_bags: 10, bootstrap: true, seed: 0, tree: TreeParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    trees: Vec<DecisionTree>,
}

impl Ensemble {
    pub fn new(trees: Vec<DecisionTree>) -> Self {
        Ensemble { trees }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Plurality of the trees' votes; ties go to the smallest code. Scores
    /// are vote shares.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut votes = [0usize; Activity::COUNT];
        for t in &self.trees {
            votes[t.predict_class(x).index()] += 1;
        }
        plurality(&votes)
    }
}

fn grow_ensemble(
    set: &Labeled<'_>,
    n_trees: usize,
    m_features: usize,
    bootstrap: bool,
    seed: u64,
    tree: &TreeParams,
) -> Ensemble {
    let n = set.rows.len();
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut idx: Vec<usize> =
                if bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            grow(set, &mut idx, tree, m_features, &mut rng)
        })
        .collect();
    Ensemble { trees }
}

pub fn train_forest(data: &FeatureDataset, params: &ForestParams) -> Result<TrainedModel, LearnError> {
    params.tree.validate()?;
    if params.n_trees == 0 {
        return Err(LearnError::InvalidParam("n_trees must be at least 1".into()));
    }
    let set = Labeled::from(data)?;
    let d = set.n_features;
    let m = match params.m_features {
        Some(0) => return Err(LearnError::InvalidParam("m_features must be at least 1".into())),
        Some(m) => m.min(d),
        None => (d as f64).sqrt().ceil() as usize,
    };
    let (ens, secs) = timed(|| grow_ensemble(&set, params.n_trees, m, params.bootstrap, params.seed, &params.tree));
    Ok(TrainedModel {
        feature_names: data.feature_names().to_vec(),
        build_time_s: secs,
        n_train: data.len(),
        params: ModelParams::Forest(ens),
    })
}

pub fn train_bagging(data: &FeatureDataset, params: &BaggingParams) -> Result<TrainedModel, LearnError> {
    params.tree.validate()?;
    if params.n_bags == 0 {
        return Err(LearnError::InvalidParam("n_bags must be at least 1".into()));
    }
    let set = Labeled::from(data)?;
    let d = set.n_features;
    let (ens, secs) = timed(|| grow_ensemble(&set, params.n_bags, d, params.bootstrap, params.seed, &params.tree));
    Ok(TrainedModel {
        feature_names: data.feature_names().to_vec(),
        build_time_s: secs,
        n_train: data.len(),
        params: ModelParams::Bagging(ens),
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_data::*;
    use super::super::train_tree;
    use super::*;
    use Activity::*;

    fn ensemble(m: &TrainedModel) -> &Ensemble {
        match &m.params {
            ModelParams::Forest(e) | ModelParams::Bagging(e) => e,
            _ => unreachable!(),
        }
    }

    #[test]
    fn degenerate_forest_is_a_tree() {
        let data = blobs(&[Idle, FastWalking, Running, Jumping], 40, 6, 0.8, 31);
        let tree = train_tree(&data, &TreeParams::default()).unwrap();
        let ModelParams::Tree(t) = &tree.params else { unreachable!() };
        let forest = train_forest(
            &data,
            &ForestParams { n_trees: 1, m_features: Some(6), bootstrap: false, seed: 99, ..Default::default() },
        )
        .unwrap();
        assert_eq!(ensemble(&forest).trees()[0], *t);
        let bag = train_bagging(&data, &BaggingParams { n_bags: 1, bootstrap: false, seed: 5, ..Default::default() })
            .unwrap();
        assert_eq!(ensemble(&bag).trees()[0], *t);
        for q in random_queries(6, 100, 1) {
            let want = tree.predict_row(&q).unwrap().activity;
            assert_eq!(forest.predict_row(&q).unwrap().activity, want);
            assert_eq!(bag.predict_row(&q).unwrap().activity, want);
        }
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let data = blobs(&[Idle, Jogging, Jumping], 30, 5, 0.7, 3);
        let p = ForestParams { n_trees: 20, seed: 17, ..Default::default() };
        assert_eq!(train_forest(&data, &p).unwrap().params, train_forest(&data, &p).unwrap().params);
        let other = ForestParams { seed: 18, ..p.clone() };
        assert_ne!(train_forest(&data, &p).unwrap().params, train_forest(&data, &other).unwrap().params);
        let b = BaggingParams { seed: 4, ..Default::default() };
        assert_eq!(train_bagging(&data, &b).unwrap().params, train_bagging(&data, &b).unwrap().params);
    }

    #[test]
    fn parallel_build_matches_sequential() {
        let data = blobs(&[Idle, Jogging, Jumping], 30, 5, 0.7, 3);
        let p = ForestParams { n_trees: 12, seed: 8, ..Default::default() };
        let par = train_forest(&data, &p).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let seq = pool.install(|| train_forest(&data, &p).unwrap());
        assert_eq!(par.params, seq.params);
    }

    #[test]
    fn unanimous_vote_matches_base_model() {
        let data = blobs(&[Idle, Running], 20, 2, 1.0, 0);
        let m = train_tree(&data, &TreeParams::default()).unwrap();
        let ModelParams::Tree(t) = m.params.clone() else { unreachable!() };
        let ens = Ensemble::new(vec![t.clone(), t.clone(), t.clone()]);
        for q in random_queries(2, 100, 2) {
            assert_eq!(ens.predict(&q).activity, t.predict_class(&q));
        }
    }

    #[test]
    fn tie_votes_go_to_smallest_code() {
        let leaf = |class: Activity| DecisionTree {
            nodes: vec![super::super::tree::Node::Leaf {
                class,
                counts: {
                    let mut c = [0; 7];
                    c[class.index()] = 1;
                    c
                },
            }],
        };
        let ens = Ensemble::new(vec![leaf(Jumping), leaf(SlowWalking), leaf(Jumping), leaf(SlowWalking)]);
        let p = ens.predict(&[0.0]);
        assert_eq!(p.activity, SlowWalking);
        assert_eq!(p.scores[SlowWalking.index()], 0.5);
    }

    #[test]
    fn forest_uses_sqrt_features_by_default() {
        let data = blobs(&[Idle, Running], 20, 9, 1.0, 0);
        let m = train_forest(&data, &ForestParams { n_trees: 3, ..Default::default() }).unwrap();
        assert_eq!(ensemble(&m).trees().len(), 3);
        assert!(train_forest(&data, &ForestParams { n_trees: 0, ..Default::default() }).is_err());
        assert!(train_forest(&data, &ForestParams { m_features: Some(0), ..Default::default() }).is_err());
    }
}
