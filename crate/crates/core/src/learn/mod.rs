//! Classifiers, feature ranking and the model file.
//!
//! Every classifier is trained from a labeled [`FeatureDataset`] and produces
//! a [`TrainedModel`], which remembers the feature columns it was trained on
//! so a full 42-feature vector can be projected at prediction time.
//!
//! Model files are a one-line magic header followed by JSON:
//!
//! ```text
//! HARMODEL/1
//! {"feature_names":["meanaccx",...],"build_time_s":0.01,"n_train":900,"params":{"NaiveBayes":{...}}}
//! ```

mod ensemble;
mod knn;
mod nb;
mod rank;
mod tree;

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureDataset, FeatureError, FeatureId, FeatureVector};
use crate::ingest::Activity;

pub use ensemble::{train_bagging, train_forest, BaggingParams, Ensemble, ForestParams};
pub use knn::{train_knn, Knn, KnnParams};
pub use nb::{train_nb, GaussianNb};
pub use rank::{label_entropy, rank_features_info_gain, split_info_gain, FeatureRanking};
pub use tree::{train_tree, DecisionTree, Node, TreeParams};

pub const MODEL_MAGIC: &str = "HARMODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("expected {expected} feature values, got {got}")]
    FeatureCount { expected: usize, got: usize },
    #[error("not a model file (missing {MODEL_MAGIC} header)")]
    BadMagic,
    #[error("model file version {found} is not supported (expected {MODEL_VERSION})")]
    VersionMismatch { found: String },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The predicted activity plus a per-class score (posterior probability or
/// vote share), indexed by activity code.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub activity: Activity,
    pub scores: [f64; Activity::COUNT],
}

/// Kind-specific learned parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    NaiveBayes(GaussianNb),
    Tree(DecisionTree),
    Forest(Ensemble),
    Bagging(Ensemble),
    Knn(Knn),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Nb,
    Tree,
    Forest,
    Bagging,
    Knn,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Nb => "nb",
            ClassifierKind::Tree => "tree",
            ClassifierKind::Forest => "forest",
            ClassifierKind::Bagging => "bagging",
            ClassifierKind::Knn => "knn",
        }
    }
}

/// A trained classifier. Immutable; safe to share across threads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub feature_names: Vec<FeatureId>,
    /// Wall-clock training time in seconds.
    pub build_time_s: f64,
    pub n_train: usize,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.params {
            ModelParams::NaiveBayes(_) => ClassifierKind::Nb,
            ModelParams::Tree(_) => ClassifierKind::Tree,
            ModelParams::Forest(_) => ClassifierKind::Forest,
            ModelParams::Bagging(_) => ClassifierKind::Bagging,
            ModelParams::Knn(_) => ClassifierKind::Knn,
        }
    }

    /// Predicts from a row laid out in this model's `feature_names` order.
    pub fn predict_row(&self, row: &[f64]) -> Result<Prediction, LearnError> {
        if row.len() != self.feature_names.len() {
            return Err(LearnError::FeatureCount { expected: self.feature_names.len(), got: row.len() });
        }
        Ok(match &self.params {
            ModelParams::NaiveBayes(m) => m.predict(row),
            ModelParams::Tree(m) => m.predict(row),
            ModelParams::Forest(m) | ModelParams::Bagging(m) => m.predict(row),
            ModelParams::Knn(m) => m.predict(row),
        })
    }

    /// Predicts from a full feature vector, picking out the trained columns.
    pub fn predict(&self, fv: &FeatureVector) -> Prediction {
        self.predict_row(&fv.project(&self.feature_names)).expect("projection has the model's width")
    }

    /// Predicts every row of `data`, matching columns by name.
    pub fn predict_dataset(&self, data: &FeatureDataset) -> Result<Vec<Prediction>, LearnError> {
        let projected = if data.feature_names() == self.feature_names.as_slice() {
            None
        } else {
            Some(data.select_ids(&self.feature_names)?)
        };
        let data = projected.as_ref().unwrap_or(data);
        data.rows().iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), LearnError> {
        writeln!(w, "{MODEL_MAGIC}/{MODEL_VERSION}")?;
        serde_json::to_writer(&mut w, self).map_err(|e| LearnError::Corrupt(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<TrainedModel, LearnError> {
        let mut r = BufReader::new(r);
        let mut header = Vec::new();
        r.by_ref().take(64).read_until(b'\n', &mut header)?;
        let header = String::from_utf8_lossy(&header);
        let version = header
            .trim_end()
            .strip_prefix(MODEL_MAGIC)
            .and_then(|rest| rest.strip_prefix('/'))
            .ok_or(LearnError::BadMagic)?;
        if version != MODEL_VERSION.to_string() {
            return Err(LearnError::VersionMismatch { found: version.to_string() });
        }
        let model: TrainedModel = serde_json::from_reader(r).map_err(|e| LearnError::Corrupt(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), LearnError> {
        let d = self.feature_names.len();
        let ok = match &self.params {
            ModelParams::NaiveBayes(m) => m.n_features() == d,
            ModelParams::Tree(m) => m.max_feature_index().is_none_or(|f| f < d),
            ModelParams::Forest(m) | ModelParams::Bagging(m) => {
                m.trees().iter().all(|t| t.max_feature_index().is_none_or(|f| f < d))
            }
            ModelParams::Knn(m) => m.n_features() == d,
        };
        if !ok {
            return Err(LearnError::Corrupt("parameters do not match feature list".into()));
        }
        Ok(())
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), LearnError> {
    let f = std::fs::File::create(path)?;
    model.write(std::io::BufWriter::new(f))
}

pub fn load_model(path: &Path) -> Result<TrainedModel, LearnError> {
    TrainedModel::read(std::fs::File::open(path)?)
}

/// Column projection by name; aliases accepted, unknown or repeated names
/// rejected.
pub fn select_features<S: AsRef<str>>(data: &FeatureDataset, names: &[S]) -> Result<FeatureDataset, LearnError> {
    Ok(data.select(names)?)
}

/// Classifier choice plus hyperparameters, minus the training seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Nb,
    Tree(TreeParams),
    Forest {
        n_trees: usize,
        /// `None` means ⌈√d⌉.
        m_features: Option<usize>,
        bootstrap: bool,
        tree: TreeParams,
    },
    Bagging {
        n_bags: usize,
        bootstrap: bool,
        tree: TreeParams,
    },
    Knn(KnnParams),
}

impl ClassifierSpec {
    pub fn default_for(kind: ClassifierKind) -> ClassifierSpec {
        match kind {
            ClassifierKind::Nb => ClassifierSpec::Nb,
            ClassifierKind::Tree => ClassifierSpec::Tree(TreeParams::default()),
            ClassifierKind::Forest => {
                let p = ForestParams::default();
                ClassifierSpec::Forest {
                    n_trees: p.n_trees,
                    m_features: p.m_features,
                    bootstrap: p.bootstrap,
                    tree: p.tree,
                }
            }
            ClassifierKind::Bagging => {
                let p = BaggingParams::default();
                ClassifierSpec::Bagging { n_bags: p.n_bags, bootstrap: p.bootstrap, tree: p.tree }
            }
            ClassifierKind::Knn => ClassifierSpec::Knn(KnnParams::default()),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Nb => ClassifierKind::Nb,
            ClassifierSpec::Tree(_) => ClassifierKind::Tree,
            ClassifierSpec::Forest { .. } => ClassifierKind::Forest,
            ClassifierSpec::Bagging { .. } => ClassifierKind::Bagging,
            ClassifierSpec::Knn(_) => ClassifierKind::Knn,
        }
    }

    /// Display name in benchmark tables.
    pub fn algorithm_name(&self) -> &'static str {
        match self {
            ClassifierSpec::Nb => "Naive Bayes",
            ClassifierSpec::Tree(_) => "Decision Tree",
            ClassifierSpec::Forest { .. } => "Random Forest",
            ClassifierSpec::Bagging { .. } => "Bagging",
            ClassifierSpec::Knn(_) => "IBk (k-NN)",
        }
    }

    /// Short hyperparameter summary.
    pub fn describe(&self) -> String {
        let depth = |t: &TreeParams| t.max_depth.map_or("inf".to_string(), |d| d.to_string());
        match self {
            ClassifierSpec::Nb => "gaussian".into(),
            ClassifierSpec::Tree(t) => format!("max_depth={} min_leaf={}", depth(t), t.min_leaf),
            ClassifierSpec::Forest { n_trees, m_features, bootstrap, tree } => format!(
                "n_trees={n_trees} m_features={} bootstrap={bootstrap} max_depth={} min_leaf={}",
                m_features.map_or("sqrt".to_string(), |m| m.to_string()),
                depth(tree),
                tree.min_leaf
            ),
            ClassifierSpec::Bagging { n_bags, bootstrap, tree } => {
                format!("n_bags={n_bags} bootstrap={bootstrap} max_depth={} min_leaf={}", depth(tree), tree.min_leaf)
            }
            ClassifierSpec::Knn(k) => format!("k={} standardize={}", k.k, k.standardize),
        }
    }

    pub fn train(&self, data: &FeatureDataset, seed: u64) -> Result<TrainedModel, LearnError> {
        match self {
            ClassifierSpec::Nb => train_nb(data),
            ClassifierSpec::Tree(p) => train_tree(data, p),
            ClassifierSpec::Forest { n_trees, m_features, bootstrap, tree } => train_forest(
                data,
                &ForestParams {
                    n_trees: *n_trees,
                    m_features: *m_features,
                    bootstrap: *bootstrap,
                    seed,
                    tree: tree.clone(),
                },
            ),
            ClassifierSpec::Bagging { n_bags, bootstrap, tree } => {
                train_bagging(data, &BaggingParams { n_bags: *n_bags, bootstrap: *bootstrap, seed, tree: tree.clone() })
            }
            ClassifierSpec::Knn(p) => train_knn(data, p),
        }
    }
}

/// Borrowed labeled rows, validated non-empty.
pub(crate) struct Labeled<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [Activity],
    pub n_features: usize,
}

impl<'a> Labeled<'a> {
    pub fn from(data: &'a FeatureDataset) -> Result<Self, LearnError> {
        let labels = data.labels().ok_or(LearnError::MissingLabels)?;
        if data.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        Ok(Labeled { rows: data.rows(), labels, n_features: data.n_features() })
    }
}

pub(crate) fn class_counts(labels: impl IntoIterator<Item = Activity>) -> [usize; Activity::COUNT] {
    let mut c = [0; Activity::COUNT];
    for l in labels {
        c[l.index()] += 1;
    }
    c
}

/// Plurality winner, ties to the smallest code, with vote shares as scores.
pub(crate) fn plurality(counts: &[usize; Activity::COUNT]) -> Prediction {
    let total: usize = counts.iter().sum();
    let best = crate::dsp::argmax_smallest(counts).unwrap_or(0);
    let scores = counts.map(|c| if total > 0 { c as f64 / total as f64 } else { 0.0 });
    Prediction { activity: Activity::ALL[best], scores }
}

pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(test)]
pub(crate) mod test_data {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Gaussian blobs, one per class in `classes`, `per_class` rows each,
    /// centres `spacing` apart along every feature.
    pub fn blobs(classes: &[Activity], per_class: usize, d: usize, spacing: f64, seed: u64) -> FeatureDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for &c in classes {
            for _ in 0..per_class {
                let row = (0..d)
                    .map(|j| spacing * c.code() as f64 * if j % 2 == 0 { 1.0 } else { -0.5 } + noise.sample(&mut rng))
                    .collect();
                rows.push(row);
                labels.push(c);
            }
        }
        let names = FeatureId::all().take(d).collect();
        FeatureDataset::new(names, rows, Some(labels)).unwrap()
    }

    pub fn random_queries(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-20.0..40.0)).collect()).collect()
    }

    pub fn dataset(names: &[&str], rows: Vec<Vec<f64>>, labels: Vec<Activity>) -> FeatureDataset {
        FeatureDataset::new(FeatureId::parse_list(names).unwrap(), rows, Some(labels)).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_data::*;
    use super::*;
    use Activity::*;

    fn all_specs() -> Vec<ClassifierSpec> {
        [ClassifierKind::Nb, ClassifierKind::Tree, ClassifierKind::Forest, ClassifierKind::Bagging, ClassifierKind::Knn]
            .into_iter()
            .map(|k| match ClassifierSpec::default_for(k) {
                ClassifierSpec::Forest { m_features, bootstrap, tree, .. } => {
                    ClassifierSpec::Forest { n_trees: 15, m_features, bootstrap, tree }
                }
                s => s,
            })
            .collect()
    }

    #[test]
    fn save_load_roundtrip_every_kind() {
        let data = blobs(&[Idle, Running, Jumping, SlowWalking], 40, 6, 2.0, 9);
        let queries = random_queries(6, 100, 10);
        for spec in all_specs() {
            let model = spec.train(&data, 3).unwrap();
            let mut buf = Vec::new();
            model.write(&mut buf).unwrap();
            let back = TrainedModel::read(buf.as_slice()).unwrap();
            assert_eq!(back, model, "{spec:?}");
            for q in &queries {
                assert_eq!(back.predict_row(q).unwrap(), model.predict_row(q).unwrap());
            }
        }
    }

    #[test]
    fn file_roundtrip_through_disk() {
        let data = blobs(&[Idle, Running], 20, 3, 3.0, 1);
        let model = train_nb(&data).unwrap();
        let dir = std::env::temp_dir().join(format!("har-model-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("nb.model");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_bad_headers_and_bodies() {
        assert!(matches!(TrainedModel::read(&b"NOTAMODEL/1\n{}"[..]), Err(LearnError::BadMagic)));
        assert!(matches!(TrainedModel::read(&b""[..]), Err(LearnError::BadMagic)));
        assert!(matches!(TrainedModel::read(&b"HARMODEL/2\n{}"[..]), Err(LearnError::VersionMismatch { .. })));
        assert!(matches!(TrainedModel::read(&b"HARMODEL/1\n{\"feature_names\":"[..]), Err(LearnError::Corrupt(_))));
    }

    #[test]
    fn subset_model_projects_full_vectors() {
        let full = blobs(&[Idle, Jogging, Jumping], 30, 42, 1.5, 4);
        let names = ["kurtosisaccy", "meanaccx", "fkurtosisaccz", "energyaccz"];
        let sub = full.select(&names).unwrap();
        for spec in all_specs() {
            let model = spec.train(&sub, 8).unwrap();
            let mut buf = Vec::new();
            model.write(&mut buf).unwrap();
            let model = TrainedModel::read(buf.as_slice()).unwrap();
            for (i, row) in full.rows().iter().enumerate() {
                let fv = FeatureVector { values: row.clone().try_into().unwrap(), label: None };
                assert_eq!(model.predict(&fv), model.predict_row(&sub.rows()[i]).unwrap());
            }
            assert_eq!(model.predict_dataset(&full).unwrap(), model.predict_dataset(&sub).unwrap());
        }
    }

    #[test]
    fn predictions_are_valid_and_deterministic() {
        let data = blobs(&[Idle, SlowWalking, NormalWalking, FastWalking, Jogging, Running, Jumping], 20, 5, 1.0, 2);
        for spec in all_specs() {
            let model = spec.train(&data, 0).unwrap();
            for q in random_queries(5, 50, 6) {
                let a = model.predict_row(&q).unwrap();
                assert!(Activity::from_code(a.activity.code()).is_some());
                assert!(a.scores.iter().all(|s| s.is_finite() && *s >= 0.0));
                assert_eq!(a, model.predict_row(&q).unwrap());
            }
            assert!(model.predict_row(&[0.0; 4]).is_err());
        }
    }

    #[test]
    fn training_requires_labels_and_rows() {
        let unlabeled = FeatureDataset::new(FeatureId::all().take(2).collect(), vec![vec![0.0, 1.0]], None).unwrap();
        let empty = FeatureDataset::new(FeatureId::all().take(2).collect(), vec![], Some(vec![])).unwrap();
        for spec in all_specs() {
            assert!(matches!(spec.train(&unlabeled, 0), Err(LearnError::MissingLabels)));
            assert!(matches!(spec.train(&empty, 0), Err(LearnError::EmptyDataset)));
        }
    }

    #[test]
    fn select_features_table_row() {
        let full = blobs(&[Idle, Running], 5, 42, 1.0, 0);
        let names = [
            "meanaccx",
            "meanaccy",
            "varianceaccy",
            "standarddeviationaccx",
            "standarddeviationaccz",
            "kurtosisaccy",
            "kurtosisaccz",
            "skewnessaccx",
            "skewnessaccz",
            "fkurtosisaccz",
        ];
        let sub = select_features(&full, &names).unwrap();
        assert_eq!(sub.n_features(), 10);
        assert_eq!(sub.len(), full.len());
        let all: Vec<String> = FeatureId::all().map(|f| f.name()).collect();
        assert_eq!(select_features(&full, &all).unwrap(), full);
        assert!(select_features(&full, &["meanaccx", "meanaccx"]).is_err());
        assert!(select_features(&full, &["bogus"]).is_err());
    }
}
